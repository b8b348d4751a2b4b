"""Metrics and statistics: 1-D Wasserstein distances, ensemble estimators, rate fits.

W1 is computed exactly as the integral of |F_a - F_b| between the two CDFs.
Between consecutive breakpoints (atom locations and grid cell edges) the
CDF difference is affine, so the integral is a closed-form sum over the
merged breakpoint list — exact for samples, weighted particles, and
cell-averaged grid densities alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASS_TOL = 1e-10


@dataclass(frozen=True)
class Measure1D:
    """A probability measure on the line: atoms or a piecewise-uniform density.

    kind 'atoms': breakpoints are atom locations, cum[k] = mass of the first
    k atoms.  kind 'grid': breakpoints are cell edges and the CDF is the
    continuous piecewise-linear interpolant of cum.
    """

    kind: str
    points: np.ndarray
    cum: np.ndarray  # len(points) + 1 cumulative masses, cum[0] = 0

    @staticmethod
    def from_samples(values) -> "Measure1D":
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            raise ValueError("empty sample set")
        w = np.full(v.size, 1.0 / v.size)
        return Measure1D("atoms", v, np.concatenate(([0.0], np.cumsum(w))))

    @staticmethod
    def from_particles(locations, weights) -> "Measure1D":
        loc = np.asarray(locations, dtype=float)
        w = np.asarray(weights, dtype=float)
        if loc.size == 0:
            raise ValueError("empty particle set")
        if np.any(w < 0.0):
            raise ValueError("negative particle weight")
        order = np.argsort(loc, kind="stable")
        return Measure1D(
            "atoms", loc[order], np.concatenate(([0.0], np.cumsum(w[order])))
        )

    @staticmethod
    def from_grid(cell_avgs, u_min: float = -1.0, dx: float = None) -> "Measure1D":
        g = np.asarray(cell_avgs, dtype=float)
        if dx is None:
            dx = 2.0 / g.size
        edges = u_min + dx * np.arange(g.size + 1)
        return Measure1D("grid", edges, np.concatenate(([0.0], np.cumsum(g * dx))))

    @property
    def total_mass(self) -> float:
        return float(self.cum[-1])

    def cdf_right(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "atoms":
            return self.cum[np.searchsorted(self.points, x, side="right")]
        return np.interp(x, self.points, self.cum)

    def cdf_left(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "atoms":
            return self.cum[np.searchsorted(self.points, x, side="left")]
        return np.interp(x, self.points, self.cum)


def _as_measure(m) -> Measure1D:
    if isinstance(m, Measure1D):
        return m
    if hasattr(m, "cell_avgs"):  # GridDensity duck type
        return Measure1D.from_grid(m.cell_avgs)
    if hasattr(m, "locations") and hasattr(m, "weights"):
        return Measure1D.from_particles(m.locations, m.weights)
    return Measure1D.from_samples(m)


def _segment_integrals(d_left, d_right, widths) -> np.ndarray:
    """Integral of |affine segment| running from d_left to d_right over widths."""
    same = d_left * d_right >= 0.0
    denom = np.abs(d_left) + np.abs(d_right)
    with np.errstate(invalid="ignore", divide="ignore"):
        crossing = np.where(denom > 0.0, (d_left**2 + d_right**2) / (2.0 * denom), 0.0)
    trapezoid = 0.5 * (np.abs(d_left) + np.abs(d_right))
    return np.where(same, trapezoid, crossing) * widths


def w1(a, b) -> float:
    """Exact 1-Wasserstein distance between two normalized measures.

    Accepts Measure1D, grid densities, (locations, weights) particle objects,
    or raw sample arrays.  Raises ValueError when either mass is not 1.
    """
    ma, mb = _as_measure(a), _as_measure(b)
    for m in (ma, mb):
        if abs(m.total_mass - 1.0) > _MASS_TOL:
            raise ValueError(f"measure not normalized: mass = {m.total_mass!r}")
    pts = np.union1d(ma.points, mb.points)
    if pts.size < 2:
        return 0.0
    d_left = ma.cdf_right(pts[:-1]) - mb.cdf_right(pts[:-1])
    d_right = ma.cdf_left(pts[1:]) - mb.cdf_left(pts[1:])
    return float(np.sum(_segment_integrals(d_left, d_right, np.diff(pts))))


def w2_sq_samples(a, b) -> float:
    """Squared 2-Wasserstein distance between equal-size empirical measures.

    The optimal coupling in one dimension pairs order statistics, so this is
    the mean of squared differences of the sorted samples.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size != b.size:
        raise ValueError(f"sample counts differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty samples")
    return float(np.mean((a - b) ** 2))


def fit_loglog_slope(xs, ys) -> tuple:
    """Least-squares slope of log(y) against log(x).

    Returns (slope, intercept, residual) where residual is the sum of squared
    log-space deviations.  Requires at least 3 strictly positive points.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("log-log fit requires strictly positive data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    return float(slope), float(intercept), residual


def ensemble_stats(values) -> tuple:
    """(mean, unbiased variance, std) of a batch of realizations.

    Variance uses divisor M - 1 and requires M >= 2.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("variance needs at least 2 realizations")
    mean = float(np.mean(v))
    var = float(np.var(v, ddof=1))
    return mean, var, float(np.sqrt(var))
