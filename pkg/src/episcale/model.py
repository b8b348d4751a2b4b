"""Model primitives: compartments, potential landscapes, interaction kernels.

The activity (health) state of an agent lives in J = [-1, 1].  A threshold
u* splits off the susceptible band S = (-1, u*), an upper bound u_bar ends
the infectious band I = (u*, u_bar), and R = (u_bar, 1] is the recovered
band.  Activity is driven downhill on a potential landscape H and pushed
upward by a pairwise infection force

    K(x, u, y, v) = Phi(x - y) * psi(u) * chi(v),

where Phi gates on spatial proximity, psi on the susceptibility of the
receiving agent and chi on the infectivity of the source agent.

All objects here are immutable after validation and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

J_MIN = -1.0
J_MAX = 1.0


class FeasibilityError(ValueError):
    """Raised when a model assembly violates one or more feasibility rules.

    Carries the full list of violated conditions so callers can report
    them all at once.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("infeasible model: " + "; ".join(self.violations))


# ---------------------------------------------------------------------------
# Compartments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Compartments:
    """Threshold structure on J: S = (-1, u_star), I = (u_star, u_bar), R = (u_bar, 1].

    Numeric membership tests are total (half-open):
    S: u < u_star, I: u_star <= u < u_bar, R: u >= u_bar.
    """

    u_star: float
    u_bar: float

    def __post_init__(self):
        if not (J_MIN < self.u_star < self.u_bar <= J_MAX):
            raise ValueError(
                f"compartments need -1 < u_star < u_bar <= 1, "
                f"got u_star={self.u_star}, u_bar={self.u_bar}"
            )

    @property
    def s_interval(self) -> tuple:
        return (J_MIN, self.u_star)

    @property
    def i_interval(self) -> tuple:
        return (self.u_star, self.u_bar)

    @property
    def r_interval(self) -> tuple:
        return (self.u_bar, J_MAX)

    def counts(self, activities: np.ndarray) -> tuple:
        """(susceptible, infectious, recovered) counts under the half-open rule."""
        u = np.asarray(activities)
        s = int(np.count_nonzero(u < self.u_star))
        r = int(np.count_nonzero(u >= self.u_bar))
        return s, u.size - s - r, r


# ---------------------------------------------------------------------------
# Indicator profiles
# ---------------------------------------------------------------------------

def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class MollifiedIndicator:
    """Smoothed indicator of (a, b): cubic ramps of width eps inside the interval.

    Exactly 0 outside [a, b], exactly 1 on [a + eps, b - eps]; the ramps are
    the smoothstep 3t^2 - 2t^3, so the profile is C^1 with Lipschitz
    constant 1.5/eps (<= 2/eps).
    """

    a: float
    b: float
    eps: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got ({self.a}, {self.b})")
        if not 0.0 < self.eps < 0.5 * (self.b - self.a):
            raise ValueError(
                f"ramp width must satisfy 0 < eps < (b - a)/2, got eps={self.eps}"
            )

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        up = _smoothstep(np.clip((u - self.a) / self.eps, 0.0, 1.0))
        down = _smoothstep(np.clip((self.b - u) / self.eps, 0.0, 1.0))
        return up * down

    @property
    def support(self) -> tuple:
        return (self.a, self.b)

    @property
    def lipschitz_bound(self) -> float:
        return 1.5 / self.eps


@dataclass(frozen=True)
class SharpIndicator:
    """Plain indicator of the open interval (a, b).

    The eps -> 0 limit of the mollified profile.  Not Lipschitz; feasibility
    validation treats it as a documented relaxation (see check_feasibility).
    """

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got ({self.a}, {self.b})")

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return ((u > self.a) & (u < self.b)).astype(float)

    @property
    def support(self) -> tuple:
        return (self.a, self.b)

    @property
    def lipschitz_bound(self) -> float:
        return math.inf


# ---------------------------------------------------------------------------
# Potential landscapes
# ---------------------------------------------------------------------------

def eval_double_well(alpha: float, beta: float, u) -> np.ndarray:
    """alpha*(u^2-1)^2 + beta*(1 - sin(pi u / 2)) on J.

    Raises ValueError if any input lies outside [-1, 1].
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < J_MIN) or np.any(u > J_MAX):
        raise ValueError("activity outside J = [-1, 1]")
    return alpha * (u * u - 1.0) ** 2 + beta * (1.0 - np.sin(0.5 * np.pi * u))


def eval_double_well_derivative(alpha: float, beta: float, u) -> np.ndarray:
    """d/du of the double-well: 4*alpha*u*(u^2-1) - (beta*pi/2)*cos(pi u / 2)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < J_MIN) or np.any(u > J_MAX):
        raise ValueError("activity outside J = [-1, 1]")
    return 4.0 * alpha * u * (u * u - 1.0) - 0.5 * beta * np.pi * np.cos(0.5 * np.pi * u)


@dataclass(frozen=True)
class DoubleWell:
    """Double-well landscape with minima at u = -1, 1 and one interior maximum.

    Feasible only for beta < 32*alpha/pi^2 (strict).
    """

    alpha: float
    beta: float

    def value(self, u) -> np.ndarray:
        return eval_double_well(self.alpha, self.beta, u)

    def derivative(self, u) -> np.ndarray:
        return eval_double_well_derivative(self.alpha, self.beta, u)

    @property
    def lipschitz_derivative(self) -> float:
        # |H''| <= 8*alpha + beta*pi^2/4 on J
        return 8.0 * self.alpha + 0.25 * self.beta * np.pi ** 2

    @property
    def declared_u_star(self) -> Optional[float]:
        return None


def _piecewise_value(derivative, u) -> np.ndarray:
    """H(u) = integral_u^1 H'(s) ds, so that H(1) = 0.  Composite trapezoid."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    for k, uk in enumerate(u):
        s = np.linspace(uk, J_MAX, 2001)
        out[k] = float(np.trapezoid(derivative(s), s))
    return out if out.size > 1 else out[0]


@dataclass(frozen=True)
class PiecewiseLinear:
    """Recovery-ramp landscape: H' = lam on S, -recovery_slope on I u R.

    Stored through its derivative; the value, when asked for, is integrated
    from H(1) = 0.  The drift -H' pulls susceptible agents toward -1 at rate
    lam and drives infected agents toward +1 at rate recovery_slope.  u_star
    is declared (the smoothed derivative has a flat zero at the threshold,
    so searching for it is ill-posed).
    """

    lam: float
    recovery_slope: float
    compartments: Compartments
    eps: Optional[float] = None

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.recovery_slope <= 0.0:
            raise ValueError("recovery_slope must be > 0")
        comp = self.compartments
        if self.eps is None:
            ind_s = SharpIndicator(J_MIN, comp.u_star)
            ind_ir = SharpIndicator(comp.u_star, J_MAX)
        else:
            ind_s = MollifiedIndicator(J_MIN, comp.u_star, self.eps)
            ind_ir = MollifiedIndicator(comp.u_star, J_MAX, self.eps)
        object.__setattr__(self, "_ind_s", ind_s)
        object.__setattr__(self, "_ind_ir", ind_ir)

    def derivative(self, u) -> np.ndarray:
        return self.lam * self._ind_s(u) - self.recovery_slope * self._ind_ir(u)

    def value(self, u) -> np.ndarray:
        return _piecewise_value(self.derivative, u)

    @property
    def lipschitz_derivative(self) -> float:
        if self.eps is None:
            return 0.0  # piecewise constant away from the jumps
        return max(self.lam, self.recovery_slope) * 1.5 / self.eps

    @property
    def declared_u_star(self) -> Optional[float]:
        return self.compartments.u_star


@dataclass(frozen=True)
class SimplifiedLandscape:
    """Threshold-model landscape: H' = lam on S, -gamma_rec on I, 0 on R.

    The drift -H' is -lam on the susceptible band (resistance) and
    +gamma_rec on the infectious band (recovery).  Typically used with
    u_bar = 1 so the recovered band degenerates to the point {1}.
    """

    lam: float
    gamma_rec: float
    compartments: Compartments
    eps: Optional[float] = None

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.gamma_rec <= 0.0:
            raise ValueError("gamma_rec must be > 0")
        comp = self.compartments
        if self.eps is None:
            ind_s = SharpIndicator(J_MIN, comp.u_star)
            ind_i = SharpIndicator(comp.u_star, comp.u_bar)
        else:
            ind_s = MollifiedIndicator(J_MIN, comp.u_star, self.eps)
            ind_i = MollifiedIndicator(comp.u_star, comp.u_bar, self.eps)
        object.__setattr__(self, "_ind_s", ind_s)
        object.__setattr__(self, "_ind_i", ind_i)

    def derivative(self, u) -> np.ndarray:
        return self.lam * self._ind_s(u) - self.gamma_rec * self._ind_i(u)

    def value(self, u) -> np.ndarray:
        return _piecewise_value(self.derivative, u)

    @property
    def lipschitz_derivative(self) -> float:
        if self.eps is None:
            return 0.0
        return max(self.lam, self.gamma_rec) * 1.5 / self.eps

    @property
    def declared_u_star(self) -> Optional[float]:
        return self.compartments.u_star


def find_u_star(potential, tol: float = 1e-10) -> float:
    """Global maximizer of the landscape on J.

    Piecewise kinds declare their threshold.  For the double well the
    derivative is bracketed on a fine interior grid and each sign change is
    bisected to ``tol``; the root with the largest landscape value wins.

    Raises FeasibilityError if no interior critical point exists.
    """
    declared = potential.declared_u_star
    if declared is not None:
        return declared

    grid = np.linspace(J_MIN + 1e-9, J_MAX - 1e-9, 4001)
    d = potential.derivative(grid)
    roots = []
    sign_change = np.nonzero(np.diff(np.sign(d)) != 0)[0]
    for k in sign_change:
        lo, hi = grid[k], grid[k + 1]
        flo = potential.derivative(lo)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fmid = potential.derivative(mid)
            if flo * fmid <= 0.0:
                hi = mid
            else:
                lo, flo = mid, fmid
            if hi - lo < tol:
                break
        roots.append(0.5 * (lo + hi))
    if not roots:
        raise FeasibilityError(["no interior critical point of the landscape"])
    values = [float(potential.value(r)) for r in roots]
    return roots[int(np.argmax(values))]


# ---------------------------------------------------------------------------
# Spatial activation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndicatorBall:
    """Phi(r) = 1 for |r| <= radius, else 0."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be > 0")

    def of_sq_dist(self, d2) -> np.ndarray:
        return (np.asarray(d2, dtype=float) <= self.radius * self.radius).astype(float)

    @property
    def effective_radius(self) -> Optional[float]:
        return self.radius


@dataclass(frozen=True)
class GaussianActivation:
    """Phi(r) = exp(-|r|^2 / (2 width^2)); every agent is a neighbor."""

    width: float

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError("width must be > 0")

    def of_sq_dist(self, d2) -> np.ndarray:
        return np.exp(-np.asarray(d2, dtype=float) / (2.0 * self.width * self.width))

    @property
    def effective_radius(self) -> Optional[float]:
        return None


@dataclass(frozen=True)
class ConstantOne:
    """Phi = 1 everywhere: the complete-mixture activation."""

    def of_sq_dist(self, d2) -> np.ndarray:
        return np.ones_like(np.asarray(d2, dtype=float))

    @property
    def effective_radius(self) -> Optional[float]:
        return None


# ---------------------------------------------------------------------------
# Interaction kernel
# ---------------------------------------------------------------------------

DEFAULT_EPS_FRACTION = 0.05


@dataclass(frozen=True)
class InteractionKernel:
    """Product kernel Phi(x - y) * psi(u) * chi(v) with chi = c_chi * chi_profile.

    psi is supported in the susceptible band and chi_profile in the
    infectious band, so psi * chi vanishes identically and the kernel can
    never act between agents of equal activity.
    """

    phi: object
    psi: object
    chi_profile: object
    c_chi: float

    def __post_init__(self):
        if not 0.0 < self.c_chi <= 1.0:
            raise ValueError("c_chi must lie in (0, 1]")

    def chi(self, u) -> np.ndarray:
        return self.c_chi * self.chi_profile(u)

    @property
    def psi_sup(self) -> float:
        return 1.0

    @property
    def chi_sup(self) -> float:
        return self.c_chi

    @classmethod
    def build(
        cls,
        comp: Compartments,
        phi,
        c_chi: float,
        eps: Optional[float] = None,
        eps_fraction: float = DEFAULT_EPS_FRACTION,
        sharp: bool = False,
    ) -> "InteractionKernel":
        """Assemble psi over S and chi over I.

        ``eps`` fixes an absolute ramp width for both profiles; otherwise the
        width defaults to ``eps_fraction`` of each band.  ``sharp=True``
        selects plain indicators (the eps -> 0 limit).
        """
        s_lo, s_hi = comp.s_interval
        i_lo, i_hi = comp.i_interval
        if sharp:
            psi = SharpIndicator(s_lo, s_hi)
            chi = SharpIndicator(i_lo, i_hi)
        else:
            eps_s = eps if eps is not None else eps_fraction * (s_hi - s_lo)
            eps_i = eps if eps is not None else eps_fraction * (i_hi - i_lo)
            psi = MollifiedIndicator(s_lo, s_hi, eps_s)
            chi = MollifiedIndicator(i_lo, i_hi, eps_i)
        return cls(phi=phi, psi=psi, chi_profile=chi, c_chi=c_chi)


# ---------------------------------------------------------------------------
# Validated model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Validated bundle: landscape, kernel, compartments, diffusion, density.

    ``coupling_scale`` multiplies the pairwise force in the N-agent system.
    It is 1 for the plain weakly coupled force (1/N sum over pairs); runs
    that shrink the interaction radius with N to keep the contact count
    bounded set it to N so the push per contact stays O(1).
    """

    potential: object
    kernel: InteractionKernel
    compartments: Compartments
    sigma: float = 0.0
    rho_bar: float = 1.0
    coupling_scale: float = 1.0

    def drift_lipschitz_bound(self) -> float:
        """Lipschitz bound of u -> -H'(u) + rho_bar * psi(u) * <chi, g>.

        Infinite for sharp kernel profiles.
        """
        ker = self.kernel
        return self.potential.lipschitz_derivative + self.rho_bar * (
            ker.psi.lipschitz_bound * ker.chi_sup
            + ker.chi_profile.lipschitz_bound * ker.c_chi * ker.psi_sup
        )


def _support_within(inner: tuple, outer: tuple, tol: float = 1e-12) -> bool:
    return inner[0] >= outer[0] - tol and inner[1] <= outer[1] + tol


def check_feasibility(
    potential,
    kernel: InteractionKernel,
    comp: Compartments,
    sigma: float = 0.0,
    rho_bar: float = 1.0,
    coupling_scale: float = 1.0,
    require_lipschitz: bool = True,
) -> ModelSpec:
    """Validate a model assembly and return an immutable ModelSpec.

    Checks, collecting every violation before raising:
      * double-well parameter bound beta < 32*alpha/pi^2 (strict) and a
        unique interior maximum consistent with comp.u_star;
      * piecewise landscapes built on the same compartments;
      * H'(-1) = H'(1) = 0 for smooth kinds;
      * kernel supports: psi inside S, chi inside I, disjoint, and
        psi * chi = 0 on a 10^4-point grid of J;
      * Lipschitz profiles (skipped with require_lipschitz=False, the
        documented sharp-indicator relaxation);
      * sigma >= 0, rho_bar > 0, coupling_scale > 0.
    """
    violations = []

    if isinstance(potential, DoubleWell):
        bound = 32.0 * potential.alpha / np.pi ** 2
        if not potential.beta < bound:
            violations.append(
                f"beta >= 32*alpha/pi^2 (beta={potential.beta}, bound={bound:.6g})"
            )
        else:
            d_ends = potential.derivative(np.array([J_MIN, J_MAX]))
            if np.max(np.abs(d_ends)) > 1e-12:
                violations.append("landscape derivative does not vanish at -1, 1")
            try:
                u_star = find_u_star(potential)
            except FeasibilityError as err:
                violations.extend(err.violations)
            else:
                grid = np.linspace(J_MIN + 1e-9, J_MAX - 1e-9, 4001)
                d = potential.derivative(grid)
                n_roots = int(np.count_nonzero(np.diff(np.sign(d)) != 0))
                if n_roots != 1:
                    violations.append(
                        f"expected a unique interior critical point, found {n_roots}"
                    )
                else:
                    h = 1e-5
                    curv = float(
                        potential.value(u_star + h)
                        - 2.0 * potential.value(u_star)
                        + potential.value(u_star - h)
                    ) / (h * h)
                    if curv >= 0.0:
                        violations.append("interior critical point is not a maximum")
                if abs(u_star - comp.u_star) > 1e-6:
                    violations.append(
                        f"compartment u_star={comp.u_star} does not match the "
                        f"landscape maximizer {u_star:.8f}"
                    )
    elif isinstance(potential, (PiecewiseLinear, SimplifiedLandscape)):
        if potential.compartments != comp:
            violations.append("piecewise landscape built on different compartments")
    else:
        violations.append(f"unknown landscape kind {type(potential).__name__}")

    psi, chi = kernel.psi, kernel.chi_profile
    if not _support_within(psi.support, comp.s_interval):
        violations.append(f"psi support {psi.support} not inside S {comp.s_interval}")
    if not _support_within(chi.support, comp.i_interval):
        violations.append(f"chi support {chi.support} not inside I {comp.i_interval}")
    if psi.support[1] > chi.support[0] + 1e-12:
        violations.append("psi and chi supports overlap")
    else:
        grid = np.linspace(J_MIN, J_MAX, 10_000)
        if np.max(np.abs(psi(grid) * kernel.chi(grid))) > 0.0:
            violations.append("psi * chi is not identically zero on J")
    if require_lipschitz:
        for name, prof in (("psi", psi), ("chi", chi)):
            if not math.isfinite(prof.lipschitz_bound):
                violations.append(f"{name} is not Lipschitz (sharp profile)")
        if not math.isfinite(potential.lipschitz_derivative) and not isinstance(
            potential, (PiecewiseLinear, SimplifiedLandscape)
        ):
            violations.append("landscape derivative is not Lipschitz")

    if sigma < 0.0:
        violations.append("sigma must be >= 0")
    if rho_bar <= 0.0:
        violations.append("rho_bar must be > 0")
    if coupling_scale <= 0.0:
        violations.append("coupling_scale must be > 0")

    if violations:
        raise FeasibilityError(violations)
    return ModelSpec(
        potential=potential,
        kernel=kernel,
        compartments=comp,
        sigma=sigma,
        rho_bar=rho_bar,
        coupling_scale=coupling_scale,
    )


def sampling_intervals(kernel: InteractionKernel, comp: Compartments) -> tuple:
    """Sub-intervals of S and I used when drawing initial activities.

    Mollified profiles push the sampling window onto the plateau (away from
    the ramps) so initial compartment masses are exact; sharp profiles use
    the full open bands.
    """
    s_lo, s_hi = comp.s_interval
    i_lo, i_hi = comp.i_interval
    psi, chi = kernel.psi, kernel.chi_profile
    m_s = psi.eps if isinstance(psi, MollifiedIndicator) else 0.0
    m_i = chi.eps if isinstance(chi, MollifiedIndicator) else 0.0
    return (s_lo + m_s, s_hi - m_s), (i_lo + m_i, i_hi - m_i)
