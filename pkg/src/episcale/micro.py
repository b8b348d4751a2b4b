"""Euler-Maruyama simulation of the N-agent system on Omega = [0,1]^2.

Positions follow reflected Brownian motion with diffusion sqrt(2 sigma);
activities follow  dU = (-H'(U) + F) dt  with the pairwise force

    F_i = (coupling_scale / N) * sum_{j != i} Phi(X_i - X_j) psi(U_i) chi(U_j),

computed from the old state for all agents (fully synchronous update).
Realizations draw from independent Philox streams derived from (seed, j),
so ensembles are reproducible and independent of execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from episcale.model import (
    Compartments,
    ConstantOne,
    GaussianActivation,
    IndicatorBall,
    ModelSpec,
    sampling_intervals,
    J_MIN,
    J_MAX,
)

STABILITY_MARGIN = 0.1


class StabilityError(ValueError):
    """Explicit step too large for the drift scales of the model."""


# ---------------------------------------------------------------------------
# State and parameters
# ---------------------------------------------------------------------------

@dataclass
class AgentState:
    """Positions in [0,1]^2 and activities in [-1,1] for N agents at one time."""

    positions: np.ndarray
    activities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.activities = np.asarray(self.activities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must have shape (N, 2)")
        if self.activities.shape != (self.positions.shape[0],):
            raise ValueError("activities must have shape (N,)")
        if np.any(self.positions < 0.0) or np.any(self.positions > 1.0):
            raise ValueError("positions outside [0,1]^2")
        if np.any(self.activities < J_MIN) or np.any(self.activities > J_MAX):
            raise ValueError("activities outside J")

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "AgentState":
        return AgentState(self.positions.copy(), self.activities.copy(), self.time)


@dataclass(frozen=True)
class SimParams:
    """Discretization and ensemble controls for the agent simulation."""

    n_agents: int
    sigma: float
    dt: float
    t_end: float
    seed: int
    n_realizations: int = 1
    output_dt: float = 0.01

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ValueError("dt and t_end must be > 0")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.output_dt < self.dt:
            raise ValueError("output_dt must be >= dt")


def check_step_stability(spec: ModelSpec, dt: float) -> None:
    """Require dt * (Lip(H') + sup|psi| sup|chi|) <= 0.1.

    Sharp piecewise landscapes contribute zero Lipschitz constant (the drift
    is constant between thresholds, where the update is exact).
    """
    lip = spec.potential.lipschitz_derivative
    force_sup = spec.kernel.psi_sup * spec.kernel.chi_sup
    if dt * (lip + force_sup) > STABILITY_MARGIN + 1e-12:
        raise StabilityError(
            f"dt={dt} too large: dt*(Lip(H') + force bound) = "
            f"{dt * (lip + force_sup):.4g} > {STABILITY_MARGIN}"
        )


# ---------------------------------------------------------------------------
# Neighbor grid and the per-agent force (oracle-facing surface)
# ---------------------------------------------------------------------------

@dataclass
class NeighborGrid:
    """Cell-list index over positions with cell size = interaction radius."""

    cell_size: float
    n_side: int
    buckets: dict

    @staticmethod
    def build(positions: np.ndarray, cell_size: float) -> "NeighborGrid":
        if cell_size <= 0.0:
            raise ValueError("cell_size must be > 0")
        n_side = max(1, int(np.ceil(1.0 / cell_size)))
        cx = np.minimum((positions[:, 0] / cell_size).astype(int), n_side - 1)
        cy = np.minimum((positions[:, 1] / cell_size).astype(int), n_side - 1)
        buckets: dict = {}
        for idx in range(positions.shape[0]):
            buckets.setdefault((int(cx[idx]), int(cy[idx])), []).append(idx)
        return NeighborGrid(
            cell_size=cell_size,
            n_side=n_side,
            buckets={k: np.asarray(v, dtype=int) for k, v in buckets.items()},
        )

    def candidates(self, position: np.ndarray) -> np.ndarray:
        """Sorted agent indices from the 3x3 cell neighborhood of a point."""
        cx = min(int(position[0] / self.cell_size), self.n_side - 1)
        cy = min(int(position[1] / self.cell_size), self.n_side - 1)
        found = [
            self.buckets[key]
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
            if (key := (cx + dx, cy + dy)) in self.buckets
        ]
        if not found:
            return np.empty(0, dtype=int)
        return np.sort(np.concatenate(found))


def interaction_force(
    i: int, state: AgentState, spec: ModelSpec, grid: Optional[NeighborGrid] = None
) -> float:
    """Pairwise force on agent i, summed in ascending neighbor index.

    Indicator activation scans only the 3x3 cell neighborhood (the grid is
    built on demand when not supplied); the complete-mixture activation uses
    the global chi sum; the Gaussian activation scans every agent untruncated.
    """
    ker = spec.kernel
    n = state.n_agents
    scale = spec.coupling_scale / n
    psi_i = float(ker.psi(state.activities[i]))
    if isinstance(ker.phi, ConstantOne):
        chi_all = ker.chi(state.activities)
        return scale * psi_i * float(np.sum(chi_all) - chi_all[i])
    if isinstance(ker.phi, IndicatorBall):
        if grid is None:
            grid = NeighborGrid.build(state.positions, ker.phi.radius)
        cand = grid.candidates(state.positions[i])
        r2 = ker.phi.radius * ker.phi.radius
        xi = state.positions[i]
        acc = 0.0
        for j in cand:
            if j == i:
                continue
            d = state.positions[j] - xi
            if d[0] * d[0] + d[1] * d[1] <= r2:
                acc += psi_i * float(ker.chi(state.activities[j]))
        return scale * acc
    # Gaussian: no truncation, ascending index order
    xi = state.positions[i]
    acc = 0.0
    for j in range(n):
        if j == i:
            continue
        d = state.positions[j] - xi
        d2 = d[0] * d[0] + d[1] * d[1]
        acc += float(ker.phi.of_sq_dist(d2)) * psi_i * float(ker.chi(state.activities[j]))
    return scale * acc


# ---------------------------------------------------------------------------
# Vectorized force engine for full runs
# ---------------------------------------------------------------------------

class ForceEngine:
    """All-agent force evaluation, caching pair geometry while positions are static."""

    def __init__(self, spec: ModelSpec, n_agents: int):
        self.spec = spec
        self.scale = spec.coupling_scale / n_agents
        self._weights: Optional[np.ndarray] = None  # pairwise Phi matrix, zero diagonal

    def _pair_weights(self, positions: np.ndarray) -> np.ndarray:
        dx = positions[:, 0][:, None] - positions[:, 0][None, :]
        dy = positions[:, 1][:, None] - positions[:, 1][None, :]
        w = self.spec.kernel.phi.of_sq_dist(dx * dx + dy * dy)
        np.fill_diagonal(w, 0.0)
        return w

    def forces(self, positions: np.ndarray, activities: np.ndarray, moved: bool) -> np.ndarray:
        ker = self.spec.kernel
        psi = ker.psi(activities)
        chi = ker.chi(activities)
        if isinstance(ker.phi, ConstantOne):
            return self.scale * psi * (np.sum(chi) - chi)
        if moved or self._weights is None:
            self._weights = self._pair_weights(positions)
        return self.scale * psi * np.sum(self._weights * chi[None, :], axis=1)


def _reflect_unit(x: np.ndarray) -> np.ndarray:
    """Billiard reflection of arbitrary reals into [0, 1]."""
    y = np.mod(x, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def em_step(
    state: AgentState,
    spec: ModelSpec,
    dt: float,
    noise: Optional[np.ndarray] = None,
    forces: Optional[np.ndarray] = None,
) -> AgentState:
    """One synchronous update; forces default to a fresh evaluation of the
    pairwise sum on the old state.  noise is (N, 2) standard normal draws
    (ignored when sigma = 0)."""
    if forces is None:
        engine = ForceEngine(spec, state.n_agents)
        forces = engine.forces(state.positions, state.activities, moved=True)
    if spec.sigma > 0.0:
        if noise is None:
            raise ValueError("noise draws required when sigma > 0")
        disp = np.sqrt(2.0 * spec.sigma * dt) * noise
        new_pos = _reflect_unit(state.positions + disp)
    else:
        new_pos = state.positions.copy()
    drift = -spec.potential.derivative(state.activities) + forces
    new_act = np.clip(state.activities + dt * drift, J_MIN, J_MAX)
    out = AgentState.__new__(AgentState)
    out.positions = new_pos
    out.activities = new_act
    out.time = state.time + dt
    return out


# ---------------------------------------------------------------------------
# Realizations and ensembles
# ---------------------------------------------------------------------------

@dataclass
class CompartmentSeries:
    """Compartment counts over time; ensemble runs carry mean and std bands."""

    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    s_std: Optional[np.ndarray] = None
    i_std: Optional[np.ndarray] = None
    r_std: Optional[np.ndarray] = None


@dataclass
class RealizationResult:
    series: CompartmentSeries
    final_state: AgentState
    snapshots: list = field(default_factory=list)  # (time, AgentState) pairs


def run_realization(
    init: AgentState,
    spec: ModelSpec,
    params: SimParams,
    rng: Optional[np.random.Generator] = None,
    snapshot_times: Sequence[float] = (),
) -> RealizationResult:
    """Iterate em_step to t_end, recording counts every output stride.

    Deterministic given the RNG stream (defaults to Philox keyed on
    params.seed).  Position and activity bounds are asserted at every
    recorded stride.
    """
    check_step_stability(spec, params.dt)
    if rng is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(params.seed)))
    comp = spec.compartments
    n_steps = int(round(params.t_end / params.dt))
    stride = max(1, int(round(params.output_dt / params.dt)))
    snap_steps = {int(round(t / params.dt)): t for t in snapshot_times}

    engine = ForceEngine(spec, init.n_agents)
    positions = init.positions.copy()
    activities = init.activities.copy()
    moving = spec.sigma > 0.0
    sqrt_disp = np.sqrt(2.0 * spec.sigma * params.dt) if moving else 0.0

    times, s_c, i_c, r_c = [], [], [], []
    snapshots = []

    def record(step: int):
        t = step * params.dt
        assert positions.min() >= 0.0 and positions.max() <= 1.0
        assert activities.min() >= J_MIN and activities.max() <= J_MAX
        s, i, r = comp.counts(activities)
        times.append(t)
        s_c.append(s)
        i_c.append(i)
        r_c.append(r)

    def snapshot(step: int):
        t = snap_steps[step]
        snapshots.append((t, AgentState(positions.copy(), activities.copy(), t)))

    record(0)
    if 0 in snap_steps:
        snapshot(0)
    first_force = True
    for step in range(1, n_steps + 1):
        forces = engine.forces(positions, activities, moved=moving or first_force)
        first_force = False
        if moving:
            positions = _reflect_unit(positions + sqrt_disp * rng.standard_normal(positions.shape))
        drift = -spec.potential.derivative(activities) + forces
        activities = np.clip(activities + params.dt * drift, J_MIN, J_MAX)
        if step % stride == 0 or step == n_steps:
            record(step)
        if step in snap_steps:
            snapshot(step)

    series = CompartmentSeries(
        times=np.asarray(times),
        s=np.asarray(s_c),
        i=np.asarray(i_c),
        r=np.asarray(r_c),
    )
    final = AgentState(positions, activities, n_steps * params.dt)
    return RealizationResult(series=series, final_state=final, snapshots=snapshots)


@dataclass
class EnsembleResult:
    series: CompartmentSeries  # mean and std bands
    counts: np.ndarray  # (M, T, 3) raw counts by realization index
    snapshots: list = field(default_factory=list)  # from realization 0


def realization_streams(seed: int, n_realizations: int) -> list:
    """Independent child streams derived from (seed, realization index)."""
    return np.random.SeedSequence(seed).spawn(n_realizations)


def run_ensemble(
    init_sampler: Callable[[np.random.Generator], AgentState],
    spec: ModelSpec,
    params: SimParams,
    snapshot_times: Sequence[float] = (),
    threads: int = 1,
) -> EnsembleResult:
    """Mean and unbiased-std compartment bands over n_realizations runs.

    Realization j draws its initial state and its noise from one Philox
    stream spawned from (seed, j); the reduction is by realization index, so
    the result does not depend on scheduling or thread count.
    """
    if params.n_realizations < 2:
        raise ValueError("ensemble statistics need n_realizations >= 2")
    streams = realization_streams(params.seed, params.n_realizations)

    def one(j: int) -> RealizationResult:
        rng = np.random.Generator(np.random.Philox(streams[j]))
        init = init_sampler(rng)
        return run_realization(
            init, spec, params, rng=rng, snapshot_times=snapshot_times if j == 0 else ()
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(params.n_realizations)))
    else:
        results = [one(j) for j in range(params.n_realizations)]

    counts = np.stack(
        [np.stack([r.series.s, r.series.i, r.series.r], axis=1) for r in results]
    ).astype(float)
    mean = counts.mean(axis=0)
    std = counts.std(axis=0, ddof=1)
    series = CompartmentSeries(
        times=results[0].series.times,
        s=mean[:, 0],
        i=mean[:, 1],
        r=mean[:, 2],
        s_std=std[:, 0],
        i_std=std[:, 1],
        r_std=std[:, 2],
    )
    return EnsembleResult(series=series, counts=counts, snapshots=results[0].snapshots)


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridUniformSplit:
    """Grid positions; frac_s of agents uniform in the susceptible band,
    frac_i uniform in the infectious band, remainder at the midpoint of the
    recovered band.  Class labels are shuffled across grid sites."""

    frac_s: float
    frac_i: float

    def __post_init__(self):
        if self.frac_s < 0.0 or self.frac_i < 0.0 or self.frac_s + self.frac_i > 1.0:
            raise ValueError("fractions must be >= 0 with frac_s + frac_i <= 1")


@dataclass(frozen=True)
class ClusteredInfection:
    """Grid positions; agents inside the disk start infectious with activities
    evenly spaced over the infectious band, the rest susceptible with
    activities descending from just below the threshold (near the cluster)
    to nearly immune (far side)."""

    center: tuple = (0.25, 0.25)
    radius: float = 0.25


@dataclass(frozen=True)
class CustomInit:
    positions: np.ndarray
    activities: np.ndarray


def grid_positions(n: int) -> np.ndarray:
    """First n cell centers of the smallest square grid with >= n sites."""
    m = int(np.ceil(np.sqrt(n)))
    coords = (np.arange(m) + 0.5) / m
    xx, yy = np.meshgrid(coords, coords)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[:n]


def initial_conditions(
    kind,
    n_agents: int,
    comp: Compartments,
    spec: Optional[ModelSpec] = None,
    rng: Optional[np.random.Generator] = None,
) -> AgentState:
    """Build an initial AgentState.

    The sampling windows for activities respect the kernel's mollifier
    ramps when a spec is given (see model.sampling_intervals).
    """
    if isinstance(kind, CustomInit):
        return AgentState(np.asarray(kind.positions), np.asarray(kind.activities))

    if spec is not None:
        (s_lo, s_hi), (i_lo, i_hi) = sampling_intervals(spec.kernel, comp)
    else:
        (s_lo, s_hi), (i_lo, i_hi) = comp.s_interval, comp.i_interval
    positions = grid_positions(n_agents)

    if isinstance(kind, GridUniformSplit):
        if rng is None:
            raise ValueError("grid_uniform_split needs an RNG")
        n_s = int(np.floor(kind.frac_s * n_agents))
        n_i = int(np.floor(kind.frac_i * n_agents))
        n_r = n_agents - n_s - n_i
        activities = np.concatenate(
            [
                rng.uniform(s_lo, s_hi, size=n_s),
                rng.uniform(i_lo, i_hi, size=n_i),
                np.full(n_r, 0.5 * (comp.u_bar + J_MAX)),
            ]
        )
        activities = activities[rng.permutation(n_agents)]
        return AgentState(positions, activities)

    if isinstance(kind, ClusteredInfection):
        center = np.asarray(kind.center)
        d2 = np.sum((positions - center) ** 2, axis=1)
        inside = d2 <= kind.radius**2
        n_in = int(np.count_nonzero(inside))
        if n_in == 0:
            raise ValueError("infection disk contains no grid sites")
        activities = np.empty(n_agents)
        activities[inside] = np.linspace(i_lo + 0.1 * (i_hi - i_lo), i_hi, n_in)
        n_out = n_agents - n_in
        activities[~inside] = np.linspace(s_hi, s_lo, n_out)
        return AgentState(positions, activities)

    raise TypeError(f"unknown initial-condition kind {type(kind).__name__}")
