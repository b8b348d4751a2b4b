"""Push-forward particle solver for the nonlocal activity-transport equation.

Represents the density as weighted particles and advances every location
along the characteristic ODE

    du/dt = -H'(u) + rho_bar * psi(u) * sum_p w_p chi(loc_p),

a coupled system because the nonlocal sum runs over the particles
themselves.  Weights never change (push-forward of the initial measure), so
this is an independent cross-check for the finite-volume solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from episcale import analysis
from episcale.macro import GridDensity
from episcale.micro import StabilityError
from episcale.model import ModelSpec, J_MIN, J_MAX

_WEIGHT_TOL = 1e-12
_LOC_TOL = 1e-12
STABILITY_MARGIN = 0.1


@dataclass
class WeightedParticles:
    """Locations in J with nonnegative weights summing to 1."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.locations.shape != self.weights.shape or self.locations.ndim != 1:
            raise ValueError("locations and weights must be matching 1-D arrays")
        if np.any(self.weights < 0.0):
            raise ValueError("weights must be >= 0")
        if abs(float(np.sum(self.weights)) - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must sum to 1")
        if np.any(np.abs(self.locations) > J_MAX + _LOC_TOL):
            raise ValueError("locations outside J")
        self.locations = np.clip(self.locations, J_MIN, J_MAX)

    @property
    def n_particles(self) -> int:
        return self.locations.size

    def copy(self) -> "WeightedParticles":
        return WeightedParticles(self.locations.copy(), self.weights.copy())

    def measure(self) -> analysis.Measure1D:
        return analysis.Measure1D.from_particles(self.locations, self.weights)


def particles_from_grid(g: GridDensity) -> WeightedParticles:
    """One particle per cell at the center, weighted by the cell mass."""
    w = g.cell_avgs * g.dx
    total = float(np.sum(w))
    if total <= 0.0:
        raise ValueError("grid density carries no mass")
    return WeightedParticles(g.centers(), w / total)


def characteristic_rhs(u, particles: WeightedParticles, spec: ModelSpec) -> np.ndarray:
    """-H'(u) + rho_bar * psi(u) * sum_p w_p chi(loc_p)."""
    q = float(np.sum(particles.weights * spec.kernel.chi(particles.locations)))
    u = np.asarray(u, dtype=float)
    return -spec.potential.derivative(u) + spec.rho_bar * spec.kernel.psi(u) * q


@dataclass
class LagrangeTrajectory:
    times: np.ndarray
    states: list  # WeightedParticles per recorded time

    @property
    def final(self) -> "WeightedParticles":
        return self.states[-1]


def _flow_rhs(locs: np.ndarray, weights: np.ndarray, spec: ModelSpec) -> np.ndarray:
    # the nonlocal sum is recomputed from the stage locations, once per stage
    q = float(np.sum(weights * spec.kernel.chi(locs)))
    return -spec.potential.derivative(locs) + spec.rho_bar * spec.kernel.psi(locs) * q


def advance(
    particles: WeightedParticles,
    spec: ModelSpec,
    dt: float,
    t_end: float,
    output_stride: float = None,
) -> LagrangeTrajectory:
    """Advance all particle locations with classical RK4 to t_end.

    Each stage evaluates the coupled right-hand side at stage-consistent
    locations.  Requires dt * Lip(rhs) <= 0.1 when the drift is Lipschitz.
    Records the particle set at every output stride (default: final time only).
    """
    lip = spec.drift_lipschitz_bound()
    if math.isfinite(lip) and dt * lip > STABILITY_MARGIN + 1e-12:
        raise StabilityError(
            f"dt={dt} too large for the characteristic flow: dt*Lip = {dt * lip:.3g}"
        )
    n_steps = int(round(t_end / dt))
    stride = n_steps if output_stride is None else max(1, int(round(output_stride / dt)))
    locs = particles.locations.copy()
    w = particles.weights

    times = [0.0]
    states = [particles.copy()]
    for step in range(1, n_steps + 1):
        k1 = _flow_rhs(locs, w, spec)
        k2 = _flow_rhs(locs + 0.5 * dt * k1, w, spec)
        k3 = _flow_rhs(locs + 0.5 * dt * k2, w, spec)
        k4 = _flow_rhs(locs + dt * k3, w, spec)
        locs = locs + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.max(np.abs(locs)) > J_MAX + _LOC_TOL:
            raise FloatingPointError("particle left J by more than the clamp tolerance")
        locs = np.clip(locs, J_MIN, J_MAX)
        if step % stride == 0 or step == n_steps:
            times.append(step * dt)
            states.append(WeightedParticles(locs.copy(), w.copy()))
    return LagrangeTrajectory(times=np.asarray(times), states=states)


@dataclass
class StabilityProbe:
    times: np.ndarray
    distances: np.ndarray
    envelope: np.ndarray
    c1: float
    c2: float


def stability_probe(
    g0: WeightedParticles,
    h0: WeightedParticles,
    spec: ModelSpec,
    dt: float,
    t_end: float,
    output_stride: float = 0.01,
) -> StabilityProbe:
    """Evolve two particle measures under the same model and track W1(g_t, h_t).

    The returned envelope W1(g0, h0) * exp((c1 + c2) t) uses
    c1 = Lip(H') + rho_bar * Lip(psi) * sup|chi| and
    c2 = rho_bar * Lip(chi) * sup|psi|, the self-consistent form of the
    two-measure contraction estimate.
    """
    ker = spec.kernel
    c1 = spec.potential.lipschitz_derivative + spec.rho_bar * ker.psi.lipschitz_bound * ker.chi_sup
    c2 = spec.rho_bar * ker.chi_profile.lipschitz_bound * ker.c_chi * ker.psi_sup
    traj_g = advance(g0, spec, dt, t_end, output_stride)
    traj_h = advance(h0, spec, dt, t_end, output_stride)
    dists = np.array(
        [analysis.w1(a.measure(), b.measure()) for a, b in zip(traj_g.states, traj_h.states)]
    )
    env = dists[0] * np.exp((c1 + c2) * traj_g.times)
    return StabilityProbe(times=traj_g.times, distances=dists, envelope=env, c1=c1, c2=c2)
