"""Classical SIR reference and the parameter bridge to the agent model.

The bridge identifies the SIR transmission rate beta = p * C0 with the
transmission probability p (the kernel strength c_chi) and the limiting
per-agent contact count c0.  For N grid agents the interaction radius is
shrunk as R = R0 / sqrt(N - 1) so the contact count stays bounded; the
Gaussian activation shrinks its variance as sigma0^2 / N instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SirParams:
    """Transmission rate, recovery rate, and initial masses (count units)."""

    beta: float
    gamma: float
    s0: float
    i0: float
    r0: float = 0.0

    def __post_init__(self):
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")
        if min(self.s0, self.i0, self.r0) < 0.0:
            raise ValueError("initial masses must be >= 0")
        if self.s0 + self.i0 + self.r0 <= 0.0:
            raise ValueError("total population must be > 0")


def sir_solve(params: SirParams, dt: float, t_end: float) -> tuple:
    """Integrate dS = -beta S I, dI = beta S I - gamma I, dR = gamma I.

    Classic 4th-order Runge-Kutta with fixed step; conserves S + I + R to
    rounding.  Returns (times, S, I, R) arrays.
    """
    if dt <= 0.0 or t_end <= 0.0:
        raise ValueError("dt and t_end must be > 0")
    n_steps = int(round(t_end / dt))

    def rhs(y):
        s, i, _ = y
        inf = params.beta * s * i
        rec = params.gamma * i
        return np.array([-inf, inf - rec, rec])

    y = np.array([params.s0, params.i0, params.r0], dtype=float)
    out = np.empty((n_steps + 1, 3))
    out[0] = y
    for k in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    times = dt * np.arange(n_steps + 1)
    return times, out[:, 0], out[:, 1], out[:, 2]


@dataclass(frozen=True)
class BridgeParams:
    """Contact scaling inputs: limiting contacts c0, transmission p, |Omega|, N."""

    c0_target: float
    p: float
    omega_area: float = 1.0
    n_agents: int = 1

    def __post_init__(self):
        if self.c0_target <= 0.0:
            raise ValueError("c0_target must be > 0")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.omega_area <= 0.0:
            raise ValueError("omega_area must be > 0")
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")


def contact_radius(bridge: BridgeParams) -> float:
    """Unscaled radius R0 with pi R0^2 / |Omega| = c0."""
    return math.sqrt(bridge.c0_target * bridge.omega_area / math.pi)


def per_agent_radius(bridge: BridgeParams) -> float:
    """Interaction radius R = R0 / sqrt(N - 1) keeping ~c0 contacts per agent."""
    if bridge.n_agents < 2:
        raise ValueError("per-agent radius needs N >= 2")
    return contact_radius(bridge) / math.sqrt(bridge.n_agents - 1)


def gaussian_contact_sigma(bridge: BridgeParams) -> float:
    """Unscaled Gaussian width sigma0 with 2 pi sigma0^2 / |Omega| = c0."""
    return math.sqrt(bridge.c0_target * bridge.omega_area / (2.0 * math.pi))


def per_agent_gaussian_sigma(bridge: BridgeParams) -> float:
    """Gaussian kernel width for N agents: variance sigma0^2 / N."""
    return gaussian_contact_sigma(bridge) / math.sqrt(bridge.n_agents)


def beta_count(bridge: BridgeParams) -> float:
    """SIR beta in agent-count units: p * c0 / N, so beta*S*I matches the
    probability-space rate p * c0 * s * i."""
    return bridge.p * bridge.c0_target / bridge.n_agents


def recovery_slope(gamma: float, u_star: float) -> float:
    """Activity drift magnitude gamma * (1 - u_star) that traverses the
    infected side of J in the mean recovery time 1/gamma."""
    if gamma <= 0.0:
        raise ValueError("gamma must be > 0")
    return gamma * (1.0 - u_star)
