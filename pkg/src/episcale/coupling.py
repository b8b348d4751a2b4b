"""Mean-field particle dynamics and the synchronous coupling experiment.

In the complete-mixture regime (Phi = 1) positions drop out of the activity
dynamics, so an N-agent system and N independent mean-field particles can be
driven by the same noise and initial draws.  The mean-field force comes from
the deterministic activity density computed by the finite-volume solver; the
mean squared activity gap between the coupled systems then isolates the
finite-N fluctuation, which shrinks like 1/N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from episcale import analysis, macro
from episcale.micro import check_step_stability
from episcale.model import ConstantOne, ModelSpec, sampling_intervals, J_MIN, J_MAX


@dataclass(frozen=True)
class ChaosParams:
    """Controls for the coupling-gap rate study."""

    dt: float = 1e-3
    t_end: float = 1.0
    n_realizations: int = 20
    seed: int = 7
    output_dt: float = 0.01
    frac_s: float = 0.8
    frac_i: float = 0.2
    macro_n_cells: int = 1600


@dataclass
class ChaosReport:
    n_values: np.ndarray
    gaps: np.ndarray  # sup over output times of the mean squared gap, averaged
    slope: float
    intercept: float
    residual: float


def meanfield_force(u, g: macro.GridDensity, kernel, rho_bar: float) -> np.ndarray:
    """rho_bar * psi(u) * integral(chi g), the infection pressure at activity u."""
    q = macro.chi_integral(g, kernel)
    return rho_bar * kernel.psi(np.asarray(u, dtype=float)) * q


def empirical_w1_to_macro(activities, g: macro.GridDensity) -> float:
    """W1 between the empirical activity measure of the agents and g."""
    return analysis.w1(
        analysis.Measure1D.from_samples(activities),
        analysis.Measure1D.from_grid(g.cell_avgs),
    )


def _sample_split(rng, n, frac_s, frac_i, s_win, i_win, r_point) -> np.ndarray:
    n_s = int(np.floor(frac_s * n))
    n_i = int(np.floor(frac_i * n))
    u = np.concatenate(
        [
            rng.uniform(s_win[0], s_win[1], size=n_s),
            rng.uniform(i_win[0], i_win[1], size=n_i),
            np.full(n - n_s - n_i, r_point),
        ]
    )
    return u[rng.permutation(n)]


def coupled_chaos_experiment(
    spec: ModelSpec,
    params: ChaosParams,
    n_list,
    t_end: float = None,
) -> ChaosReport:
    """Measure the coupling gap sup_t mean_i (U_i - Ubar_i)^2 against N.

    Requires the complete-mixture activation (positions then cancel exactly
    between the two systems, so only activities are simulated).  The
    mean-field reference force uses the precomputed finite-volume solution
    with matching initial density; its nonlocal integral is interpolated to
    the step times.  Realization (N index, j) uses an independent stream, and
    the log-log slope of gap against N is fitted by least squares.
    """
    if not isinstance(spec.kernel.phi, ConstantOne):
        raise ValueError("the coupling experiment requires the complete-mixture activation")
    if spec.coupling_scale != spec.rho_bar:
        raise ValueError(
            "the agent coupling and the mean-field density constant must agree "
            f"(coupling_scale={spec.coupling_scale}, rho_bar={spec.rho_bar})"
        )
    t_end = params.t_end if t_end is None else t_end
    check_step_stability(spec, params.dt)

    comp = spec.compartments
    s_win, i_win = sampling_intervals(spec.kernel, comp)
    r_point = 0.5 * (comp.u_bar + J_MAX)
    margin_s = s_win[0] - comp.s_interval[0]
    margin_i = i_win[0] - comp.i_interval[0]
    g0 = macro.split_density(
        comp, params.frac_s, params.frac_i, params.macro_n_cells, margin_s, margin_i
    )
    sol = macro.solve(g0, spec, t_end, output_stride=params.output_dt, keep_densities=False)

    n_steps = int(round(t_end / params.dt))
    step_times = params.dt * np.arange(n_steps)
    q_at_steps = np.interp(step_times, sol.times, sol.chi_integral)
    out_every = max(1, int(round(params.output_dt / params.dt)))

    root = np.random.SeedSequence(params.seed)
    per_n = root.spawn(len(n_list))
    gaps = np.empty(len(n_list))
    for k, n in enumerate(n_list):
        streams = per_n[k].spawn(params.n_realizations)
        sup_gaps = np.empty(params.n_realizations)
        for j in range(params.n_realizations):
            rng = np.random.Generator(np.random.Philox(streams[j]))
            u = _sample_split(rng, n, params.frac_s, params.frac_i, s_win, i_win, r_point)
            ubar = u.copy()
            sup_gap = 0.0
            for step in range(n_steps):
                chi_u = spec.kernel.chi(u)
                force_micro = spec.rho_bar * (np.sum(chi_u) - chi_u) / n * spec.kernel.psi(u)
                force_mf = spec.rho_bar * spec.kernel.psi(ubar) * q_at_steps[step]
                u = np.clip(u + params.dt * (-spec.potential.derivative(u) + force_micro), J_MIN, J_MAX)
                ubar = np.clip(
                    ubar + params.dt * (-spec.potential.derivative(ubar) + force_mf), J_MIN, J_MAX
                )
                if (step + 1) % out_every == 0 or step + 1 == n_steps:
                    sup_gap = max(sup_gap, float(np.mean((u - ubar) ** 2)))
            sup_gaps[j] = sup_gap
        gaps[k] = float(np.mean(sup_gaps))

    slope, intercept, residual = analysis.fit_loglog_slope(np.asarray(n_list, dtype=float), gaps)
    return ChaosReport(
        n_values=np.asarray(n_list),
        gaps=gaps,
        slope=slope,
        intercept=intercept,
        residual=residual,
    )
