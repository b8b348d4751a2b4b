"""Scenario runners: build the model for each study, run it, write artifacts.

Every scenario is deterministic given (config, seed): RNG streams are spawned
per realization index, reductions are index-ordered, and all output goes
through the byte-stable CSV/SVG writers.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from episcale import analysis, coupling, io, lagrange, macro, sir, svgplot
from episcale.config import ExperimentConfig
from episcale.micro import (
    AgentState,
    ClusteredInfection,
    GridUniformSplit,
    SimParams,
    initial_conditions,
    run_ensemble,
    run_realization,
)
from episcale.model import (
    Compartments,
    ConstantOne,
    GaussianActivation,
    IndicatorBall,
    InteractionKernel,
    ModelSpec,
    PiecewiseLinear,
    SimplifiedLandscape,
    check_feasibility,
    sampling_intervals,
)


@dataclass
class ScenarioResult:
    files: list
    notes: dict


def _outpath(out_dir: str, name: str) -> str:
    return os.path.join(out_dir, name)


def _tag(x: float) -> str:
    return f"{x:g}".replace("-", "m")


# ---------------------------------------------------------------------------
# Spec assembly
# ---------------------------------------------------------------------------

def _build_kernel(cfg: ExperimentConfig, comp: Compartments, phi) -> InteractionKernel:
    if cfg.mollifier_eps > 0.0:
        return InteractionKernel.build(comp, phi, cfg.c_chi, eps=cfg.mollifier_eps)
    return InteractionKernel.build(comp, phi, cfg.c_chi, sharp=True)


def _bridged_potential(
    cfg: ExperimentConfig, comp: Compartments, infectious_scope: bool
) -> PiecewiseLinear:
    """Linear recovery landscape.

    With infectious_scope the slope is gamma*(u_bar - u_star), so crossing
    the infectious band takes the SIR recovery time 1/gamma (the overlay
    compares infectious prevalence); otherwise the slope is
    gamma*(1 - u_star), traversing the whole infected side in 1/gamma.
    """
    if infectious_scope:
        slope = cfg.gamma * (comp.u_bar - comp.u_star)
    else:
        slope = sir.recovery_slope(cfg.gamma, comp.u_star)
    eps = cfg.mollifier_eps if cfg.mollifier_eps > 0.0 else None
    return PiecewiseLinear(lam=cfg.lam, recovery_slope=slope, compartments=comp, eps=eps)


def micro_spec(
    cfg: ExperimentConfig,
    n_agents: int,
    phi_kind: str,
    sigma: float = None,
    infectious_scope: bool = True,
) -> ModelSpec:
    """Assemble and validate the agent-model spec for one scenario run.

    Contact-scaled activations (indicator, Gaussian) shrink with N and set
    coupling_scale = N so the per-contact push stays O(1).  The complete
    mixture uses coupling_scale = rho_bar, making the agent force
    (rho_bar/N) * sum psi*chi mirror the rho_bar * M[g] term of the
    macroscopic equation; with rho_bar = c0 it is the well-mixed limit of
    the contact-scaled runs.
    """
    comp = Compartments(cfg.u_star, cfg.u_bar)
    bridge = sir.BridgeParams(cfg.c0, cfg.c_chi, 1.0, n_agents)
    if phi_kind == "indicator":
        phi = IndicatorBall(sir.per_agent_radius(bridge))
        scale = float(n_agents)
    elif phi_kind == "gaussian":
        phi = GaussianActivation(sir.per_agent_gaussian_sigma(bridge))
        scale = float(n_agents)
    elif phi_kind == "constant":
        phi = ConstantOne()
        scale = float(cfg.rho_bar)
    else:
        raise ValueError(f"unknown activation kind {phi_kind!r}")
    kernel = _build_kernel(cfg, comp, phi)
    pot = _bridged_potential(cfg, comp, infectious_scope)
    return check_feasibility(
        pot,
        kernel,
        comp,
        sigma=cfg.sigma if sigma is None else sigma,
        rho_bar=cfg.rho_bar,
        coupling_scale=scale,
        require_lipschitz=cfg.mollifier_eps > 0.0,
    )


def threshold_spec(cfg: ExperimentConfig, gamma: float) -> ModelSpec:
    """Threshold-study spec: equal resistance and recovery rates, recovered
    band collapsed to the endpoint."""
    comp = Compartments(cfg.u_star, cfg.u_bar)
    kernel = _build_kernel(cfg, comp, ConstantOne())
    eps = cfg.mollifier_eps if cfg.mollifier_eps > 0.0 else None
    pot = SimplifiedLandscape(lam=gamma, gamma_rec=gamma, compartments=comp, eps=eps)
    return check_feasibility(
        pot, kernel, comp, rho_bar=cfg.rho_bar, require_lipschitz=eps is not None
    )


def xval_spec(cfg: ExperimentConfig) -> ModelSpec:
    comp = Compartments(cfg.u_star, cfg.u_bar)
    kernel = _build_kernel(cfg, comp, ConstantOne())
    eps = cfg.mollifier_eps if cfg.mollifier_eps > 0.0 else None
    pot = SimplifiedLandscape(lam=cfg.lam, gamma_rec=cfg.gamma, compartments=comp, eps=eps)
    return check_feasibility(
        pot, kernel, comp, rho_bar=cfg.rho_bar, require_lipschitz=eps is not None
    )


def _stable_dt(cfg: ExperimentConfig, spec: ModelSpec) -> float:
    """Shrink the configured dt when the landscape ramps demand it."""
    lip = spec.potential.lipschitz_derivative
    bound = 0.1 / (lip + spec.kernel.psi_sup * spec.kernel.chi_sup)
    if cfg.dt <= bound:
        return cfg.dt
    # halve until stable, keeping output_dt an integer multiple
    dt = cfg.dt
    while dt > bound:
        dt *= 0.5
    return dt


def _split_sampler(cfg: ExperimentConfig, spec: ModelSpec, n_agents: int):
    kind = GridUniformSplit(cfg.frac_s, cfg.frac_i)

    def sampler(rng):
        return initial_conditions(kind, n_agents, spec.compartments, spec, rng)

    return sampler


def _macro_g0(cfg: ExperimentConfig, spec: ModelSpec, n_cells: int) -> macro.GridDensity:
    comp = spec.compartments
    (s_lo, s_hi), (i_lo, i_hi) = sampling_intervals(spec.kernel, comp)
    return macro.split_density(
        comp,
        cfg.frac_s,
        cfg.frac_i,
        n_cells,
        margin_s=s_lo - comp.s_interval[0],
        margin_i=i_lo - comp.i_interval[0],
    )


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def run_sir_comparison(cfg: ExperimentConfig, out_dir: str, gaussian: bool = False) -> ScenarioResult:
    n = cfg.n_agents
    spec = micro_spec(cfg, n, "gaussian" if gaussian else "indicator", infectious_scope=True)
    dt = _stable_dt(cfg, spec)
    params = SimParams(
        n_agents=n, sigma=cfg.sigma, dt=dt, t_end=cfg.t_end, seed=cfg.seed,
        n_realizations=cfg.n_realizations, output_dt=cfg.output_dt,
    )
    ens = run_ensemble(_split_sampler(cfg, spec, n), spec, params, threads=cfg.threads)

    bridge = sir.BridgeParams(cfg.c0, cfg.c_chi, 1.0, n)
    s0 = float(math.floor(cfg.frac_s * n))
    i0 = float(math.floor(cfg.frac_i * n))
    sp = sir.SirParams(beta=sir.beta_count(bridge), gamma=cfg.gamma, s0=s0, i0=i0, r0=n - s0 - i0)
    st, ss, si, sr = sir.sir_solve(sp, dt, cfg.t_end)
    stride = max(1, int(round(cfg.output_dt / dt)))
    keep = np.arange(st.size) % stride == 0

    files = [
        io.write_ensemble_series(_outpath(out_dir, "micro_ensemble.csv"), ens.series),
        io.write_sir_series(_outpath(out_dir, "sir_reference.csv"), st[keep], ss[keep], si[keep], sr[keep]),
    ]
    svg = svgplot.compartment_plot(
        ens.series, references=[("SIR", st[keep], ss[keep], si[keep], sr[keep])],
        title=f"agent ensemble vs SIR ({cfg.variant})",
    )
    path = _outpath(out_dir, "overlay.svg")
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    files.append(path)
    return ScenarioResult(files=files, notes={"dt": dt, "beta": sp.beta, "gamma": sp.gamma})


def run_direct_link(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    files, notes = [], {}
    comp = Compartments(cfg.u_star, cfg.u_bar)
    macro_spec = micro_spec(cfg, max(cfg.n_list), "constant")
    g0 = _macro_g0(cfg, macro_spec, cfg.n_cells)
    sol = macro.solve(g0, macro_spec, cfg.t_end, output_stride=cfg.output_dt)
    files.append(io.write_macro_diagnostics(_outpath(out_dir, "macro_diagnostics.csv"), sol))
    for t_snap in cfg.snapshot_times:
        k = int(np.argmin(np.abs(sol.times - t_snap)))
        files.append(
            io.write_density(_outpath(out_dir, f"macro_density_t{_tag(t_snap)}.csv"), sol.densities[k])
        )

    ensembles = {}
    for n in cfg.n_list:
        spec = micro_spec(cfg, n, "constant")
        dt = _stable_dt(cfg, spec)
        params = SimParams(
            n_agents=n, sigma=0.0, dt=dt, t_end=cfg.t_end, seed=cfg.seed,
            n_realizations=cfg.n_realizations, output_dt=cfg.output_dt,
        )
        snaps = cfg.snapshot_times if n == max(cfg.n_list) else ()
        ens = run_ensemble(_split_sampler(cfg, spec, n), spec, params,
                           snapshot_times=snaps, threads=cfg.threads)
        ensembles[n] = ens
        files.append(io.write_ensemble_series(_outpath(out_dir, f"micro_ensemble_n{n}.csv"), ens.series))
        svg = svgplot.compartment_plot(
            ens.series,
            references=[("macro", sol.times, sol.s_mass, sol.i_mass, sol.r_mass)],
            title=f"complete mixture, N={n} vs macroscopic", n_scale=float(n),
        )
        p = _outpath(out_dir, f"overlay_n{n}.svg")
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
        files.append(p)
        for t_snap, state in ens.snapshots:
            hist, edges = np.histogram(state.activities, bins=40, range=(-1.0, 1.0))
            dens = hist / (state.n_agents * np.diff(edges))
            files.append(
                io.write_csv(
                    _outpath(out_dir, f"micro_activity_hist_n{n}_t{_tag(t_snap)}.csv"),
                    ["u_center", "density"],
                    [0.5 * (edges[:-1] + edges[1:]), dens],
                )
            )
    notes["sup_gap"] = {
        n: float(
            np.max(
                np.abs(
                    np.stack([e.series.s, e.series.i, e.series.r], axis=1) / n
                    - np.stack(
                        [
                            np.interp(e.series.times, sol.times, sol.s_mass),
                            np.interp(e.series.times, sol.times, sol.i_mass),
                            np.interp(e.series.times, sol.times, sol.r_mass),
                        ],
                        axis=1,
                    )
                )
            )
        )
        for n, e in ensembles.items()
    }
    return ScenarioResult(files=files, notes=notes)


def run_mobility_link(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    files = []
    n = cfg.n_agents
    mix_spec = micro_spec(cfg, n, "constant")
    dt = _stable_dt(cfg, mix_spec)

    def ensemble_for(spec, sigma):
        params = SimParams(
            n_agents=n, sigma=sigma, dt=dt, t_end=cfg.t_end, seed=cfg.seed,
            n_realizations=cfg.n_realizations, output_dt=cfg.output_dt,
        )
        return run_ensemble(_split_sampler(cfg, spec, n), spec, params, threads=cfg.threads)

    mix = ensemble_for(mix_spec, 0.0)
    files.append(io.write_ensemble_series(_outpath(out_dir, "reference_mix.csv"), mix.series))

    gaps, stds, curves = [], [], []
    for sigma in cfg.sigma_list:
        spec = micro_spec(cfg, n, "indicator", sigma=sigma)
        ens = ensemble_for(spec, sigma)
        files.append(
            io.write_ensemble_series(
                _outpath(out_dir, f"micro_ensemble_sigma{_tag(sigma)}.csv"), ens.series
            )
        )
        gap_t = np.abs(ens.series.i - mix.series.i)
        gaps.append(float(np.max(gap_t)))
        stds.append(float(np.max(ens.series.i_std)))
        curves.append((sigma, ens.series))
    files.append(
        io.write_csv(
            _outpath(out_dir, "mobility_gap.csv"),
            ["sigma", "sup_gap_i", "max_i_std"],
            [np.asarray(cfg.sigma_list), np.asarray(gaps), np.asarray(stds)],
        )
    )
    shades = ["#d82f2f", "#c45a1d", "#9a7900", "#5a8f1d"]
    plots = [
        svgplot.Line(mix.series.times, mix.series.i, "#333333", label="mix", dashed=True)
    ]
    for (sigma, series), color in zip(curves, shades):
        plots.append(svgplot.Line(series.times, series.i, color, label=f"sigma={sigma:g}"))
    p = _outpath(out_dir, "overlay.svg")
    os.makedirs(out_dir, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svgplot.emit_svg_lineplot(plots, title="infectious count vs mobility",
                                           xlabel="t", ylabel="I"))
    files.append(p)
    return ScenarioResult(files=files, notes={"gaps": dict(zip(cfg.sigma_list, gaps))})


def run_inhomogeneous(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    files = []
    n = cfg.n_agents
    spec = micro_spec(cfg, n, "indicator")
    dt = _stable_dt(cfg, spec)
    init = initial_conditions(
        ClusteredInfection(tuple(cfg.cluster_center), cfg.cluster_radius),
        n, spec.compartments, spec,
    )
    params = SimParams(
        n_agents=n, sigma=cfg.sigma, dt=dt, t_end=cfg.t_end, seed=cfg.seed,
        n_realizations=1, output_dt=cfg.output_dt,
    )
    res = run_realization(init, spec, params, snapshot_times=cfg.snapshot_times)
    files.append(io.write_count_series(_outpath(out_dir, "compartments.csv"), res.series))
    comp = spec.compartments
    for t_snap, state in res.snapshots:
        files.append(io.write_agent_dump(_outpath(out_dir, f"agents_t{_tag(t_snap)}.csv"), t_snap, state))
        u = state.activities
        sel_s = u < comp.u_star
        sel_i = (u >= comp.u_star) & (u < comp.u_bar)
        sel_r = u >= comp.u_bar
        plots = []
        for sel, color, label in (
            (sel_s, svgplot.S_COLOR, "S"),
            (sel_i, svgplot.I_COLOR, "I"),
            (sel_r, svgplot.R_COLOR, "R"),
        ):
            if np.any(sel):
                plots.append(
                    svgplot.Scatter(state.positions[sel, 0], state.positions[sel, 1],
                                    color, label=label, radius=4.0)
                )
        p = _outpath(out_dir, f"cloud_t{_tag(t_snap)}.svg")
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(
                svgplot.emit_svg_lineplot(
                    plots, title=f"agents at t={t_snap:g}", xlabel="x", ylabel="y",
                    x_range=(0.0, 1.0), y_range=(0.0, 1.0),
                )
            )
        files.append(p)
    series_svg = svgplot.compartment_plot(res.series, title="clustered outbreak")
    p = _outpath(out_dir, "compartments.svg")
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(series_svg)
    files.append(p)
    return ScenarioResult(files=files, notes={})


THRESHOLD_CASES = (("epidemic", 0.08), ("non_epidemic", 0.1))


def run_epidemic_threshold(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    files, notes = [], {}
    rows = []
    eff_curves = []
    for label, gamma in THRESHOLD_CASES:
        spec = threshold_spec(cfg, gamma)
        g0 = _macro_g0(cfg, spec, cfg.n_cells)
        sol = macro.solve(g0, spec, cfg.t_end, output_stride=cfg.output_dt, keep_densities=False)
        files.append(
            io.write_macro_diagnostics(_outpath(out_dir, f"macro_diagnostics_{label}.csv"), sol)
        )
        nominal = macro.r0(cfg.rho_bar, cfg.c_chi, gamma, gamma, cfg.frac_s, cfg.frac_i)
        rows.append((label, gamma, nominal, sol.r0))
        eff_curves.append((label, sol.times, sol.effective_transition))
        notes[label] = {"r0_nominal": nominal, "r0_measured": sol.r0}
    files.append(
        io.write_csv(
            _outpath(out_dir, "r0_report.csv"),
            ["case", "gamma", "r0", "r0_from_initial_density"],
            [
                [r[0] for r in rows],
                np.asarray([r[1] for r in rows]),
                np.asarray([r[2] for r in rows]),
                np.asarray([r[3] for r in rows]),
            ],
        )
    )
    plots = [
        svgplot.Line(t, e, "#d82f2f" if label == "epidemic" else "#1f4fd8",
                     label=label, dashed=label != "epidemic")
        for label, t, e in eff_curves
    ]
    p = _outpath(out_dir, "effective_transition.svg")
    os.makedirs(out_dir, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svgplot.emit_svg_lineplot(plots, title="effective transition",
                                           xlabel="t", ylabel="E"))
    files.append(p)
    return ScenarioResult(files=files, notes=notes)


def run_chaos_rate(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    spec = micro_spec(cfg, max(cfg.n_list), "constant")
    params = coupling.ChaosParams(
        dt=_stable_dt(cfg, spec), t_end=cfg.t_end, n_realizations=cfg.n_realizations,
        seed=cfg.seed, output_dt=cfg.output_dt, frac_s=cfg.frac_s, frac_i=cfg.frac_i,
        macro_n_cells=cfg.n_cells,
    )
    report = coupling.coupled_chaos_experiment(spec, params, list(cfg.n_list))
    files = [io.write_chaos_report(_outpath(out_dir, "chaos_rate.csv"), report)]
    plots = [
        svgplot.Scatter(np.log10(report.n_values), np.log10(report.gaps), "#1f4fd8",
                        label="measured"),
        svgplot.Line(
            np.log10(report.n_values),
            report.slope * np.log10(report.n_values) + report.intercept / np.log(10.0),
            "#d82f2f", label=f"slope {report.slope:.2f}", dashed=True,
        ),
    ]
    p = _outpath(out_dir, "chaos_rate.svg")
    os.makedirs(out_dir, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svgplot.emit_svg_lineplot(plots, title="coupling gap vs N",
                                           xlabel="log10 N", ylabel="log10 gap"))
    files.append(p)
    return ScenarioResult(files=files, notes={"slope": report.slope, "gaps": report.gaps.tolist()})


def run_solver_xval(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    spec = xval_spec(cfg)
    dxs, errs = [], []
    lip = spec.drift_lipschitz_bound()
    dt_particles = min(0.05 / lip if math.isfinite(lip) and lip > 0 else 5e-3, 5e-3)
    for n_cells in cfg.n_cells_list:
        g0 = _macro_g0(cfg, spec, n_cells)
        sol = macro.solve(g0, spec, cfg.t_end, output_stride=cfg.t_end, keep_densities=True)
        particles = lagrange.particles_from_grid(g0)
        traj = lagrange.advance(particles, spec, dt_particles, cfg.t_end)
        err = analysis.w1(
            analysis.Measure1D.from_grid(sol.densities[-1].cell_avgs),
            traj.final.measure(),
        )
        dxs.append(sol.densities[-1].dx)
        errs.append(err)
    slope, _, _ = analysis.fit_loglog_slope(dxs, errs)
    files = [
        io.write_csv(
            _outpath(out_dir, "xval.csv"),
            ["n_cells", "dx", "w1", "order"],
            [
                np.asarray(cfg.n_cells_list),
                np.asarray(dxs),
                np.asarray(errs),
                np.full(len(dxs), slope),
            ],
        )
    ]
    plots = [
        svgplot.Scatter(np.log10(dxs), np.log10(errs), "#1f4fd8", label="W1 error"),
    ]
    p = _outpath(out_dir, "xval.svg")
    os.makedirs(out_dir, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svgplot.emit_svg_lineplot(plots, title="cross-solver refinement",
                                           xlabel="log10 dx", ylabel="log10 W1"))
    files.append(p)
    return ScenarioResult(files=files, notes={"order": slope, "w1": errs})


_RUNNERS = {
    "sir_comparison": lambda cfg, out: run_sir_comparison(cfg, out, gaussian=False),
    "sir_comparison_gaussian": lambda cfg, out: run_sir_comparison(cfg, out, gaussian=True),
    "direct_link": run_direct_link,
    "mobility_link": run_mobility_link,
    "inhomogeneous": run_inhomogeneous,
    "epidemic_threshold": run_epidemic_threshold,
    "chaos_rate": run_chaos_rate,
    "solver_xval": run_solver_xval,
}


def run_scenario(cfg: ExperimentConfig, out_dir: str = None) -> ScenarioResult:
    """Dispatch a validated config to its runner; returns the written files."""
    out = out_dir or cfg.out_dir or os.path.join("episcale_out", cfg.scenario)
    os.makedirs(out, exist_ok=True)
    return _RUNNERS[cfg.scenario](cfg, out)
