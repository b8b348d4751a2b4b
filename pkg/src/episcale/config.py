"""Declarative experiment configs: flat ``key = value`` text with # comments.

Each scenario ships the parameter set of the study it reproduces as its
defaults, so an empty config containing only ``scenario = ...`` runs the
canonical experiment.  Validation reports every error at once, with line
numbers for parse errors and field paths for semantic ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional

SCENARIOS = (
    "sir_comparison",
    "sir_comparison_gaussian",
    "direct_link",
    "mobility_link",
    "inhomogeneous",
    "epidemic_threshold",
    "chaos_rate",
    "solver_xval",
)


class ConfigError(ValueError):
    """Validation failure carrying the full list of error messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, defaulted parameter set for one scenario run."""

    scenario: str
    seed: int = 2024
    out_dir: Optional[str] = None
    variant: str = "epidemic"  # sir_comparison*: epidemic | non_epidemic

    # agent system
    n_agents: int = 100
    n_realizations: int = 100
    sigma: float = 0.0
    dt: float = 1e-3
    t_end: float = 3.0
    output_dt: float = 0.01

    # model
    c0: float = 8.0
    c_chi: float = 0.5
    u_star: float = 0.0
    u_bar: float = 0.3
    gamma: float = 1.5
    lam: float = 0.0
    rho_bar: float = 1.0
    mollifier_eps: float = 0.0  # 0 selects sharp indicator profiles

    # macro solver
    n_cells: int = 400

    # scenario-specific lists
    n_list: tuple = (100, 400, 1600)
    sigma_list: tuple = (0.0, 0.01, 0.05, 1.0)
    n_cells_list: tuple = (100, 200, 400)
    snapshot_times: tuple = ()
    frac_s: float = 0.9
    frac_i: float = 0.1
    cluster_center: tuple = (0.25, 0.25)
    cluster_radius: float = 0.25
    threads: int = 1


_BASE = ExperimentConfig(scenario="sir_comparison")

_SCENARIO_DEFAULTS = {
    "sir_comparison": dict(
        n_agents=100, n_realizations=100, sigma=0.0, c0=8.0, c_chi=0.5,
        u_star=0.0, u_bar=0.3, gamma=1.5, frac_s=0.9, frac_i=0.1, t_end=3.0,
    ),
    "sir_comparison_gaussian": dict(
        n_agents=225, n_realizations=100, sigma=0.0, c0=8.0, c_chi=0.5,
        u_star=0.0, u_bar=0.3, gamma=1.5, frac_s=0.9, frac_i=0.1, t_end=3.0,
    ),
    "direct_link": dict(
        n_list=(100, 400, 1600), n_realizations=20, c_chi=0.5, u_star=0.0,
        u_bar=0.3, gamma=1.5, frac_s=0.8, frac_i=0.2, t_end=3.0, n_cells=400,
        snapshot_times=(0.0, 0.6, 0.75, 1.125), rho_bar=8.0,
    ),
    "mobility_link": dict(
        n_agents=225, n_realizations=50, sigma_list=(0.0, 0.01, 0.05, 1.0),
        c0=8.0, c_chi=0.5, u_star=0.0, u_bar=0.3, gamma=1.5, frac_s=0.8,
        frac_i=0.2, t_end=3.0, rho_bar=8.0,
    ),
    "inhomogeneous": dict(
        n_agents=100, n_realizations=1, sigma=0.0, c0=8.0, c_chi=0.5,
        u_star=0.0, u_bar=0.3, gamma=1.5, t_end=3.0,
        snapshot_times=(0.0, 0.5, 1.0, 3.0),
    ),
    "epidemic_threshold": dict(
        c_chi=0.3, u_star=0.0, u_bar=1.0, rho_bar=2.0, mollifier_eps=0.01,
        n_cells=400, t_end=40.0, frac_s=0.8, frac_i=0.2, output_dt=0.1,
    ),
    "chaos_rate": dict(
        n_list=(50, 100, 200, 400, 800), n_realizations=20, c_chi=0.5,
        u_star=0.0, u_bar=0.3, gamma=1.5, frac_s=0.8, frac_i=0.2, t_end=1.0,
        mollifier_eps=0.05, n_cells=1600, rho_bar=1.0,
    ),
    "solver_xval": dict(
        c_chi=0.1, u_star=0.0, u_bar=1.0, gamma=0.1, lam=0.1, rho_bar=2.0,
        mollifier_eps=0.08, n_cells_list=(100, 200, 400), t_end=1.0,
        frac_s=0.8, frac_i=0.2,
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_TUPLE_FIELDS = {"n_list", "sigma_list", "n_cells_list", "snapshot_times", "cluster_center"}
_INT_FIELDS = {"seed", "n_agents", "n_realizations", "n_cells", "threads"}
_STR_FIELDS = {"scenario", "out_dir", "variant"}
_INT_TUPLES = {"n_list", "n_cells_list"}


def _parse_value(key: str, text: str):
    if key in _STR_FIELDS:
        return text
    if key in _TUPLE_FIELDS:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        caster = int if key in _INT_TUPLES else float
        return tuple(caster(p) for p in parts)
    if key in _INT_FIELDS:
        return int(text)
    return float(text)


def parse_config(text: str) -> tuple:
    """Parse key = value lines; returns (dict, parse-error list)."""
    values, errors = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in _FIELD_TYPES:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, val)
        except ValueError:
            errors.append(f"line {lineno}: cannot parse value for {key!r}: {val!r}")
    return values, errors


def _semantic_errors(cfg: ExperimentConfig) -> list:
    errs = []
    if cfg.n_agents < 1:
        errs.append("n_agents: must be >= 1")
    if cfg.n_realizations < 1:
        errs.append("n_realizations: must be >= 1")
    if cfg.sigma < 0:
        errs.append("sigma: must be >= 0")
    if cfg.dt <= 0:
        errs.append("dt: must be > 0")
    if cfg.t_end <= 0:
        errs.append("t_end: must be > 0")
    if cfg.output_dt < cfg.dt:
        errs.append("output_dt: must be >= dt")
    if not 0 < cfg.c_chi <= 1:
        errs.append("c_chi: must lie in (0, 1]")
    if cfg.c0 <= 0:
        errs.append("c0: must be > 0")
    if not -1 < cfg.u_star < cfg.u_bar <= 1:
        errs.append("u_star/u_bar: need -1 < u_star < u_bar <= 1")
    if cfg.gamma <= 0:
        errs.append("gamma: must be > 0")
    if cfg.lam < 0:
        errs.append("lam: must be >= 0")
    if cfg.rho_bar <= 0:
        errs.append("rho_bar: must be > 0")
    if cfg.mollifier_eps < 0:
        errs.append("mollifier_eps: must be >= 0")
    if cfg.n_cells < 8:
        errs.append("n_cells: must be >= 8")
    if cfg.variant not in ("epidemic", "non_epidemic"):
        errs.append("variant: must be 'epidemic' or 'non_epidemic'")
    if cfg.threads < 1:
        errs.append("threads: must be >= 1")
    if cfg.mollifier_eps > 0:
        half_s = 0.5 * (cfg.u_star + 1.0)
        half_i = 0.5 * (cfg.u_bar - cfg.u_star)
        if cfg.mollifier_eps >= min(half_s, half_i):
            errs.append("mollifier_eps: ramps would overlap inside a band")
    if not 0 <= cfg.frac_s <= 1 or not 0 <= cfg.frac_i <= 1 or cfg.frac_s + cfg.frac_i > 1:
        errs.append("frac_s/frac_i: must be in [0,1] with sum <= 1")
    for name in ("n_list", "n_cells_list"):
        if any(v < 8 for v in getattr(cfg, name)) and cfg.scenario in (
            "chaos_rate", "direct_link", "solver_xval"
        ):
            errs.append(f"{name}: entries must be >= 8")
    return errs


def validate_config(text: str) -> ExperimentConfig:
    """Parse, apply scenario defaults, and validate; raises ConfigError with
    the complete error list on any failure."""
    values, errors = parse_config(text)
    scenario = values.get("scenario")
    if scenario is None:
        errors.append("scenario: missing (choose one of: " + ", ".join(SCENARIOS) + ")")
    elif scenario not in SCENARIOS:
        errors.append(
            f"scenario: unknown scenario {scenario!r} (choose one of: " + ", ".join(SCENARIOS) + ")"
        )
    if errors:
        raise ConfigError(errors)

    cfg = replace(_BASE, scenario=scenario, **_SCENARIO_DEFAULTS[scenario])
    overrides = {k: v for k, v in values.items() if k != "scenario"}
    try:
        cfg = replace(cfg, **overrides)
    except TypeError as exc:  # pragma: no cover - guarded by key check
        raise ConfigError([str(exc)])

    if cfg.scenario in ("sir_comparison", "sir_comparison_gaussian") and "gamma" not in overrides:
        if cfg.variant == "non_epidemic":
            cfg = replace(cfg, gamma=4.5)

    sem = _semantic_errors(cfg)
    if sem:
        raise ConfigError(sem)
    return cfg


def scenario_defaults(scenario: str) -> ExperimentConfig:
    return validate_config(f"scenario = {scenario}")
