"""CSV writers with a fixed byte-stable format.

Floats are written with repr (shortest round trip), newline is always \n,
encoding UTF-8.  Identical data produces identical bytes.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str, header: Sequence[str], columns: Sequence) -> str:
    """Write columns (equal-length sequences) under a header row."""
    cols = [np.asarray(c) for c in columns]
    n = cols[0].shape[0]
    if any(c.shape[0] != n for c in cols):
        raise ValueError("column lengths differ")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in range(n):
            fh.write(",".join(_cell(c[row]) for c in cols) + "\n")
    return path


def write_ensemble_series(path: str, series) -> str:
    return write_csv(
        path,
        ["t", "s_mean", "s_std", "i_mean", "i_std", "r_mean", "r_std"],
        [series.times, series.s, series.s_std, series.i, series.i_std, series.r, series.r_std],
    )


def write_count_series(path: str, series) -> str:
    return write_csv(path, ["t", "s", "i", "r"], [series.times, series.s, series.i, series.r])


def write_sir_series(path: str, times, s, i, r) -> str:
    return write_csv(path, ["t", "S", "I", "R"], [times, s, i, r])


def write_agent_dump(path: str, t: float, state) -> str:
    n = state.n_agents
    return write_csv(
        path,
        ["t", "agent_id", "x", "y", "u"],
        [
            np.full(n, t),
            np.arange(n),
            state.positions[:, 0],
            state.positions[:, 1],
            state.activities,
        ],
    )


def write_density(path: str, g) -> str:
    return write_csv(path, ["u_center", "g"], [g.centers(), g.cell_avgs])


def write_macro_diagnostics(path: str, sol) -> str:
    return write_csv(
        path,
        ["t", "s_mass", "i_mass", "r_mass", "effective_transition", "entropy"],
        [sol.times, sol.s_mass, sol.i_mass, sol.r_mass, sol.effective_transition, sol.entropy],
    )


def write_particles(path: str, t: float, particles) -> str:
    n = particles.n_particles
    return write_csv(
        path,
        ["t", "location", "weight"],
        [np.full(n, t), particles.locations, particles.weights],
    )


def write_chaos_report(path: str, report) -> str:
    n = report.n_values.size
    return write_csv(
        path,
        ["N", "gap", "slope"],
        [report.n_values, report.gaps, np.full(n, report.slope)],
    )
