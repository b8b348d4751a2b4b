"""Deterministic, self-contained SVG line plots.

No external assets, no timestamps: identical inputs produce byte-identical
output.  Compartment curves follow the blue/red/green S/I/R convention with
shaded one-standard-deviation bands and dashed reference curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

S_COLOR = "#1f4fd8"  # susceptible
I_COLOR = "#d82f2f"  # infectious
R_COLOR = "#1f8f3a"  # recovered

_WIDTH, _HEIGHT = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 58, 16, 30, 44


@dataclass(frozen=True)
class Line:
    xs: Sequence[float]
    ys: Sequence[float]
    color: str
    label: str = ""
    dashed: bool = False
    width: float = 1.6


@dataclass(frozen=True)
class Band:
    xs: Sequence[float]
    lo: Sequence[float]
    hi: Sequence[float]
    color: str
    opacity: float = 0.22


@dataclass(frozen=True)
class Scatter:
    xs: Sequence[float]
    ys: Sequence[float]
    color: str
    label: str = ""
    radius: float = 2.5


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = np.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def emit_svg_lineplot(
    series: Sequence[object],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    x_range: Optional[tuple] = None,
    y_range: Optional[tuple] = None,
) -> str:
    """Render Lines, Bands, and Scatters to a standalone SVG string."""
    if not series:
        raise ValueError("no series to plot")
    xs_all, ys_all = [], []
    for s in series:
        xs = np.asarray(s.xs, dtype=float)
        if xs.size == 0:
            raise ValueError("series with no points")
        xs_all.append(xs)
        if isinstance(s, Band):
            ys_all.extend([np.asarray(s.lo, float), np.asarray(s.hi, float)])
        else:
            ys_all.append(np.asarray(s.ys, float))
    x_lo, x_hi = (
        (min(a.min() for a in xs_all), max(a.max() for a in xs_all))
        if x_range is None
        else x_range
    )
    y_lo, y_hi = (
        (min(a.min() for a in ys_all), max(a.max() for a in ys_all))
        if y_range is None
        else y_range
    )
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    px_w = _WIDTH - _MARGIN_L - _MARGIN_R
    px_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def X(x):
        return _MARGIN_L + (np.asarray(x, float) - x_lo) / (x_hi - x_lo) * px_w

    def Y(y):
        return _MARGIN_T + (y_hi - np.asarray(y, float)) / (y_hi - y_lo) * px_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    # axes box
    out.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{px_w}" height="{px_h}" '
        'fill="none" stroke="#444444" stroke-width="1"/>'
    )
    for t in _nice_ticks(x_lo, x_hi):
        px = float(X(t))
        out.append(
            f'<line x1="{_fmt(px)}" y1="{_MARGIN_T + px_h}" x2="{_fmt(px)}" '
            f'y2="{_MARGIN_T + px_h + 5}" stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{_MARGIN_T + px_h + 18}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{t:g}</text>'
        )
    for t in _nice_ticks(y_lo, y_hi):
        py = float(Y(t))
        out.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(py)}" x2="{_MARGIN_L}" '
            f'y2="{_fmt(py)}" stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 8}" y="{_fmt(py + 3.5)}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{t:g}</text>'
        )
    if title:
        out.append(
            f'<text x="{_WIDTH // 2}" y="ys18" font-size="13" text-anchor="middle" '
            f'font-family="sans-serif">{title}</text>'.replace("ys18", "18")
        )
    if xlabel:
        out.append(
            f'<text x="{_MARGIN_L + px_w // 2}" y="{_HEIGHT - 10}" font-size="12" '
            f'text-anchor="middle" font-family="sans-serif">{xlabel}</text>'
        )
    if ylabel:
        yc = _MARGIN_T + px_h // 2
        out.append(
            f'<text x="16" y="{yc}" font-size="12" text-anchor="middle" '
            f'font-family="sans-serif" transform="rotate(-90 16 {yc})">{ylabel}</text>'
        )

    # bands behind lines
    for s in series:
        if not isinstance(s, Band):
            continue
        xs, lo, hi = (np.asarray(v, float) for v in (s.xs, s.lo, s.hi))
        fwd = [f"{_fmt(float(a))},{_fmt(float(b))}" for a, b in zip(X(xs), Y(hi))]
        back = [f"{_fmt(float(a))},{_fmt(float(b))}" for a, b in zip(X(xs[::-1]), Y(lo[::-1]))]
        out.append(
            f'<polygon points="{" ".join(fwd + back)}" fill="{s.color}" '
            f'fill-opacity="{s.opacity:g}" stroke="none"/>'
        )
    legend_items = []
    for s in series:
        if isinstance(s, Band):
            continue
        if isinstance(s, Scatter):
            xs, ys = np.asarray(s.xs, float), np.asarray(s.ys, float)
            circles = "".join(
                f'<circle cx="{_fmt(float(a))}" cy="{_fmt(float(b))}" r="{s.radius:g}" '
                f'fill="{s.color}"/>'
                for a, b in zip(X(xs), Y(ys))
            )
            out.append(circles)
            if s.label:
                legend_items.append((s.label, s.color, False))
            continue
        xs, ys = np.asarray(s.xs, float), np.asarray(s.ys, float)
        pts = " ".join(f"{_fmt(float(a))},{_fmt(float(b))}" for a, b in zip(X(xs), Y(ys)))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{s.color}" '
            f'stroke-width="{s.width:g}"{dash}/>'
        )
        if s.label:
            legend_items.append((s.label, s.color, s.dashed))
    for k, (label, color, dashed) in enumerate(legend_items):
        ly = _MARGIN_T + 14 + 16 * k
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        out.append(
            f'<line x1="{_MARGIN_L + px_w - 130}" y1="{ly - 4}" x2="{_MARGIN_L + px_w - 104}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>'
        )
        out.append(
            f'<text x="{_MARGIN_L + px_w - 98}" y="{ly}" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def compartment_plot(series, references=None, title="", n_scale: float = 1.0) -> str:
    """Standard S/I/R figure: mean curves, std bands, dashed references.

    ``references`` is an optional list of (label, times, S, I, R) tuples.
    """
    plots = []
    t = series.times
    for vals, std, color, label in (
        (series.s, series.s_std, S_COLOR, "S"),
        (series.i, series.i_std, I_COLOR, "I"),
        (series.r, series.r_std, R_COLOR, "R"),
    ):
        if std is not None:
            plots.append(Band(t, np.asarray(vals) - std, np.asarray(vals) + std, color))
    for vals, color, label in (
        (series.s, S_COLOR, "S"),
        (series.i, I_COLOR, "I"),
        (series.r, R_COLOR, "R"),
    ):
        plots.append(Line(t, vals, color, label=label))
    for label, rt, rs, ri, rr in references or []:
        for vals, color in ((rs, S_COLOR), (ri, I_COLOR), (rr, R_COLOR)):
            plots.append(Line(rt, np.asarray(vals) * n_scale, color, dashed=True, width=1.2))
    return emit_svg_lineplot(plots, title=title, xlabel="t", ylabel="count")
