"""Deterministic SVG plots for reports.

Line plots for ranged reports (median line with an optional min-max
envelope), bar charts otherwise.  Identical inputs produce byte-identical
SVG text: no timestamps, no randomized ids, fixed float formatting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ReportError
from .report import MachineSpec, Report, series

WIDTH, HEIGHT = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 50

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)

METRIC_LABELS = {
    "cycles": "cycles",
    "time": "time [s]",
    "gflops": "Gflops/s",
    "flops-per-cycle": "flops/cycle",
    "efficiency": "efficiency",
}


@dataclass
class PlotSpec:
    metric: str
    stats: tuple[str, ...] = ("median",)
    discard_first: bool = True
    style: str = "auto"  # auto | line | bar
    breakdown: bool = False
    labels: tuple[str, ...] = ()


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for step in (mag, 2 * mag, 5 * mag, 10 * mag):
        if span / step <= n + 1:
            break
    first = step * (int(lo / step) if lo >= 0 else int(lo / step) - 1)
    ticks = []
    t = first
    while t <= hi + step / 2:
        if t >= lo - step / 2:
            ticks.append(t)
        t += step
    return ticks


def _collect_series(
    reports: Sequence[Report],
    spec: PlotSpec,
    machine: MachineSpec | None,
) -> list[tuple[str, dict[str, list[tuple]]]]:
    """[(label, {stat: [(x, y), ...]})], one entry per drawn curve."""
    labels = list(spec.labels) or [f"report{i}" for i in range(len(reports))]
    out = []
    for label, rep in zip(labels, reports):
        named = {}
        for stat in spec.stats:
            named[stat] = series(
                rep, spec.metric, stat, spec.discard_first, machine,
                breakdown=spec.breakdown,
            )
        keys = list(next(iter(named.values())).keys())
        for key in keys:
            name = label if key == "total" else f"{label}/{key}"
            out.append((name, {stat: named[stat][key] for stat in spec.stats}))
    return out


def emit_plot(
    reports: Sequence[Report],
    spec: PlotSpec,
    machine: MachineSpec | None = None,
) -> tuple[str, str]:
    """Render the plot; returns (svg text, sidecar series text)."""
    if not reports:
        raise ReportError("no reports to plot")
    ranged = all(r.experiment.range is not None for r in reports)
    style = spec.style
    if style == "auto":
        style = "line" if ranged else "bar"
    if style == "line" and not ranged:
        raise ReportError("line style requires ranged reports")

    curves = _collect_series(reports, spec, machine)

    sidecar_rows = ["series,statistic,range-value,value"]
    for name, stats in curves:
        for stat, pts in stats.items():
            for x, y in pts:
                xs = "" if x is None else str(x)
                ys = "" if y is None else repr(y)
                sidecar_rows.append(f"{name},{stat},{xs},{ys}")
    sidecar = "\n".join(sidecar_rows) + "\n"

    if style == "line":
        svg = _render_line(curves, spec, reports[0])
    else:
        svg = _render_bar(curves, spec)
    return svg, sidecar


def _plot_area():
    x0, y0 = MARGIN_L, MARGIN_T
    x1, y1 = WIDTH - MARGIN_R, HEIGHT - MARGIN_B
    return x0, y0, x1, y1


def _svg_head(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-size="16">{title}</text>',
    ]


def _legend(lines: list[str], names: list[str]) -> None:
    x = WIDTH - MARGIN_R + 10
    for i, name in enumerate(names):
        color = PALETTE[i % len(PALETTE)]
        y = MARGIN_T + 16 * i
        lines.append(
            f'<rect x="{x}" y="{y}" width="10" height="10" fill="{color}"/>'
        )
        lines.append(f'<text x="{x + 14}" y="{y + 9}">{name}</text>')


def _render_line(curves, spec: PlotSpec, first_report: Report) -> str:
    x0, y0, x1, y1 = _plot_area()
    xs_all, ys_all = [], []
    for _name, stats in curves:
        for pts in stats.values():
            for x, y in pts:
                if x is not None:
                    xs_all.append(float(x))
                if y is not None:
                    ys_all.append(float(y))
    if not xs_all or not ys_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    xlo, xhi = min(xs_all), max(xs_all)
    ylo, yhi = min(ys_all), max(ys_all)
    ylo = min(ylo, 0.0)
    if xhi == xlo:
        xhi = xlo + 1
    if yhi == ylo:
        yhi = ylo + 1

    def sx(v):
        return x0 + (float(v) - xlo) / (xhi - xlo) * (x1 - x0)

    def sy(v):
        return y1 - (float(v) - ylo) / (yhi - ylo) * (y1 - y0)

    metric_label = METRIC_LABELS.get(spec.metric, spec.metric)
    lines = _svg_head(metric_label)
    # axes
    lines.append(
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>'
    )
    lines.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>'
    )
    for t in _nice_ticks(xlo, xhi):
        px = sx(t)
        lines.append(
            f'<line x1="{_fmt(px)}" y1="{y1}" x2="{_fmt(px)}" y2="{y1 + 5}" stroke="black"/>'
        )
        lines.append(
            f'<text x="{_fmt(px)}" y="{y1 + 18}" text-anchor="middle">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(ylo, yhi):
        py = sy(t)
        lines.append(
            f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>'
        )
        lines.append(
            f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" text-anchor="end">{_fmt(t)}</text>'
        )
    rng = first_report.experiment.range
    xlabel = rng.var if rng else ""
    lines.append(
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>'
    )
    lines.append(
        f'<text x="18" y="{(y0 + y1) // 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) // 2})">{metric_label}</text>'
    )

    names = []
    for i, (name, stats) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        names.append(name)
        # min-max envelope when both are requested
        if "min" in stats and "max" in stats:
            lo_pts = [(x, y) for x, y in stats["min"] if y is not None]
            hi_pts = [(x, y) for x, y in stats["max"] if y is not None]
            if lo_pts and hi_pts:
                path = (
                    [f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in lo_pts]
                    + [f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in reversed(hi_pts)]
                )
                lines.append(
                    f'<polygon points="{" ".join(path)}" fill="{color}" '
                    'fill-opacity="0.2" stroke="none"/>'
                )
        for stat in spec.stats:
            if stat in ("min", "max") and "min" in stats and "max" in stats:
                continue  # drawn as the envelope
            pts = [(x, y) for x, y in stats[stat] if y is not None]
            if not pts:
                continue
            path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
            lines.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" '
                'stroke-width="1.5"/>'
            )
    _legend(lines, names)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _render_bar(curves, spec: PlotSpec) -> str:
    x0, y0, x1, y1 = _plot_area()
    # one group per curve, one bar per statistic, at the single range point
    values = []
    for name, stats in curves:
        for stat in spec.stats:
            pts = stats[stat]
            val = pts[0][1] if pts else None
            values.append((name, stat, val))
    finite = [v for _n, _s, v in values if v is not None]
    yhi = max(finite) if finite else 1.0
    ylo = min(0.0, min(finite) if finite else 0.0)
    if yhi == ylo:
        yhi = ylo + 1

    def sy(v):
        return y1 - (float(v) - ylo) / (yhi - ylo) * (y1 - y0)

    metric_label = METRIC_LABELS.get(spec.metric, spec.metric)
    lines = _svg_head(metric_label)
    lines.append(f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>')
    lines.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for t in _nice_ticks(ylo, yhi):
        py = sy(t)
        lines.append(
            f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>'
        )
        lines.append(
            f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" text-anchor="end">{_fmt(t)}</text>'
        )
    n = len(values)
    slot = (x1 - x0) / max(n, 1)
    bar_w = slot * 0.7
    names = []
    for i, (name, stat, val) in enumerate(values):
        color = PALETTE[i % len(PALETTE)]
        names.append(f"{name} {stat}")
        if val is None:
            continue
        bx = x0 + slot * i + (slot - bar_w) / 2
        top = sy(max(val, 0.0))
        bottom = sy(min(val, 0.0))
        lines.append(
            f'<rect x="{_fmt(bx)}" y="{_fmt(top)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(max(bottom - top, 0.0))}" fill="{color}"/>'
        )
        lines.append(
            f'<text x="{_fmt(bx + bar_w / 2)}" y="{y1 + 18}" '
            f'text-anchor="middle">{stat}</text>'
        )
    lines.append(
        f'<text x="18" y="{(y0 + y1) // 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) // 2})">{metric_label}</text>'
    )
    _legend(lines, names)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
