"""Minimal deterministic SVG line plots (no plotting library needed)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass(frozen=True)
class Axes:
    xlabel: str
    ylabel: str
    title: str = ""
    xlog: bool = False
    ylog: bool = True


@dataclass(frozen=True)
class Series:
    label: str
    xs: tuple
    ys: tuple
    dashed: bool = False


def _usable(series: Series, axes: Axes):
    pts = []
    for x, y in zip(series.xs, series.ys):
        if x is None or y is None or not (math.isfinite(x) and math.isfinite(y)):
            continue
        if (axes.xlog and x <= 0) or (axes.ylog and y <= 0):
            continue
        pts.append((math.log10(x) if axes.xlog else x, math.log10(y) if axes.ylog else y))
    return pts


def _ticks(lo, hi, log):
    if log:
        return [float(e) for e in range(math.floor(lo), math.ceil(hi) + 1)]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span)) if span > 0 else 1.0
    if span / step < 3:
        step /= 2
    start = math.floor(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _label(t, log):
    if log:
        return f"1e{int(t)}"
    return f"{t:g}"


def render_svg(series: list[Series], axes: Axes) -> str:
    """Render polylines with axes, decade or linear ticks and a legend."""
    if not series:
        raise ValueError("nothing to plot")
    data = [(s, _usable(s, axes)) for s in series]
    allpts = [p for _, pts in data for p in pts]
    if not allpts:
        raise ValueError("no plottable points")
    xlo = min(p[0] for p in allpts)
    xhi = max(p[0] for p in allpts)
    ylo = min(p[1] for p in allpts)
    yhi = max(p[1] for p in allpts)
    if axes.xlog:
        xlo, xhi = math.floor(xlo), max(math.ceil(xhi), math.floor(xlo) + 1)
    if axes.ylog:
        ylo, yhi = math.floor(ylo), max(math.ceil(yhi), math.floor(ylo) + 1)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return TOP + ph - (y - ylo) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if axes.title:
        out.append(f'<text x="{LEFT + pw / 2:.1f}" y="18" text-anchor="middle">{escape(axes.title)}</text>')
    for t in _ticks(xlo, xhi, axes.xlog):
        if xlo - 1e-9 <= t <= xhi + 1e-9:
            x = sx(t)
            out.append(f'<line x1="{x:.1f}" y1="{TOP + ph}" x2="{x:.1f}" y2="{TOP + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{x:.1f}" y="{TOP + ph + 16}" text-anchor="middle">{_label(t, axes.xlog)}</text>')
    for t in _ticks(ylo, yhi, axes.ylog):
        if ylo - 1e-9 <= t <= yhi + 1e-9:
            y = sy(t)
            out.append(f'<line x1="{LEFT - 4}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="black"/>')
            out.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">{_label(t, axes.ylog)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(axes.xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(axes.ylabel)}</text>')
    for n, (s, pts) in enumerate(data):
        color = COLORS[n % len(COLORS)]
        dash = ' stroke-dasharray="6 3"' if s.dashed else ""
        if pts:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{coords}"/>')
        ly = TOP + 14 + 16 * n
        lx = LEFT + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 25}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(path, series: list[Series], axes: Axes) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(series, axes))
