"""Minimal dependency-free SVG line plots for experiment outputs."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, log):
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]
    step = (hi - lo) / 4 if hi > lo else 1.0
    return [lo + i * step for i in range(5)]


def svg_line_plot(series, log_x=False, log_y=False, title="", xlabel="", ylabel="", width=480, height=320):
    """Render ``{label: (xs, ys)}`` as an SVG string.

    Non-positive values are skipped on log axes.
    """
    tx = (lambda v: math.log10(v)) if log_x else float
    ty = (lambda v: math.log10(v)) if log_y else float
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [
            (tx(x), ty(y))
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y) and (not log_x or x > 0) and (not log_y or y > 0)
        ]
        if pts:
            clean[label] = pts
    if not clean:
        return None
    allx = [x for pts in clean.values() for x, _ in pts]
    ally = [y for pts in clean.values() for _, y in pts]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(x0, x1, log_x):
        pos = math.log10(v) if log_x else v
        if x0 - 1e-9 <= pos <= x1 + 1e-9:
            out.append(f'<text x="{px(pos):.1f}" y="{top + ph + 15}" text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(y0, y1, log_y):
        pos = math.log10(v) if log_y else v
        if y0 - 1e-9 <= pos <= y1 + 1e-9:
            out.append(f'<text x="{left - 5}" y="{py(pos) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for i, (label, pts) in enumerate(clean.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 14 * i
        out.append(f'<line x1="{left + pw - 110}" y1="{ly - 4}" x2="{left + pw - 92}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 88}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
