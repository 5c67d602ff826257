"""Minimal SVG line charts (no external assets)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart"]

PALETTE = ("#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(x):
    return f"{x:.2f}"


def line_chart(x, series, title="", xlabel="", ylabel="", width=640, height=320):
    """SVG document with one polyline per entry of ``series`` (a name -> y mapping)."""
    x = np.asarray(x, dtype=float)
    ml, mr, mt, mb = 60, 120, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    x0, x1 = float(x[0]), float(x[-1])

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (hi - v) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
           f'<text x="{ml}" y="{mt - 10}" font-size="13" font-family="sans-serif">{escape(title)}</text>',
           f'<text x="{ml + pw / 2}" y="{height - 8}" font-size="11" text-anchor="middle" '
           f'font-family="sans-serif">{escape(xlabel)}</text>',
           f'<text x="14" y="{mt + ph / 2}" font-size="11" text-anchor="middle" font-family="sans-serif" '
           f'transform="rotate(-90 14 {mt + ph / 2})">{escape(ylabel)}</text>']
    for v in (lo, 0.5 * (lo + hi), hi):
        out.append(f'<text x="{ml - 4}" y="{_fmt(py(v) + 4)}" font-size="10" text-anchor="end" '
                   f'font-family="sans-serif">{v:.4g}</text>')
    for v in (x0, 0.5 * (x0 + x1), x1):
        out.append(f'<text x="{_fmt(px(v))}" y="{mt + ph + 14}" font-size="10" text-anchor="middle" '
                   f'font-family="sans-serif">{v:.4g}</text>')
    for i, (name, y) in enumerate(zip(series, ys)):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = mt + 14 * (i + 1)
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}" font-size="11" font-family="sans-serif">'
                   f'{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
