"""Minimal self-contained SVG line plots and heat maps."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#7f7f7f", "#000000"]


class _Axis:
    def __init__(self, lo, hi, log, pix_lo, pix_hi):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            hi = lo + 1.0
        self.lo, self.hi, self.log = lo, hi, log
        self.pix_lo, self.pix_hi = pix_lo, pix_hi

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.log:
            v = np.log10(v)
        return self.pix_lo + (v - self.lo) / (self.hi - self.lo) * (self.pix_hi - self.pix_lo)

    def ticks(self):
        if self.log:
            return [10.0**k for k in range(math.ceil(self.lo), math.floor(self.hi) + 1)]
        return list(np.linspace(self.lo, self.hi, 6))


def _fmt(v):
    return f"{v:.3g}"


def _frame(title, xlabel, ylabel, xa, ya):
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
        'fill="none" stroke="black"/>',
        f'<text x="{(left + right) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="18" y="{(top + bottom) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(top + bottom) / 2})">{escape(ylabel)}</text>',
    ]
    for t in xa.ticks():
        x = float(xa(t))
        parts.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{bottom + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in ya.ticks():
        y = float(ya(t))
        parts.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    return parts


def line_plot(series, title="", xlabel="", ylabel="", logx=False, logy=False):
    """Render ``[(label, x, y), ...]`` as an SVG document string."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    okx = xs > 0 if logx else np.isfinite(xs)
    oky = ys > 0 if logy else np.isfinite(ys)
    xa = _Axis(xs[okx].min(), xs[okx].max(), logx, MARGIN["left"], WIDTH - MARGIN["right"])
    ya = _Axis(ys[oky].min(), ys[oky].max(), logy, HEIGHT - MARGIN["bottom"], MARGIN["top"])
    parts = _frame(title, xlabel, ylabel, xa, ya)
    for i, (label, x, y) in enumerate(series):
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(xa(x[keep]), ya(y[keep])))
        color = COLORS[i % len(COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = MARGIN["top"] + 16 + 16 * i
        lx = WIDTH - MARGIN["right"] - 190
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 25}" y="{ly}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap(values, extent, title="", xlabel="", ylabel=""):
    """Grey-scale map of a square array indexed [row=y, col=x] over [-extent, extent]^2."""
    v = np.asarray(values, float)
    n = v.shape[0]
    xa = _Axis(-extent, extent, False, MARGIN["left"], WIDTH - MARGIN["right"])
    ya = _Axis(-extent, extent, False, HEIGHT - MARGIN["bottom"], MARGIN["top"])
    parts = _frame(title, xlabel, ylabel, xa, ya)
    lo, hi = v.min(), v.max()
    scale = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    edges = np.linspace(-extent, extent, n + 1)
    px, py = xa(edges), ya(edges)
    for r in range(n):
        for c in range(n):
            g = int(round(255 * (1 - scale[r, c])))
            parts.append(
                f'<rect x="{px[c]:.2f}" y="{py[r + 1]:.2f}" width="{px[c + 1] - px[c] + 0.3:.2f}" '
                f'height="{py[r] - py[r + 1] + 0.3:.2f}" fill="rgb({g},{g},{g})"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
