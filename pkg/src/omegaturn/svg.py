"""Minimal SVG 1.1 writers (no timestamps, fixed number formatting)."""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2")


def _f(x) -> str:
    return f"{float(x):.2f}"


def _doc(width, height, body, meta=""):
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n')
    if meta:
        head += f"<metadata>{meta}</metadata>\n"
    return head + '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"


class _Frame:
    """Maps data coordinates to an SVG box with equal or free aspect."""

    def __init__(self, xlim, ylim, size=(480, 480), pad=40, equal=True):
        (x0, x1), (y0, y1) = xlim, ylim
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        w, h = size
        sx = (w - 2 * pad) / (x1 - x0)
        sy = (h - 2 * pad) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy, self.pad, self.h = x0, y0, sx, sy, pad, h

    def __call__(self, x, y):
        return self.pad + (np.asarray(x) - self.x0) * self.sx, self.h - self.pad - (np.asarray(y) - self.y0) * self.sy


def _polyline(xs, ys, color, width=1.0, opacity=1.0):
    pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(xs, ys))
    return (f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}"/>')


def overhead(bodies, pegs=None, peg_radius=0.0, title="", meta="", size=480) -> str:
    """Time-lapse of body centerlines; ``bodies`` is a list of ``(K, 2)`` arrays."""
    allpts = np.vstack(bodies)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    margin = 0.05 * max(hi - lo) + 1e-9
    frame = _Frame((lo[0] - margin, hi[0] + margin), (lo[1] - margin, hi[1] + margin), (size, size))
    body = []
    if pegs is not None and len(pegs):
        near = pegs[np.all((pegs >= lo - margin) & (pegs <= hi + margin), axis=1)]
        for px, py in near:
            cx, cy = frame(px, py)
            body.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(peg_radius * frame.sx)}" fill="#888"/>')
    n = len(bodies)
    for k, pts in enumerate(bodies):
        xs, ys = frame(pts[:, 0], pts[:, 1])
        body.append(_polyline(xs, ys, PALETTE[0], 2.0, 0.15 + 0.85 * k / max(n - 1, 1)))
    if title:
        body.append(f'<text x="10" y="20" font-family="sans-serif" font-size="14">{title}</text>')
    return _doc(size, size, body, meta)


def line_plot(series: dict, xlabel="", ylabel="", title="", meta="", size=(520, 360)) -> str:
    """``series`` maps a label to ``(x, y)`` arrays."""
    xs = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ys = np.concatenate([np.asarray(v[1], float) for v in series.values()])
    ok = np.isfinite(ys)
    ylo, yhi = (float(ys[ok].min()), float(ys[ok].max())) if ok.any() else (0.0, 1.0)
    frame = _Frame((float(xs.min()), float(xs.max())), (min(ylo, 0.0), yhi), size, 50, equal=False)
    body = []
    ax0, ay0 = frame(xs.min(), min(ylo, 0.0))
    ax1, _ = frame(xs.max(), 0.0)
    _, ay1 = frame(xs.min(), yhi)
    body.append(_polyline([ax0, ax1], [ay0, ay0], "black"))
    body.append(_polyline([ax0, ax0], [ay0, ay1], "black"))
    for k, (label, (x, y)) in enumerate(series.items()):
        x, y = np.asarray(x, float), np.asarray(y, float)
        m = np.isfinite(y)
        px, py = frame(x[m], y[m])
        color = PALETTE[k % len(PALETTE)]
        body.append(_polyline(px, py, color, 2.0))
        for a, b in zip(px, py):
            body.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="3" fill="{color}"/>')
        body.append(f'<text x="{size[0] - 150}" y="{20 + 16 * k}" font-family="sans-serif" font-size="12" '
                    f'fill="{color}">{label}</text>')
    for x in np.unique(xs):
        px, _ = frame(x, 0.0)
        body.append(f'<text x="{_f(px)}" y="{_f(ay0 + 16)}" font-family="sans-serif" font-size="10" '
                    f'text-anchor="middle">{x:g}</text>')
    body.append(f'<text x="{_f(ax0 - 4)}" y="{_f(ay1)}" font-family="sans-serif" font-size="10" '
                f'text-anchor="end">{yhi:.3g}</text>')
    body.append(f'<text x="{size[0] / 2}" y="{size[1] - 8}" font-family="sans-serif" font-size="12" '
                f'text-anchor="middle">{xlabel}</text>')
    body.append(f'<text x="12" y="{size[1] / 2}" font-family="sans-serif" font-size="12" '
                f'transform="rotate(-90 12 {size[1] / 2})" text-anchor="middle">{ylabel}</text>')
    if title:
        body.append(f'<text x="10" y="18" font-family="sans-serif" font-size="14">{title}</text>')
    return _doc(size[0], size[1], body, meta)


def heatmap(values, xlim, ylim, title="", meta="", size=(480, 480), loops=()) -> str:
    """Diverging heat map of ``values[ix, iy]``; NaN cells are left grey."""
    v = np.asarray(values, float)
    peak = np.nanmax(np.abs(v)) if np.isfinite(v).any() else 1.0
    peak = peak or 1.0
    frame = _Frame(xlim, ylim, size, 40, equal=False)
    nx, ny = v.shape
    dx = (xlim[1] - xlim[0]) / nx
    dy = (ylim[1] - ylim[0]) / ny
    body = []
    for i in range(nx):
        for j in range(ny):
            x, y = frame(xlim[0] + i * dx, ylim[0] + (j + 1) * dy)
            val = v[i, j]
            if not np.isfinite(val):
                color = "#bbbbbb"
            else:
                s = float(np.clip(val / peak, -1, 1))
                c = int(round(255 * (1 - abs(s))))
                color = f"#ff{c:02x}{c:02x}" if s > 0 else f"#{c:02x}{c:02x}ff"
            body.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(dx * frame.sx + 0.5)}" '
                        f'height="{_f(dy * frame.sy + 0.5)}" fill="{color}"/>')
    for loop in loops:
        loop = np.asarray(loop, float)
        xs, ys = frame(loop[:, 0], loop[:, 1])
        body.append(_polyline(xs, ys, "black", 1.5))
    if title:
        body.append(f'<text x="10" y="20" font-family="sans-serif" font-size="14">{title}</text>')
    return _doc(size[0], size[1], body, meta)
