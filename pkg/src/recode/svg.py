"""Minimal SVG plots: scatter, lines, bars, and a maze overlay."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 480, 360, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class _Canvas:
    def __init__(self, xlim, ylim, title="", xlabel="", ylabel=""):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.items = [
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
            'fill="none" stroke="#444"/>',
            f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        ]
        for v, anchor in ((self.x0, "start"), (self.x1, "end")):
            self.items.append(f'<text x="{self.px(v):.1f}" y="{H - PAD + 14}" font-size="10" '
                              f'text-anchor="{anchor}">{v:.4g}</text>')
        for v in (self.y0, self.y1):
            self.items.append(f'<text x="{PAD - 4}" y="{self.py(v):.1f}" font-size="10" '
                              f'text-anchor="end">{v:.4g}</text>')

    def px(self, x):
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def py(self, y):
        return H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)

    def legend(self, labels):
        for i, lab in enumerate(labels):
            y = PAD + 14 + 14 * i
            self.items.append(f'<rect x="{W - PAD - 110}" y="{y - 9}" width="10" height="10" '
                              f'fill="{PALETTE[i % len(PALETTE)]}"/>')
            self.items.append(f'<text x="{W - PAD - 96}" y="{y}" font-size="11">{escape(str(lab))}</text>')

    def write(self, path):
        body = "\n".join(self.items)
        Path(path).write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')


def scatter(path, x, y, sizes=None, title="", xlim=None, ylim=None, xlabel="x", ylabel="y"):
    """Points with area proportional to ``sizes`` (e.g. atom counts)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    xlim = xlim or (float(x.min(initial=0)), float(x.max(initial=1)))
    ylim = ylim or (float(y.min(initial=0)), float(y.max(initial=1)))
    cv = _Canvas(xlim, ylim, title, xlabel, ylabel)
    if sizes is None:
        r = np.full(len(x), 2.5)
    else:
        s = np.asarray(sizes, float)
        r = 1.5 + 8.0 * np.sqrt(s / s.max()) if len(s) and s.max() > 0 else np.full(len(x), 2.5)
    for xi, yi, ri in zip(x, y, r):
        cv.items.append(f'<circle cx="{cv.px(xi):.1f}" cy="{cv.py(yi):.1f}" r="{ri:.1f}" '
                        f'fill="{PALETTE[0]}" fill-opacity="0.6"/>')
    cv.write(path)


def lines(path, series: dict, title="", xlabel="", ylabel=""):
    """``series`` maps label -> (xs, ys)."""
    xs = [np.asarray(v[0], float) for v in series.values() if len(v[0])]
    ys = [np.asarray(v[1], float) for v in series.values() if len(v[1])]
    xlim = (min((a.min() for a in xs), default=0.0), max((a.max() for a in xs), default=1.0))
    ylim = (min(0.0, min((a.min() for a in ys), default=0.0)), max((a.max() for a in ys), default=1.0))
    cv = _Canvas(xlim, ylim, title, xlabel, ylabel)
    for i, (label, (sx, sy)) in enumerate(series.items()):
        if not len(sx):
            continue
        pts = " ".join(f"{cv.px(a):.1f},{cv.py(b):.1f}" for a, b in zip(sx, sy))
        cv.items.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" '
                        'stroke-width="1.5"/>')
    cv.legend(list(series))
    cv.write(path)


def bars(path, edges, heights, title="", xlabel="", ylabel="", marker=None):
    """Histogram from bin edges; ``marker`` draws a vertical reference line."""
    edges, heights = np.asarray(edges, float), np.asarray(heights, float)
    cv = _Canvas((edges[0], edges[-1]), (0.0, float(heights.max(initial=1))), title, xlabel, ylabel)
    for a, b, h in zip(edges[:-1], edges[1:], heights):
        cv.items.append(f'<rect x="{cv.px(a):.1f}" y="{cv.py(h):.1f}" width="{cv.px(b) - cv.px(a):.1f}" '
                        f'height="{cv.py(0) - cv.py(h):.1f}" fill="{PALETTE[0]}" stroke="white"/>')
    if marker is not None and edges[0] <= marker <= edges[-1]:
        cv.items.append(f'<line x1="{cv.px(marker):.1f}" y1="{PAD}" x2="{cv.px(marker):.1f}" '
                        f'y2="{H - PAD}" stroke="{PALETTE[1]}" stroke-dasharray="4 3"/>')
    cv.write(path)


def maze_overlay(path, layout, start, goal, weights=None, title=""):
    """Maze grid; open cells shaded by ``weights`` (cell-indexed, row-major)."""
    size = layout.shape[0]
    cell = min((W - 2 * PAD), (H - 2 * PAD)) / size
    items = [f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>']
    wmax = float(np.max(weights)) if weights is not None and np.max(weights) > 0 else 1.0
    for r in range(size):
        for c in range(size):
            x, y = PAD + c * cell, PAD + r * cell
            if layout[r, c]:
                fill, op = "#333", 1.0
            elif weights is not None:
                fill, op = PALETTE[0], 0.1 + 0.9 * float(weights[r * size + c]) / wmax
            else:
                fill, op = "#eee", 1.0
            items.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cell:.1f}" height="{cell:.1f}" '
                         f'fill="{fill}" fill-opacity="{op:.3f}"/>')
    for (r, c), lab in ((start, "S"), (goal, "G")):
        items.append(f'<text x="{PAD + (c + 0.5) * cell:.1f}" y="{PAD + (r + 0.7) * cell:.1f}" '
                     f'text-anchor="middle" font-size="{cell * 0.6:.1f}" fill="#d62728">{lab}</text>')
    Path(path).write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">\n'
        '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(items) + "\n</svg>\n")
