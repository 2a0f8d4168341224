"""Minimal scatter-plot SVG writer (points, boundary lines, titles)."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

LABEL_COLORS = {0: "#d62728", 1: "#1f77b4"}
PANEL_W, PANEL_H, PAD = 320, 300, 36


@dataclass
class Panel:
    title: str
    X: np.ndarray
    y: np.ndarray
    lines: list = field(default_factory=list)  # (weights, theta0, color)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _bounds(panels):
    pts = np.vstack([p.X for p in panels if len(p.X)]) if any(len(p.X) for p in panels) else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return lo - 0.05 * span, hi + 0.05 * span


def _line_segment(weights, theta0, lo, hi):
    """Clip ``w1 x + w2 y = theta0`` to the plotting box."""
    w1, w2 = float(weights[0]), float(weights[1])
    pts = []
    if w2 != 0:
        for x in (lo[0], hi[0]):
            y = (theta0 - w1 * x) / w2
            if lo[1] <= y <= hi[1]:
                pts.append((x, y))
    if w1 != 0:
        for y in (lo[1], hi[1]):
            x = (theta0 - w2 * y) / w1
            if lo[0] <= x <= hi[0]:
                pts.append((x, y))
    return pts[:2] if len(pts) >= 2 else None


def scatter_svg(panels: list[Panel]) -> str:
    """Side-by-side 2-D scatter panels sharing one coordinate box."""
    lo, hi = _bounds(panels)
    width = len(panels) * (PANEL_W + PAD) + PAD
    height = PANEL_H + 2 * PAD
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for k, p in enumerate(panels):
        ox = PAD + k * (PANEL_W + PAD)
        oy = PAD

        def tx(x):
            return ox + (x - lo[0]) / (hi[0] - lo[0]) * PANEL_W

        def ty(y):
            return oy + PANEL_H - (y - lo[1]) / (hi[1] - lo[1]) * PANEL_H

        out.append(f'<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>')
        out.append(f'<text x="{ox}" y="{oy - 8}" font-family="sans-serif" font-size="12">{escape(p.title)}</text>')
        for (x, y), lab in zip(p.X, p.y):
            color = LABEL_COLORS[int(lab)]
            out.append(f'<circle cx="{_fmt(tx(x))}" cy="{_fmt(ty(y))}" r="1.2" fill="{color}" fill-opacity="0.5"/>')
        for weights, theta0, color in p.lines:
            seg = _line_segment(weights, theta0, lo, hi)
            if seg is None:
                continue
            (x1, y1), (x2, y2) = seg
            out.append(
                f'<line x1="{_fmt(tx(x1))}" y1="{_fmt(ty(y1))}" x2="{_fmt(tx(x2))}" y2="{_fmt(ty(y2))}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
