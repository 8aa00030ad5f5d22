"""Deterministic SVG emission for planar phase portraits.

A thin string builder (no plotting dependency): polylines for trajectories,
arrow glyphs for the direction field, translucent wedges for the cone field.
Fixed 800x800 canvas with a declared viewBox; all coordinates rendered with
two decimals so identical inputs give byte-identical documents.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput

CANVAS = 800.0
MARGIN = 40.0


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class PhaseCanvas:
    """Maps a planar state box onto the SVG canvas and collects elements."""

    def __init__(self, box):
        if len(box) != 2:
            raise InvalidInput("SVG rendering supports planar systems only")
        (self.x_lo, self.x_hi), (self.y_lo, self.y_hi) = [(float(a), float(b)) for a, b in box]
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise InvalidInput("degenerate plot box")
        self.elements = []

    def to_px(self, p):
        u = (p[0] - self.x_lo) / (self.x_hi - self.x_lo)
        v = (p[1] - self.y_lo) / (self.y_hi - self.y_lo)
        return (MARGIN + u * (CANVAS - 2 * MARGIN), CANVAS - MARGIN - v * (CANVAS - 2 * MARGIN))

    def polyline(self, points, stroke="#1f3b73", width=1.2, opacity=1.0):
        px = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (self.to_px(p) for p in points))
        self.elements.append(
            f'<polyline points="{px}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}" stroke-opacity="{_fmt(opacity)}"/>'
        )

    def polygon(self, points, fill="#9db8e8", opacity=0.35):
        px = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (self.to_px(p) for p in points))
        self.elements.append(f'<polygon points="{px}" fill="{fill}" fill-opacity="{_fmt(opacity)}"/>')

    def arrow(self, base, direction, length, stroke="#b33939"):
        d = np.asarray(direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            return
        d = d / n
        tip = np.asarray(base, dtype=float) + length * d
        left = tip - 0.25 * length * d + 0.12 * length * np.array([-d[1], d[0]])
        right = tip - 0.25 * length * d - 0.12 * length * np.array([-d[1], d[0]])
        b, t = self.to_px(base), self.to_px(tip)
        l, r = self.to_px(left), self.to_px(right)
        self.elements.append(
            f'<line x1="{_fmt(b[0])}" y1="{_fmt(b[1])}" x2="{_fmt(t[0])}" y2="{_fmt(t[1])}" '
            f'stroke="{stroke}" stroke-width="1.40"/>'
        )
        self.elements.append(
            f'<polygon points="{_fmt(t[0])},{_fmt(t[1])} {_fmt(l[0])},{_fmt(l[1])} {_fmt(r[0])},{_fmt(r[1])}" '
            f'fill="{stroke}"/>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(CANVAS)}" height="{int(CANVAS)}" '
            f'viewBox="0 0 {int(CANVAS)} {int(CANVAS)}">\n'
            f'<rect x="0" y="0" width="{int(CANVAS)}" height="{int(CANVAS)}" fill="#ffffff"/>\n'
        )
        return head + "\n".join(self.elements) + "\n</svg>\n"


def render_pf_field(sys, fld, box, trajectories=(), cone_stride=2):
    """Phase-portrait SVG: trajectories, cone wedges, and field arrows."""
    canvas = PhaseCanvas(box)
    cell = min((box[0][1] - box[0][0]) / max(1, fld.shape[0]), (box[1][1] - box[1][0]) / max(1, fld.shape[1]))
    for traj in trajectories:
        pts = traj.states[:: max(1, len(traj.states) // 400)]
        canvas.polyline(pts, stroke="#1f3b73", width=1.0, opacity=0.8)
    wedge = 0.9 * cell
    for i in range(0, len(fld.points), max(1, cone_stride)):
        p = fld.points[i]
        try:
            cone = sys.cone_field.cone_at(p)
        except Exception:
            continue
        g = cone.generators
        canvas.polygon([p, p + wedge * g[0], p + wedge * g[1]])
    arrow_len = 0.8 * cell
    for i in range(len(fld.points)):
        if not fld.ok_mask[i]:
            continue
        canvas.arrow(fld.points[i], fld.vectors[i], arrow_len)
    return canvas.render()
