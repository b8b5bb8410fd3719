"""Self-contained SVG output: cell heatmaps and log-log convergence plots."""

from __future__ import annotations

import math
from typing import IO, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .mesh import Mesh

_PALETTE = np.array(
    [
        [59, 76, 192],
        [124, 159, 249],
        [192, 212, 245],
        [242, 203, 183],
        [238, 132, 104],
        [180, 4, 38],
    ],
    dtype=float,
)


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0) * (len(_PALETTE) - 1)
    i = min(int(t), len(_PALETTE) - 2)
    c = _PALETTE[i] + (t - i) * (_PALETTE[i + 1] - _PALETTE[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def write_heatmap(mesh: Mesh, values, sink: IO[str], size: int = 480, title: str = "") -> None:
    """Fill each triangle with a colour scaled between min and max of ``values``."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    xy = mesh.vertices
    xmin, ymin = xy.min(axis=0)
    extent = float(max(np.ptp(xy[:, 0]), np.ptp(xy[:, 1]), 1e-300))
    pad = 20
    scale = (size - 2 * pad) / extent

    def pt(p):
        return f"{pad + (p[0] - xmin) * scale:.3f},{size - pad - (p[1] - ymin) * scale:.3f}"

    sink.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 30}" '
        f'viewBox="0 0 {size} {size + 30}">\n'
    )
    if title:
        sink.write(f'<title>{escape(title)}</title>\n')
    for t, tri in enumerate(mesh.triangles):
        pts = " ".join(pt(xy[v]) for v in tri)
        color = _color((values[t] - lo) / span)
        sink.write(f'<polygon points="{pts}" fill="{color}" stroke="{color}" stroke-width="0.3"/>\n')
    sink.write(
        f'<text x="{pad}" y="{size + 18}" font-family="sans-serif" font-size="12">'
        f"min {lo:.4g}  max {hi:.4g}</text>\n</svg>\n"
    )


def write_loglog(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    sink: IO[str],
    width: int = 560,
    height: int = 420,
    title: str = "",
) -> None:
    """Log-log error curves; every segment is annotated with its slope.

    Args:
        series: label -> (h values, error values). Non-positive or non-finite
            points are skipped.
    """
    clean = {}
    for label, (h, e) in series.items():
        pts = [(x, y) for x, y in zip(h, e) if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
        if pts:
            clean[label] = pts
    all_pts = [p for pts in clean.values() for p in pts] or [(1.0, 1.0)]
    lx = [math.log10(p[0]) for p in all_pts]
    ly = [math.log10(p[1]) for p in all_pts]
    x0, x1 = min(lx) - 0.1, max(lx) + 0.1
    y0, y1 = min(ly) - 0.2, max(ly) + 0.2
    left, right, top, bottom = 70, 20, 30, 50

    def px(x):
        return left + (math.log10(x) - x0) / (x1 - x0) * (width - left - right)

    def py(y):
        return height - bottom - (math.log10(y) - y0) / (y1 - y0) * (height - top - bottom)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{width - left - right}" '
        f'height="{height - top - bottom}" fill="none" stroke="#444"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="{top - 10}" font-size="13">{escape(title)}</text>')
    for k in range(math.ceil(x0), math.floor(x1) + 1):
        out.append(f'<text x="{px(10.0**k):.1f}" y="{height - bottom + 16}" text-anchor="middle">1e{k}</text>')
    for k in range(math.ceil(y0), math.floor(y1) + 1):
        out.append(f'<text x="{left - 6}" y="{py(10.0**k) + 4:.1f}" text-anchor="end">1e{k}</text>')
    out.append(f'<text x="{(width + left) / 2}" y="{height - 12}" text-anchor="middle">h</text>')

    for i, (label, pts) in enumerate(clean.items()):
        color = colors[i % len(colors)]
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        for (xa, ya), (xb, yb) in zip(pts, pts[1:]):
            slope = math.log(ya / yb) / math.log(xa / xb)
            mx = (px(xa) + px(xb)) / 2
            my = (py(ya) + py(yb)) / 2 - 6
            out.append(
                f'<text class="slope" x="{mx:.1f}" y="{my:.1f}" fill="{color}" '
                f'text-anchor="middle">{slope:.2f}</text>'
            )
        out.append(
            f'<text x="{width - right - 6}" y="{top + 16 + 14 * i}" fill="{color}" '
            f'text-anchor="end">{escape(label)}</text>'
        )
    out.append("</svg>")
    sink.write("\n".join(out) + "\n")
