"""SVG drawings of network states.

Edges are lines whose stroke width grows affinely with ``X`` from ``w_min``
(at ``X = 0``) to ``w_max`` (at the largest ``X``) and whose colour follows a
sequential colormap; cells are discs coloured by auxin.  The drawing puts
``x`` on the vertical axis (downwards) and ``y`` on the horizontal axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RenderOptions", "render_svg"]


@dataclass
class RenderOptions:
    width: float = 480.0
    margin: float = 20.0
    w_min: float = 0.5
    w_max: float = 8.0
    omit_zero: bool = False
    edge_cmap: str = "viridis"
    vertex_cmap: str = "Oranges"
    vertex_radius: float = 4.0
    title: str | None = None


def _colors(values, vmax, cmap_name):
    from matplotlib import colormaps
    from matplotlib.colors import to_hex

    cmap = colormaps[cmap_name]
    frac = np.zeros_like(values) if vmax <= 0 else np.clip(values / vmax, 0, 1)
    return [to_hex(cmap(float(f))) for f in frac]


def render_svg(g, st, opts: RenderOptions | None = None) -> str:
    """Return an SVG document for graph ``g`` in state ``st`` (fields ``a``, ``X``)."""
    opts = opts or RenderOptions()
    pos = g.positions
    xmin, xmax, ymin, ymax = g.bbox()
    span_y = max(ymax - ymin, 1e-12)
    span_x = max(xmax - xmin, 1e-12)
    inner = opts.width - 2 * opts.margin
    s = inner / max(span_x, span_y)
    W = span_y * s + 2 * opts.margin
    H = span_x * s + 2 * opts.margin
    sx = opts.margin + (pos[:, 1] - ymin) * s
    sy = opts.margin + (pos[:, 0] - xmin) * s

    X = np.asarray(st.X, float)
    a = np.asarray(st.a, float)
    xm = float(X.max()) if X.size else 0.0
    widths = np.full(X.shape, opts.w_min) if xm <= 0 else opts.w_min + (opts.w_max - opts.w_min) * X / xm
    ecol = _colors(X, xm, opts.edge_cmap)
    vcol = _colors(a - a.min() if a.size else a, float(np.ptp(a)) if a.size else 0.0, opts.vertex_cmap)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.1f}" height="{H:.1f}" '
        f'viewBox="0 0 {W:.1f} {H:.1f}">',
        f'<rect width="{W:.1f}" height="{H:.1f}" fill="white"/>',
    ]
    if opts.title:
        out.append(f'<title>{opts.title}</title>')
    out.append('<g id="cells">')
    for k in range(g.n_vertices):
        out.append(
            f'<circle cx="{sx[k]:.2f}" cy="{sy[k]:.2f}" r="{opts.vertex_radius:.2f}" '
            f'fill="{vcol[k]}" data-a="{a[k]:.6g}"/>'
        )
    out.append("</g>")
    out.append('<g id="edges" stroke-linecap="round">')
    # thin edges first so veins end up on top
    for e in np.argsort(X, kind="stable"):
        if opts.omit_zero and X[e] <= 0:
            continue
        i, j = g.edges[e]
        out.append(
            f'<line x1="{sx[i]:.2f}" y1="{sy[i]:.2f}" x2="{sx[j]:.2f}" y2="{sy[j]:.2f}" '
            f'stroke="{ecol[e]}" stroke-width="{widths[e]:.3f}" data-X="{X[e]:.6g}"/>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
