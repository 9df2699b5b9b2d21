"""Minimal deterministic SVG output for curves and snapshot overlays."""

from __future__ import annotations

import numpy as np

VIEW = 640  # fixed viewport edge, px


def _path(points, scale, x0, y0, color, opacity):
    cmds = []
    for j, (x, y) in enumerate(points):
        px = (x - x0) * scale
        py = VIEW - (y - y0) * scale          # flip: SVG y grows downward
        cmds.append(f"{'M' if j == 0 else 'L'} {px:.3f} {py:.3f}")
    d = " ".join(cmds) + " Z"
    return (f'<path d="{d}" fill="none" stroke="{color}" '
            f'stroke-width="1.2" opacity="{opacity:.3f}"/>')


def render_svg(path, curve_list, color: str = "#1f4e79") -> None:
    """Write closed polylines into a fixed-viewport SVG.

    curve_list is a sequence of (n, 2) arrays; several curves are drawn
    with an opacity ramp from faint (first) to solid (last). Identical
    inputs produce identical bytes.
    """
    arrays = [np.asarray(c, dtype=float) for c in curve_list]
    allpts = np.vstack(arrays)
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    margin = 0.05 * span
    scale = VIEW / (span + 2.0 * margin)
    x0 = lo[0] - margin - 0.5 * (span - (hi[0] - lo[0]))
    y0 = lo[1] - margin - 0.5 * (span - (hi[1] - lo[1]))

    n = len(arrays)
    body = []
    for i, arr in enumerate(arrays):
        opacity = 1.0 if n == 1 else 0.25 + 0.75 * i / (n - 1)
        body.append(_path(arr, scale, x0, y0, color, opacity))
    content = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW}" height="{VIEW}" '
        f'viewBox="0 0 {VIEW} {VIEW}">\n'
        + "\n".join(body) + "\n</svg>\n")
    with open(path, "w", newline="") as f:
        f.write(content)
