"""Minimal deterministic SVG line charts."""

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#000000", "#9467bd", "#8c564b")
WIDTH, HEIGHT, MARGIN = 640, 400, 40


def _coord(v):
    return f"{v:.3f}"


def line_chart(x, series, width=WIDTH, height=HEIGHT, title=""):
    """Polyline chart of several series over a shared ``x``.

    Non-finite values break a polyline into segments.

    Parameters
    ----------
    x : ndarray
    series : dict of str to ndarray
        Insertion order fixes colours and legend order.
    """
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] + [np.zeros(0)])
    ylo, yhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xlo, xhi = xlo - 1.0, xhi + 1.0
    sx = (width - 2 * MARGIN) / (xhi - xlo)
    sy = (height - 2 * MARGIN) / (yhi - ylo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{width - 2 * MARGIN}" '
           f'height="{height - 2 * MARGIN}" fill="none" stroke="#888"/>']
    if title:
        out.append(f'<text x="{MARGIN}" y="{MARGIN - 10}" font-size="12">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN}" y="{height - 12}" font-size="10">x in [{xlo:g}, {xhi:g}], '
               f'y in [{ylo:.4g}, {yhi:.4g}]</text>')
    for idx, (name, y) in enumerate(ys.items()):
        color = COLORS[idx % len(COLORS)]
        px = MARGIN + (x - xlo) * sx
        py = height - MARGIN - (np.clip(y, ylo, yhi) - ylo) * sy
        ok = np.isfinite(y)
        start = None
        for i in range(len(x) + 1):
            if i < len(x) and ok[i]:
                start = i if start is None else start
                continue
            if start is not None and i - start > 1:
                pts = " ".join(f"{_coord(px[j])},{_coord(py[j])}" for j in range(start, i))
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                           f'points="{pts}"/>')
            start = None
        ly = MARGIN + 14 * (idx + 1)
        out.append(f'<line x1="{width - 150}" y1="{ly - 4}" x2="{width - 130}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - 125}" y="{ly}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
