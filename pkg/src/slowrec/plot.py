"""Deterministic log-log SVG plots of survival and TV curves."""

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import SchemaError
from .io import atomic_write, read_table

WIDTH, HEIGHT = 640, 420
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def survival_svg(series, bracket=None, title=""):
    """SVG text for ``series = [(name, n_values, y_values), ...]`` on log-log axes.

    Non-positive points are skipped. ``bracket = (lo, hi)`` adds two guide
    lines of slope ``-lo`` and ``-hi`` through the first point of the first
    series.

    Raises
    ------
    SchemaError
        If no series has a positive point.
    """
    pts = []
    for name, n, y in series:
        p = [(math.log10(a), math.log10(b)) for a, b in zip(n, y) if a > 0 and b > 0]
        pts.append((name, p))
    allp = [q for _, p in pts for q in p]
    if not allp:
        raise SchemaError("nothing to plot: no positive data points")
    xlo, xhi = min(q[0] for q in allp), max(q[0] for q in allp)
    ylo, yhi = min(q[1] for q in allp), max(q[1] for q in allp)
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    sx = _scale(xlo, xhi, MARGIN, WIDTH - MARGIN)
    sy = _scale(ylo, yhi, HEIGHT - MARGIN, MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="14">'
        f'{escape(title)}</text>',
        f'<path d="M{MARGIN} {MARGIN} V{HEIGHT - MARGIN} H{WIDTH - MARGIN}" '
        f'stroke="black" fill="none"/>',
        f'<text x="{WIDTH / 2:.2f}" y="{HEIGHT - 20}" text-anchor="middle" font-size="12">'
        f'log10 n [{xlo:.3g}, {xhi:.3g}]</text>',
        f'<text x="16" y="{HEIGHT / 2:.2f}" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.2f})" text-anchor="middle">'
        f'log10 value [{ylo:.3g}, {yhi:.3g}]</text>',
    ]
    for i, (name, p) in enumerate(pts):
        if not p:
            continue
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in p)
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline class="series" data-name="{escape(name)}" points="{coords}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5"/>')
    if bracket is not None and pts[0][1]:
        x0, y0 = pts[0][1][0]
        for slope in bracket:
            y1 = y0 - slope * (xhi - x0)
            out.append(f'<line class="guide" x1="{sx(x0):.2f}" y1="{sy(y0):.2f}" '
                       f'x2="{sx(xhi):.2f}" y2="{sy(y1):.2f}" stroke="gray" '
                       f'stroke-dasharray="4 3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(csv_path, out_path, bracket=None, title=None):
    """Plot a survival CSV (``n, surv``) or TV CSV (``n, tv``) to ``out_path``."""
    cols = read_table(csv_path, required=("n",))
    names = [c for c in ("surv", "tv", "weighted") if c in cols]
    if not names:
        raise SchemaError(f"{csv_path}: expected a surv or tv column")
    series = [(c, cols["n"], cols[c]) for c in names
              if any(v == v for v in cols[c])]
    svg = survival_svg(series, bracket, Path(csv_path).name if title is None else title)
    atomic_write(out_path, svg)
    return svg
