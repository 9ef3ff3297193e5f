"""Minimal SVG plots for command-line output: line plots and colored scatters."""
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 480
HEIGHT = 360
MARGIN = 48


def _scale(v, lo, hi, a, b):
    if hi - lo < 1e-300:
        return np.full_like(v, 0.5 * (a + b), dtype=float)
    return a + (v - lo) / (hi - lo) * (b - a)


def _frame(title, body, xlabel="", ylabel=""):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    parts.extend(body)
    parts.append("</svg>\n")
    return "\n".join(parts)


def _limits(x, y, equal):
    xlo, xhi = float(np.min(x)), float(np.max(x))
    ylo, yhi = float(np.min(y)), float(np.max(y))
    if equal:
        c = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
        half = 0.5 * max(xhi - xlo, yhi - ylo, 1e-12)
        return c[0] - half, c[0] + half, c[1] - half, c[1] + half
    return xlo, xhi, ylo, yhi


def line_plot(x, y, title, xlabel="", ylabel="", equal=False):
    """Polyline of ``y`` against ``x`` (non-finite points dropped)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) == 0:
        return _frame(title, [], xlabel, ylabel)
    xlo, xhi, ylo, yhi = _limits(x, y, equal)
    px = _scale(x, xlo, xhi, MARGIN, WIDTH - MARGIN)
    py = _scale(y, ylo, yhi, HEIGHT - MARGIN, MARGIN)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    body = [f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>']
    return _frame(title, body, xlabel, ylabel)


def scatter_plot(x, y, values, title, xlabel="", ylabel=""):
    """Points colored by ``values`` on a blue-to-red ramp."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    v = np.asarray(values, float)
    ok = np.isfinite(x) & np.isfinite(y) & np.isfinite(v)
    x, y, v = x[ok], y[ok], v[ok]
    if len(x) == 0:
        return _frame(title, [], xlabel, ylabel)
    xlo, xhi, ylo, yhi = _limits(x, y, True)
    px = _scale(x, xlo, xhi, MARGIN, WIDTH - MARGIN)
    py = _scale(y, ylo, yhi, HEIGHT - MARGIN, MARGIN)
    t = _scale(v, v.min(), v.max(), 0.0, 1.0)
    body = []
    for a, b, s in zip(px, py, t):
        r, g = int(255 * s), int(255 * (1 - s))
        body.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2" fill="rgb({r},0,{g})"/>')
    return _frame(title, body, xlabel, ylabel)
