"""Minimal SVG 1.1 log-log scatter with a fitted line."""
import math
from typing import Optional, Sequence

WIDTH, HEIGHT, PAD = 480, 360, 48


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def loglog_plot(xs: Sequence[float], ys: Sequence[float], slope: Optional[float] = None,
                intercept: Optional[float] = None, title: str = "", xlabel: str = "ln n",
                ylabel: str = "ln y") -> str:
    """Points are plotted at (ln x, ln y); the line is ln y = slope ln x + intercept."""
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    if slope is not None and intercept is not None:
        ly_fit = [slope * v + intercept for v in lx]
    else:
        ly_fit = []
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly + ly_fit), max(ly + ly_fit)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(v):
        return PAD + (v - x0) / (x1 - x0) * (WIDTH - 2 * PAD)

    def py(v):
        return HEIGHT - PAD - (v - y0) / (y1 - y0) * (HEIGHT - 2 * PAD)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="{PAD // 2}" text-anchor="middle" font-size="14">{_escape(title)}</text>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{_escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT // 2}" font-size="12" transform="rotate(-90 14 {HEIGHT // 2})" '
        f'text-anchor="middle">{_escape(ylabel)}</text>',
    ]
    for a, b in zip(lx, ly):
        parts.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3" fill="steelblue"/>')
    if ly_fit:
        parts.append(
            f'<line x1="{_fmt(px(x0))}" y1="{_fmt(py(slope * x0 + intercept))}" '
            f'x2="{_fmt(px(x1))}" y2="{_fmt(py(slope * x1 + intercept))}" stroke="firebrick"/>'
        )
        parts.append(f'<text x="{WIDTH - PAD}" y="{PAD}" text-anchor="end" font-size="12">'
                     f'slope {slope:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
