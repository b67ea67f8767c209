"""Deterministic plot artifacts: per-figure CSV data plus a static SVG.

No plotting library: the SVG is assembled from fixed templates with
coordinates formatted to six decimals, so the same inputs always produce the
same bytes.  Each figure writes ``<name>.csv`` (columns x, y, label) next to
``<name>.svg``.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

_WIDTH = 480
_HEIGHT = 360
_MARGIN_L = 62
_MARGIN_R = 18
_MARGIN_T = 34
_MARGIN_B = 48


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def scatter_csv(points: Sequence[tuple[float, float, str]]) -> str:
    lines = ["x,y,label"]
    for x, y, label in points:
        lines.append(f"{x!r},{y!r},{label}")
    return "\n".join(lines) + "\n"


def scatter_svg(points: Sequence[tuple[float, float, str]], title: str,
                x_label: str, y_label: str) -> str:
    """A labeled scatter plot sized for quick inspection in a browser."""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    x_pad = (x_hi - x_lo) * 0.08 or 0.05
    y_pad = (y_hi - y_lo) * 0.08 or 0.05
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad
    span_x = _WIDTH - _MARGIN_L - _MARGIN_R
    span_y = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * span_x

    def py(y: float) -> float:
        return _HEIGHT - _MARGIN_B - (y - y_lo) / (y_hi - y_lo) * span_y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_escape(title)}</text>',
    ]
    axis_y = _HEIGHT - _MARGIN_B
    parts.append(f'<line x1="{_MARGIN_L}" y1="{axis_y}" '
                 f'x2="{_WIDTH - _MARGIN_R}" y2="{axis_y}" '
                 f'stroke="black" stroke-width="1"/>')
    parts.append(f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" '
                 f'x2="{_MARGIN_L}" y2="{axis_y}" '
                 f'stroke="black" stroke-width="1"/>')
    for t in _ticks(x_lo, x_hi):
        x = _fmt(px(t))
        parts.append(f'<line x1="{x}" y1="{axis_y}" x2="{x}" '
                     f'y2="{axis_y + 5}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{x}" y="{axis_y + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">'
                     f'{t:.3f}</text>')
    for t in _ticks(y_lo, y_hi):
        y = _fmt(py(t))
        parts.append(f'<line x1="{_MARGIN_L - 5}" y1="{y}" x2="{_MARGIN_L}" '
                     f'y2="{y}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y}" text-anchor="end" '
                     f'dominant-baseline="middle" font-family="sans-serif" '
                     f'font-size="10">{t:.3f}</text>')
    parts.append(f'<text x="{_MARGIN_L + span_x / 2:.1f}" '
                 f'y="{_HEIGHT - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">'
                 f'{_escape(x_label)}</text>')
    parts.append(f'<text x="16" y="{_MARGIN_T + span_y / 2:.1f}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="11" transform="rotate(-90 16 '
                 f'{_MARGIN_T + span_y / 2:.1f})">{_escape(y_label)}</text>')
    for x, y, label in points:
        cx = _fmt(px(x))
        cy = _fmt(py(y))
        parts.append(f'<circle cx="{cx}" cy="{cy}" r="4" fill="#1f77b4" '
                     f'fill-opacity="0.75"/>')
        parts.append(f'<text x="{_fmt(px(x) + 6)}" y="{_fmt(py(y) - 5)}" '
                     f'font-family="sans-serif" font-size="9" '
                     f'fill="#333333">{_escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_scatter(points: Sequence[tuple[float, float, str]], out_dir:
                  str | os.PathLike, name: str, title: str, x_label: str,
                  y_label: str) -> list[str]:
    """Write <name>.csv and <name>.svg; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    svg_path = out / f"{name}.svg"
    csv_path.write_text(scatter_csv(points), encoding="utf-8")
    svg_path.write_text(scatter_svg(points, title, x_label, y_label),
                        encoding="utf-8")
    return [str(csv_path), str(svg_path)]
