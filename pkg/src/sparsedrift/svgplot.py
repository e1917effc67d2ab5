"""Static SVG emission for the experiment harness.

No plotting runtime: figures are written as plain SVG strings.  Heatmaps use
a documented linear two-sided color scale: values are mapped linearly from
[-vmax, +vmax] (vmax = max |value| unless given) to blue (negative), white
(zero), red (positive).  Output contains no timestamps, so re-runs are
byte-identical.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _color(value: float, vmax: float) -> str:
    if vmax <= 0:
        t = 0.0
    else:
        t = max(-1.0, min(1.0, value / vmax))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f"rgb({r},{g},{b})"


def heatmap_svg(matrix: np.ndarray, title: str = "", vmax: float | None = None) -> str:
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    rows, cols = mat.shape
    if vmax is None:
        vmax = float(np.max(np.abs(mat))) if mat.size else 1.0
    cell = 18
    pad = 28
    width = cols * cell + 2 * pad
    height = rows * cell + 2 * pad + (16 if title else 0)
    top = pad + (16 if title else 0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:g}" y="{pad - 8}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{title}</text>'
        )
    for i in range(rows):
        for j in range(cols):
            parts.append(
                f'<rect x="{pad + j * cell}" y="{top + i * cell}" width="{cell}" '
                f'height="{cell}" fill="{_color(mat[i, j], vmax)}" '
                f'stroke="#cccccc" stroke-width="0.5"/>'
            )
    parts.append(
        f'<text x="{pad}" y="{height - 6}" font-family="monospace" font-size="10">'
        f"linear scale: blue=-{vmax:.4g} white=0 red=+{vmax:.4g}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_SERIES_COLORS = ["#1f6fb4", "#d1342f", "#3a8f3a", "#8a5fb4", "#b87f1f"]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_chart_svg(
    x: Sequence[float],
    series: Sequence[tuple[str, Sequence[float], Sequence[float] | None]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    log_x: bool = False,
    log_y: bool = False,
) -> str:
    """Line chart with optional +-1 sd bands; series = [(label, mean, sd|None)]."""
    xs = np.asarray(x, dtype=float)
    width, height = 480, 320
    ml, mr, mt, mb = 62, 16, 28, 44
    pw, ph = width - ml - mr, height - mt - mb

    def tx(v: np.ndarray) -> np.ndarray:
        return np.log10(v) if log_x else np.asarray(v, float)

    def ty(v: np.ndarray) -> np.ndarray:
        return np.log10(v) if log_y else np.asarray(v, float)

    all_y = []
    for _, mean, sd in series:
        mean = np.asarray(mean, float)
        all_y.append(mean)
        if sd is not None:
            sd = np.asarray(sd, float)
            all_y.extend([mean + sd, np.maximum(mean - sd, 1e-300 if log_y else -np.inf)])
    ally = np.concatenate([np.asarray(v, float).ravel() for v in all_y])
    if log_y:
        ally = ally[ally > 0]
    x_lo, x_hi = float(tx(xs).min()), float(tx(xs).max())
    y_lo, y_hi = float(ty(ally).min()), float(ty(ally).max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    y_pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def px(v) -> np.ndarray:
        return ml + (tx(np.asarray(v, float)) - x_lo) / (x_hi - x_lo) * pw

    def py(v) -> np.ndarray:
        return mt + (y_hi - ty(np.asarray(v, float))) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:g}" y="18" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{title}</text>'
        )
    for t in _ticks(x_lo, x_hi):
        xpix = ml + (t - x_lo) / (x_hi - x_lo) * pw
        label = f"{10**t:.4g}" if log_x else f"{t:.4g}"
        parts.append(f'<line x1="{xpix:.2f}" y1="{mt + ph}" x2="{xpix:.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        parts.append(
            f'<text x="{xpix:.2f}" y="{mt + ph + 16}" text-anchor="middle" '
            f'font-family="monospace" font-size="10">{label}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        ypix = mt + (y_hi - t) / (y_hi - y_lo) * ph
        label = f"{10**t:.3g}" if log_y else f"{t:.3g}"
        parts.append(f'<line x1="{ml - 4}" y1="{ypix:.2f}" x2="{ml}" y2="{ypix:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{ml - 6}" y="{ypix + 3:.2f}" text-anchor="end" '
            f'font-family="monospace" font-size="10">{label}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{ml + pw / 2:g}" y="{height - 8}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{xlabel}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="14" y="{mt + ph / 2:g}" text-anchor="middle" font-family="monospace" '
            f'font-size="11" transform="rotate(-90 14 {mt + ph / 2:g})">{ylabel}</text>'
        )
    for idx, (label, mean, sd) in enumerate(series):
        color = _SERIES_COLORS[idx % len(_SERIES_COLORS)]
        mean = np.asarray(mean, float)
        if sd is not None:
            sd = np.asarray(sd, float)
            upper = mean + sd
            lower = mean - sd
            if log_y:
                lower = np.maximum(lower, np.min(mean) * 1e-3)
            pts_up = [f"{a:.2f},{b:.2f}" for a, b in zip(px(xs), py(upper))]
            pts_dn = [f"{a:.2f},{b:.2f}" for a, b in zip(px(xs)[::-1], py(lower)[::-1])]
            parts.append(
                f'<polygon points="{" ".join(pts_up + pts_dn)}" fill="{color}" '
                f'fill-opacity="0.15" stroke="none"/>'
            )
        pts = [f"{a:.2f},{b:.2f}" for a, b in zip(px(xs), py(mean))]
        parts.append(
            f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for a, b in zip(px(xs), py(mean)):
            parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{color}"/>')
        ly = mt + 14 + 14 * idx
        parts.append(f'<line x1="{ml + pw - 88}" y1="{ly}" x2="{ml + pw - 68}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{ml + pw - 62}" y="{ly + 3}" font-family="monospace" font-size="10">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
