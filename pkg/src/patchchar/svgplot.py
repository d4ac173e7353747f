"""Tiny dependency-free SVG writers for sweep/ROC data."""

from __future__ import annotations

import numpy as np

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f")

_W, _H, _M = 640, 420, 50


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(vals, dtype=float) - lo) / span * (out_hi - out_lo)


def line_plot_svg(series: dict, path, xlabel: str = "", ylabel: str = "") -> None:
    """series: name -> (x array, y array). NaNs are dropped per series."""
    xs, ys = [], []
    clean = {}
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        clean[name] = (x[keep], y[keep])
        xs.append(x[keep])
        ys.append(y[keep])
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    x0, x1 = (allx.min(), allx.max()) if allx.size else (0.0, 1.0)
    y0, y1 = (ally.min(), ally.max()) if ally.size else (0.0, 1.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_M}" y1="{_H - _M}" x2="{_W - _M}" y2="{_H - _M}" stroke="black"/>',
        f'<line x1="{_M}" y1="{_M}" x2="{_M}" y2="{_H - _M}" stroke="black"/>',
        f'<text x="{_W // 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{_H // 2}" font-size="12" transform="rotate(-90 14 {_H // 2})"'
        f' text-anchor="middle">{ylabel}</text>',
    ]
    for i, (name, (x, y)) in enumerate(clean.items()):
        if x.size == 0:
            continue
        px = _scale(x, x0, x1, _M, _W - _M)
        py = _scale(y, y0, y1, _H - _M, _M)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{_W - _M + 4}" y="{_M + 14 * i + 10}" font-size="11"'
            f' fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def heatmap_svg(values: np.ndarray, path, row_labels=None, col_labels=None) -> None:
    """Grayscale-to-viridis-ish heatmap of a 2D array (NaN drawn gray)."""
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    nr, nc = v.shape
    cw = max((_W - 2 * _M) // max(nc, 1), 4)
    ch = max((_H - 2 * _M) // max(nr, 1), 4)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    for r in range(nr):
        for c in range(nc):
            if np.isfinite(v[r, c]):
                t = (v[r, c] - lo) / span
                color = f"rgb({int(68 + t * 185)},{int(40 + t * 180)},{int(120 - t * 80)})"
            else:
                color = "rgb(200,200,200)"
            parts.append(
                f'<rect x="{_M + c * cw}" y="{_M + r * ch}" width="{cw}" height="{ch}"'
                f' fill="{color}"/>'
            )
    if row_labels is not None:
        for r, lbl in enumerate(row_labels):
            parts.append(
                f'<text x="{_M - 4}" y="{_M + r * ch + ch // 2 + 4}" font-size="10"'
                f' text-anchor="end">{lbl}</text>'
            )
    if col_labels is not None:
        for c, lbl in enumerate(col_labels):
            parts.append(
                f'<text x="{_M + c * cw + cw // 2}" y="{_M - 6}" font-size="10"'
                f' text-anchor="middle">{lbl}</text>'
            )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
