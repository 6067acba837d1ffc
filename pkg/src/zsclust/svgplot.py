"""Standalone SVG scatter plots with byte-deterministic output.

One mark per point: fill keyed by cluster id, outline keyed by true
species, outliers drawn as crosses. All floats are formatted with
fixed precision and colors come from fixed palettes, so identical
input yields identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParameterError

_FILL_PALETTE = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]
_OUTLINE_PALETTE = [
    "#000000", "#5b2a86", "#0b5351", "#7a1f1f", "#2d4739",
    "#1d3461", "#6e4612", "#3c1518", "#4a4e69", "#283618",
]

_SIZE = 720
_MARGIN = 40
_R = 3.0


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def emit_scatter_svg(
    coords: np.ndarray,
    labels: Sequence[int],
    true_labels: Sequence[str],
    path: str | Path,
) -> None:
    """Write one SVG with a mark per 2D point and a legend.

    Raises ParameterError unless coords is N x 2.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ParameterError("scatter plot needs 2D coordinates")
    labels = [int(l) for l in labels]
    true_labels = list(true_labels)
    if not (coords.shape[0] == len(labels) == len(true_labels)):
        raise ParameterError("coords, labels and true_labels must align")

    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def to_px(pt: np.ndarray) -> tuple[float, float]:
        unit = (pt - lo) / span
        x = _MARGIN + unit[0] * (_SIZE - 2 * _MARGIN)
        y = _SIZE - _MARGIN - unit[1] * (_SIZE - 2 * _MARGIN)
        return x, y

    cluster_ids = sorted(set(l for l in labels if l >= 0))
    species = sorted(set(true_labels))
    fill_of = {c: _FILL_PALETTE[i % len(_FILL_PALETTE)] for i, c in enumerate(cluster_ids)}
    outline_of = {
        s: _OUTLINE_PALETTE[i % len(_OUTLINE_PALETTE)] for i, s in enumerate(species)
    }

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" '
        f'height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">'
    )
    parts.append(f'<rect width="{_SIZE}" height="{_SIZE}" fill="#ffffff"/>')
    for i in range(coords.shape[0]):
        x, y = to_px(coords[i])
        outline = outline_of[true_labels[i]]
        if labels[i] < 0:
            d = _R + 1.0
            parts.append(
                f'<path d="M {_fmt(x - d)} {_fmt(y - d)} L {_fmt(x + d)} {_fmt(y + d)} '
                f'M {_fmt(x - d)} {_fmt(y + d)} L {_fmt(x + d)} {_fmt(y - d)}" '
                f'stroke="{outline}" stroke-width="1.2" fill="none"/>'
            )
        else:
            parts.append(
                f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(_R)}" '
                f'fill="{fill_of[labels[i]]}" stroke="{outline}" stroke-width="0.8"/>'
            )

    ly = _MARGIN
    parts.append(
        f'<text x="{_SIZE - _MARGIN - 150}" y="{ly - 20}" font-size="11" '
        f'font-family="sans-serif">clusters (fill) / species (outline)</text>'
    )
    for c in cluster_ids:
        parts.append(
            f'<circle cx="{_SIZE - _MARGIN - 140}" cy="{ly}" r="4" fill="{fill_of[c]}"/>'
            f'<text x="{_SIZE - _MARGIN - 130}" y="{ly + 4}" font-size="11" '
            f'font-family="sans-serif">cluster {c}</text>'
        )
        ly += 16
    for s in species:
        parts.append(
            f'<circle cx="{_SIZE - _MARGIN - 140}" cy="{ly}" r="4" fill="none" '
            f'stroke="{outline_of[s]}" stroke-width="1.5"/>'
            f'<text x="{_SIZE - _MARGIN - 130}" y="{ly + 4}" font-size="11" '
            f'font-family="sans-serif">{_escape(s)}</text>'
        )
        ly += 16
    parts.append("</svg>")
    Path(path).write_bytes("\n".join(parts).encode("utf-8"))


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
