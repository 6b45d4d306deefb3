"""Deterministic scatter-plot output (SVG or CSV) for 2-D projections."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from ..core import ProjectionResult
from ..rng import Xoshiro256StarStar

logger = logging.getLogger(__name__)

SCATTER_FORMATS = ("svg", "csv")

_CANVAS = 800
_PLOT_LEFT, _PLOT_RIGHT = 50.0, 630.0
_PLOT_TOP, _PLOT_BOTTOM = 60.0, 760.0
_LEGEND_X = 650.0
_BENIGN_COLOR = "#1f77b4"
_MALICIOUS_COLOR = "#d62728"


def stratified_subsample(labels: np.ndarray, max_rows: int = 5000, seed: int = 0) -> np.ndarray:
    """Indices of a label-proportional subsample, ascending (dataset order).

    Returns all indices when the data already fits. Per-class quotas are
    max_rows * class_share rounded, chosen by a seeded shuffle within each
    class, so the result is reproducible.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D")
    if max_rows < 1:
        raise ValueError(f"max_rows must be positive, got {max_rows}")
    n = len(labels)
    if n <= max_rows:
        return np.arange(n, dtype=np.int64)

    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels == 0)
    n_pos_keep = round(max_rows * len(pos_idx) / n)
    n_neg_keep = max_rows - n_pos_keep

    rng = Xoshiro256StarStar(seed)
    keep: list[int] = []
    for class_idx, quota in ((neg_idx, n_neg_keep), (pos_idx, n_pos_keep)):
        pool = class_idx.tolist()
        rng.shuffle(pool)
        keep.extend(pool[:quota])
    return np.asarray(sorted(keep), dtype=np.int64)


def _scale(values: np.ndarray, out_lo: float, out_hi: float) -> np.ndarray:
    """Affine map of values into [out_lo, out_hi] with 5% padding each side."""
    lo, hi = float(values.min()), float(values.max())
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    lo -= pad
    hi += pad
    return out_lo + (values - lo) / (hi - lo) * (out_hi - out_lo)


def _svg_title(result: ProjectionResult) -> str:
    if result.method == "pca":
        evr = result.explained_variance_ratio
        return f"PCA (explained variance {evr[0] * 100:.1f}%, {evr[1] * 100:.1f}%)"
    perplexity = result.params.get("perplexity")
    seed = result.params.get("seed")
    return f"t-SNE (perplexity={perplexity:g}, seed={seed})"


def _render_svg(result: ProjectionResult, labels: np.ndarray) -> str:
    xs = _scale(result.points[:, 0], _PLOT_LEFT, _PLOT_RIGHT)
    # SVG y grows downward; flip so larger coordinates plot higher.
    ys = _scale(result.points[:, 1], _PLOT_BOTTOM, _PLOT_TOP)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CANVAS}" height="{_CANVAS}" '
        f'viewBox="0 0 {_CANVAS} {_CANVAS}">',
        f'<rect width="{_CANVAS}" height="{_CANVAS}" fill="white"/>',
        f'<text x="{_PLOT_LEFT:.0f}" y="30" font-family="sans-serif" font-size="18">'
        f"{_svg_title(result)}</text>",
        f'<rect x="{_PLOT_LEFT:.0f}" y="{_PLOT_TOP:.0f}" '
        f'width="{_PLOT_RIGHT - _PLOT_LEFT:.0f}" height="{_PLOT_BOTTOM - _PLOT_TOP:.0f}" '
        f'fill="none" stroke="#cccccc"/>',
    ]
    for i in range(len(labels)):
        color = _MALICIOUS_COLOR if labels[i] == 1 else _BENIGN_COLOR
        lines.append(
            f'<circle cx="{xs[i]:.2f}" cy="{ys[i]:.2f}" r="3" fill="{color}" fill-opacity="0.6"/>'
        )
    for offset, (color, name) in enumerate(
        ((_BENIGN_COLOR, "benign"), (_MALICIOUS_COLOR, "malicious"))
    ):
        cy = _PLOT_TOP + 20 + 24 * offset
        lines.append(f'<circle cx="{_LEGEND_X:.0f}" cy="{cy:.0f}" r="5" fill="{color}"/>')
        lines.append(
            f'<text x="{_LEGEND_X + 12:.0f}" y="{cy + 5:.0f}" '
            f'font-family="sans-serif" font-size="14">{name}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_scatter(
    result: ProjectionResult,
    labels: np.ndarray,
    path: str | Path,
    format: str = "svg",
) -> Path:
    """Write the projection as a class-colored SVG scatter or a CSV of points.

    Output bytes depend only on (result, labels), so reruns are identical.
    """
    if format not in SCATTER_FORMATS:
        raise ValueError(f"unknown format {format!r}, expected one of {SCATTER_FORMATS}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or len(labels) != len(result.points):
        raise ValueError("labels must be 1-D and match the projected points")
    if len(labels) and not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "svg":
        path.write_text(_render_svg(result, labels), encoding="utf-8")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "label"])
            for i in range(len(labels)):
                writer.writerow(
                    [repr(float(result.points[i, 0])), repr(float(result.points[i, 1])), int(labels[i])]
                )
    logger.info("wrote %s scatter (%d points) to %s", result.method, len(labels), path)
    return path
