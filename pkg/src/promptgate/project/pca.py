"""2-D principal-component projection via singular value decomposition."""

from __future__ import annotations

import logging

import numpy as np

from ..core import ProjectionResult

logger = logging.getLogger(__name__)


def pca_project(X: np.ndarray, k: int = 2) -> ProjectionResult:
    """Project rows onto the top two principal components.

    Components are the right singular vectors of the mean-centered matrix;
    the explained variance ratio of component i is sigma_i^2 over the sum of
    all squared singular values. Each component's sign is fixed so its
    largest-magnitude loading is positive. Data with zero variance in every
    direction (all rows identical) has no principal directions and raises.
    """
    if k != 2:
        raise ValueError(f"projection results are 2-D; k must be 2, got {k}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    if d < k:
        raise ValueError(f"need at least {k} features, got {d}")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")

    centered = X - X.mean(axis=0)
    _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
    total = float((singular_values**2).sum())
    if total == 0.0:
        raise ValueError("all rows are identical: no principal directions exist")

    components = vt[:2].copy()
    for comp in components:
        if comp[np.argmax(np.abs(comp))] < 0:
            comp *= -1.0
    points = centered @ components.T
    ratios = (singular_values[:2] ** 2) / total
    evr = (float(min(ratios[0], 1.0)), float(min(ratios[1], 1.0)))
    logger.debug("pca on %dx%d: explained variance %.4f, %.4f", n, d, *evr)
    return ProjectionResult(
        points=points,
        method="pca",
        explained_variance_ratio=evr,
        params={"n_components": 2},
    )
