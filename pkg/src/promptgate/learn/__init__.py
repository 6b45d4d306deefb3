"""Classifier families (logreg, forest, gbt) with a shared scoring interface."""

from __future__ import annotations

import numpy as np

from .forest import ForestConfig, ForestModel, train_random_forest
from .gbt import GbtConfig, GbtModel, train_gbt
from .logreg import LogRegConfig, LogRegModel, train_logreg
from .persist import MODEL_FORMAT_VERSION, ModelEnvelopeError, load_model, save_model
from .tree import TreeNode, tree_apply

FAMILIES = ("logreg", "forest", "gbt")

TRAINERS = {
    "logreg": train_logreg,
    "forest": train_random_forest,
    "gbt": train_gbt,
}

CONFIG_TYPES = {
    "logreg": LogRegConfig,
    "forest": ForestConfig,
    "gbt": GbtConfig,
}


def predict_proba(model, X: np.ndarray) -> np.ndarray:
    """Malicious-class probability per row, for any model family."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] != model.feature_dim:
        raise ValueError(f"X has {X.shape[1]} features, model expects {model.feature_dim}")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    return model.predict_proba(X)


def predict(model, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Hard labels: 1 where the score is at or above the threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return (predict_proba(model, X) >= threshold).astype(np.int64)


__all__ = [
    "FAMILIES",
    "TRAINERS",
    "CONFIG_TYPES",
    "MODEL_FORMAT_VERSION",
    "ModelEnvelopeError",
    "TreeNode",
    "tree_apply",
    "LogRegConfig",
    "LogRegModel",
    "train_logreg",
    "ForestConfig",
    "ForestModel",
    "train_random_forest",
    "GbtConfig",
    "GbtModel",
    "train_gbt",
    "save_model",
    "load_model",
    "predict",
    "predict_proba",
]
