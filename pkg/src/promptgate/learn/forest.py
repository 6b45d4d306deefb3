"""Random forest of Gini-split decision trees over bootstrap samples."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .tree import TreeNode, best_gini_split, leaf, tree_apply

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestConfig:
    """``features_per_split=0`` means floor(sqrt(d)), resolved at fit time."""

    n_trees: int = 100
    max_depth: int = 16
    features_per_split: int = 0
    min_leaf: int = 2
    seed: int = 0
    positive_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be positive, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")
        if self.features_per_split < 0:
            raise ValueError(f"features_per_split must be >= 0, got {self.features_per_split}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be positive, got {self.min_leaf}")
        if self.positive_weight <= 0:
            raise ValueError(f"positive_weight must be positive, got {self.positive_weight}")


@dataclass
class ForestModel:
    family: ClassVar[str] = "forest"

    trees: list[TreeNode]
    config: ForestConfig
    feature_dim: int
    provider_tag: str = ""

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Mean of per-tree leaf values (each a positive fraction in [0, 1])."""
        scores = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            scores += tree_apply(tree, X)
        return scores / len(self.trees)


def train_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig | None = None,
    provider_tag: str = "",
) -> ForestModel:
    """Grow ``n_trees`` trees, each on its own bootstrap sample.

    Tree t draws its bootstrap indices and per-node feature subsets from a
    generator seeded with ``seed + t``, so training is deterministic for a
    given (X, y, config) and independent of tree order. Leaves store the
    (class-weighted) positive fraction of their training rows.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 training rows, got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("training labels must include both classes")

    n, d = X.shape
    k = config.features_per_split or max(1, math.floor(math.sqrt(d)))
    k = min(k, d)
    pw = config.positive_weight

    def leaf_value(idx: np.ndarray) -> float:
        pos = float(y[idx].sum())
        neg = idx.size - pos
        return pos * pw / (pos * pw + neg)

    def grow(idx: np.ndarray, depth: int, rng: np.random.Generator) -> TreeNode:
        labels = y[idx]
        if (
            depth >= config.max_depth
            or idx.size < 2 * config.min_leaf
            or labels.min() == labels.max()
        ):
            return leaf(leaf_value(idx))
        feats = rng.choice(d, size=k, replace=False)
        found = best_gini_split(X, y, idx, feats, config.min_leaf, pw)
        if found is None:
            return leaf(leaf_value(idx))
        feature, threshold = found
        go_left = X[idx, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=grow(idx[go_left], depth + 1, rng),
            right=grow(idx[~go_left], depth + 1, rng),
            value=0.0,
        )

    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(config.seed + t)
        bootstrap = rng.integers(0, n, size=n)
        trees.append(grow(bootstrap, 0, rng))
    logger.debug("forest trained: %d trees on %d rows, %d features/split", len(trees), n, k)
    return ForestModel(trees=trees, config=config, feature_dim=d, provider_tag=provider_tag)
