"""Gradient-boosted trees on the logistic loss with second-order splits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .tree import TreeNode, best_newton_split, leaf, tree_apply

logger = logging.getLogger(__name__)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class GbtConfig:
    """``seed`` is carried for config echo; fitting is exact greedy, no sampling."""

    n_rounds: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    l2_leaf: float = 1.0
    seed: int = 0
    positive_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be positive, got {self.n_rounds}")
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")
        if self.l2_leaf < 0:
            raise ValueError(f"l2_leaf must be non-negative, got {self.l2_leaf}")
        if self.positive_weight <= 0:
            raise ValueError(f"positive_weight must be positive, got {self.positive_weight}")


@dataclass
class GbtModel:
    """Additive model: p = sigmoid(base_score + learning_rate * sum of trees).

    ``loss_history`` holds the training loss before boosting and after each
    round; it is not persisted with the model.
    """

    family: ClassVar[str] = "gbt"

    base_score: float
    trees: list[TreeNode]
    config: GbtConfig
    feature_dim: int
    provider_tag: str = ""
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def decision_margin(self, X: np.ndarray) -> np.ndarray:
        margin = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            margin += self.config.learning_rate * tree_apply(tree, X)
        return margin

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_margin(X))


def train_gbt(
    X: np.ndarray,
    y: np.ndarray,
    config: GbtConfig | None = None,
    provider_tag: str = "",
) -> GbtModel:
    """Newton boosting: each round fits a tree to the loss gradients.

    With g = p - y and h = p(1 - p) (both scaled by the class weight), leaves
    take the damped Newton step -G/(H + l2_leaf) over their region and splits
    maximize the corresponding loss-reduction score. The base score is the
    log-odds of the (weighted) positive prevalence. Boosting stops early if a
    round's tree moves no margin at float resolution.
    """
    config = config or GbtConfig()
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
    all_features = np.arange(d)
    sample_weight = np.where(y == 1, config.positive_weight, 1.0)
    total_weight = float(sample_weight.sum())
    yf = y.astype(np.float64)
    l2 = config.l2_leaf

    def loss(margin: np.ndarray) -> float:
        ce = np.logaddexp(0.0, margin) - yf * margin
        return float((sample_weight * ce).sum() / total_weight)

    pos_weight_sum = float(sample_weight[y == 1].sum())
    base_score = math.log(pos_weight_sum / (total_weight - pos_weight_sum))
    margin = np.full(n, base_score, dtype=np.float64)

    g = np.zeros(n)
    h = np.zeros(n)

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        g_sum = float(g[idx].sum())
        h_sum = float(h[idx].sum())
        if depth >= config.max_depth or idx.size < 2:
            return leaf(-g_sum / (h_sum + l2))
        found = best_newton_split(X, g, h, idx, all_features, l2)
        if found is None:
            return leaf(-g_sum / (h_sum + l2))
        feature, threshold = found
        go_left = X[idx, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=grow(idx[go_left], depth + 1),
            right=grow(idx[~go_left], depth + 1),
            value=0.0,
        )

    trees: list[TreeNode] = []
    history = [loss(margin)]
    root_idx = np.arange(n)
    for round_index in range(config.n_rounds):
        p = _sigmoid(margin)
        g[:] = sample_weight * (p - yf)
        h[:] = sample_weight * p * (1.0 - p)
        tree = grow(root_idx, 0)
        delta = config.learning_rate * tree_apply(tree, X)
        if float(np.abs(delta).max()) < 1e-15:
            logger.debug("gbt stopped after %d rounds: no margin movement", round_index)
            break
        margin += delta
        trees.append(tree)
        history.append(loss(margin))
    if not trees:
        # Degenerate but valid: the base score already sits at the optimum.
        trees.append(leaf(0.0))
        history.append(history[0])

    return GbtModel(
        base_score=base_score,
        trees=trees,
        config=config,
        feature_dim=d,
        provider_tag=provider_tag,
        loss_history=np.asarray(history, dtype=np.float64),
    )
