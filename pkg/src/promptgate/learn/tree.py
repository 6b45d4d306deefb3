"""Binary decision-tree primitives shared by the forest and boosting trainers.

Split scanning is vectorized across all candidate features at once: one
argsort per node, prefix sums over the sorted label (or gradient) columns,
then a full gain matrix. Candidate thresholds are midpoints between adjacent
distinct sorted values; rows with x <= threshold go left. Ties on gain break
to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

# Gains below this are treated as zero so exactly-tied partitions do not
# produce splits from float rounding noise.
_GAIN_EPS = 1e-12


@dataclass
class TreeNode:
    """Internal split (feature, threshold, children) or leaf (value)."""

    feature: int
    threshold: float
    left: Optional["TreeNode"]
    right: Optional["TreeNode"]
    value: float

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def leaf(value: float) -> TreeNode:
    return TreeNode(feature=-1, threshold=0.0, left=None, right=None, value=float(value))


def tree_apply(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf value for every row of X, routing x <= threshold to the left."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.value
        else:
            go_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
    return out


def _sorted_columns(X: np.ndarray, row_idx: np.ndarray, feature_indices: np.ndarray):
    """Per-feature sorted value columns for the given rows: (values, order)."""
    sub = X[np.ix_(row_idx, feature_indices)]
    order = np.argsort(sub, axis=0, kind="stable")
    values = np.take_along_axis(sub, order, axis=0)
    return values, order


def _pick_candidate(
    gains: np.ndarray, values: np.ndarray, feature_indices: np.ndarray
) -> Optional[tuple[int, float]]:
    """Best (feature, threshold) from the gain matrix, or None if no gain."""
    best_gain = gains.max()
    if not best_gain > _GAIN_EPS:
        return None
    best: Optional[tuple[int, float]] = None
    for i, j in np.argwhere(gains == best_gain):
        candidate = (
            int(feature_indices[j]),
            float((values[i, j] + values[i + 1, j]) / 2.0),
        )
        if best is None or candidate < best:
            best = candidate
    return best


def best_gini_split(
    X: np.ndarray,
    y: np.ndarray,
    row_idx: np.ndarray,
    feature_indices: np.ndarray,
    min_leaf: int,
    positive_weight: float = 1.0,
) -> Optional[tuple[int, float]]:
    """Split of the given rows with the largest weighted Gini decrease.

    Positives count ``positive_weight`` per sample in both the class
    proportions and the child weighting. Returns None when no candidate
    strictly decreases impurity or satisfies ``min_leaf`` on both sides.
    """
    m = row_idx.size
    feature_indices = np.sort(np.asarray(feature_indices, dtype=np.int64))
    if m < 2 * min_leaf or feature_indices.size == 0:
        return None
    values, order = _sorted_columns(X, row_idx, feature_indices)
    y_sorted = y[row_idx][order]

    w = positive_weight
    pos_prefix = np.cumsum(y_sorted, axis=0, dtype=np.float64)
    total_pos = float(pos_prefix[-1, 0])
    total_neg = m - total_pos
    w_total = total_pos * w + total_neg
    gini_parent = 1.0 - (total_pos * w / w_total) ** 2 - (total_neg / w_total) ** 2

    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    pos_left = pos_prefix[:-1]
    neg_left = n_left - pos_left
    pos_right = total_pos - pos_left
    neg_right = (m - n_left) - pos_right

    w_left = pos_left * w + neg_left
    w_right = pos_right * w + neg_right
    gini_left = 1.0 - (pos_left * w / w_left) ** 2 - (neg_left / w_left) ** 2
    gini_right = 1.0 - (pos_right * w / w_right) ** 2 - (neg_right / w_right) ** 2
    decrease = gini_parent - (w_left * gini_left + w_right * gini_right) / w_total

    ok_size = (n_left >= min_leaf) & ((m - n_left) >= min_leaf)
    ok_value = values[1:] > values[:-1]
    gains = np.where(ok_size & ok_value, decrease, -np.inf)
    return _pick_candidate(gains, values, feature_indices)


def best_newton_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    row_idx: np.ndarray,
    feature_indices: np.ndarray,
    l2: float,
    min_leaf: int = 1,
) -> Optional[tuple[int, float]]:
    """Split maximizing the second-order loss-reduction score.

    gain = 1/2 * (GL^2/(HL+l2) + GR^2/(HR+l2) - G^2/(H+l2)) for gradient and
    hessian sums over the child partitions.
    """
    m = row_idx.size
    feature_indices = np.sort(np.asarray(feature_indices, dtype=np.int64))
    if m < 2 * min_leaf or feature_indices.size == 0:
        return None
    values, order = _sorted_columns(X, row_idx, feature_indices)
    g_sorted = g[row_idx][order]
    h_sorted = h[row_idx][order]

    g_prefix = np.cumsum(g_sorted, axis=0)
    h_prefix = np.cumsum(h_sorted, axis=0)
    g_total = float(g_prefix[-1, 0])
    h_total = float(h_prefix[-1, 0])

    g_left = g_prefix[:-1]
    h_left = h_prefix[:-1]
    g_right = g_total - g_left
    h_right = h_total - h_left
    gain = 0.5 * (
        g_left**2 / (h_left + l2)
        + g_right**2 / (h_right + l2)
        - g_total**2 / (h_total + l2)
    )

    n_left = np.arange(1, m)[:, None]
    ok_size = (n_left >= min_leaf) & ((m - n_left) >= min_leaf)
    ok_value = values[1:] > values[:-1]
    gains = np.where(ok_size & ok_value, gain, -np.inf)
    return _pick_candidate(gains, values, feature_indices)


def tree_to_list(root: TreeNode) -> list[list]:
    """Pre-order node list with explicit leaf markers, JSON-serializable."""
    out: list[list] = []

    def walk(node: TreeNode) -> None:
        if node.is_leaf:
            out.append(["leaf", float(node.value)])
        else:
            out.append(["split", int(node.feature), float(node.threshold)])
            walk(node.left)
            walk(node.right)

    walk(root)
    return out


def tree_from_list(items: list) -> TreeNode:
    """Rebuild a tree from its pre-order list; raises ValueError if malformed."""
    cursor = 0

    def build() -> TreeNode:
        nonlocal cursor
        if cursor >= len(items):
            raise ValueError("truncated tree: ran out of nodes")
        item = items[cursor]
        cursor += 1
        if not isinstance(item, (list, tuple)) or not item:
            raise ValueError(f"malformed tree node: {item!r}")
        kind = item[0]
        if kind == "leaf":
            if len(item) != 2:
                raise ValueError(f"malformed leaf node: {item!r}")
            return leaf(float(item[1]))
        if kind == "split":
            if len(item) != 3:
                raise ValueError(f"malformed split node: {item!r}")
            feature = int(item[1])
            if feature < 0:
                raise ValueError(f"split feature must be non-negative, got {feature}")
            threshold = float(item[2])
            left = build()
            right = build()
            return TreeNode(feature=feature, threshold=threshold, left=left, right=right, value=0.0)
        raise ValueError(f"unknown tree node kind: {kind!r}")

    root = build()
    if cursor != len(items):
        raise ValueError(f"trailing tree nodes after index {cursor}")
    return root
