"""L2-regularized logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

logger = logging.getLogger(__name__)

# Backtracking halves the step at most this many times per epoch; past that
# the loss is flat at float resolution and training stops.
_MAX_HALVINGS = 60


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogRegConfig:
    learning_rate: float = 1.0
    l2: float = 1e-4
    epochs: int = 500
    tol: float = 1e-6
    positive_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l2 < 0:
            raise ValueError(f"l2 must be non-negative, got {self.l2}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if self.tol < 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")
        if self.positive_weight <= 0:
            raise ValueError(f"positive_weight must be positive, got {self.positive_weight}")


@dataclass
class LogRegModel:
    """Linear scorer: p(malicious | x) = sigmoid(x . weights + bias).

    ``loss_history`` holds the training objective before training and after
    every accepted epoch; it is not persisted with the model.
    """

    family: ClassVar[str] = "logreg"

    weights: np.ndarray
    bias: float
    config: LogRegConfig
    feature_dim: int
    provider_tag: str = ""
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ self.weights + self.bias)


def train_logreg(
    X: np.ndarray,
    y: np.ndarray,
    config: LogRegConfig | None = None,
    provider_tag: str = "",
) -> LogRegModel:
    """Fit by gradient descent with backtracking, so the loss never increases.

    The objective is the mean (optionally class-weighted) logistic loss plus
    ``l2/2 * ||w||^2``; the bias is not penalized. Each epoch starts from the
    configured step size and halves it until the objective stops increasing.
    Training ends at ``epochs``, when the gradient infinity-norm drops below
    ``tol``, or when no step improves the loss at float resolution.
    """
    config = config or LogRegConfig()
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
    sample_weight = np.where(y == 1, config.positive_weight, 1.0)
    total_weight = float(sample_weight.sum())
    yf = y.astype(np.float64)

    def loss(w: np.ndarray, b: float) -> float:
        z = X @ w + b
        ce = np.logaddexp(0.0, z) - yf * z
        return float((sample_weight * ce).sum() / total_weight + 0.5 * config.l2 * (w @ w))

    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    history = [loss(w, b)]
    for epoch in range(config.epochs):
        residual = sample_weight * (_sigmoid(X @ w + b) - yf)
        grad_w = X.T @ residual / total_weight + config.l2 * w
        grad_b = float(residual.sum() / total_weight)
        grad_norm = max(float(np.abs(grad_w).max(initial=0.0)), abs(grad_b))
        if grad_norm < config.tol:
            logger.debug("logreg converged at epoch %d (grad %.3g)", epoch, grad_norm)
            break
        step = config.learning_rate
        current = history[-1]
        accepted = False
        for _ in range(_MAX_HALVINGS):
            w_next = w - step * grad_w
            b_next = b - step * grad_b
            loss_next = loss(w_next, b_next)
            if loss_next <= current:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            logger.debug("logreg stopped at epoch %d: no improving step", epoch)
            break
        w, b = w_next, b_next
        history.append(loss_next)

    return LogRegModel(
        weights=w,
        bias=b,
        config=config,
        feature_dim=d,
        provider_tag=provider_tag,
        loss_history=np.asarray(history, dtype=np.float64),
    )
