"""Exact t-SNE: full pairwise affinities, gradient descent with momentum.

The conditional affinity of each point is calibrated by binary search on the
Gaussian bandwidth until the distribution's entropy matches log(perplexity);
the symmetrized joint distribution is then matched against a Student-t kernel
in 2-D. O(n^2) memory and time per iteration, intended for n up to a few
thousand rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import ProjectionResult

logger = logging.getLogger(__name__)

PERPLEXITY_MIN = 5.0
PERPLEXITY_MAX = 50.0


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 15.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_switch_iter: int = 250
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not PERPLEXITY_MIN <= self.perplexity <= PERPLEXITY_MAX:
            raise ValueError(
                f"perplexity must be in [{PERPLEXITY_MIN:g}, {PERPLEXITY_MAX:g}], "
                f"got {self.perplexity}"
            )
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.early_exaggeration < 1:
            raise ValueError(f"early_exaggeration must be >= 1, got {self.early_exaggeration}")


def _squared_distances(X: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def conditional_affinities(
    X: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 200
) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic conditional affinities and each row's realized perplexity.

    Row i is a Gaussian over the other points whose bandwidth is bisected
    until the Shannon entropy is within ``tol`` of log(perplexity); the
    realized perplexity exp(H_i) is returned alongside. Diagonal is zero.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    D = _squared_distances(X)
    P = np.zeros((n, n), dtype=np.float64)
    realized = np.empty(n, dtype=np.float64)
    target = math.log(perplexity)
    for i in range(n):
        others = np.r_[0:i, i + 1 : n]
        # Shifting by the row minimum keeps exp() in range; the resulting
        # distribution and its entropy are unchanged.
        Di = D[i, others]
        Di = Di - Di.min()
        beta = 1.0
        beta_lo = 0.0
        beta_hi = math.inf
        expD = np.exp(-Di)
        sum_p = float(expD.sum())
        entropy = math.log(sum_p) + beta * float(Di @ expD) / sum_p
        for _ in range(max_steps):
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:  # entropy too high: sharpen the kernel
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == math.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = (beta + beta_lo) / 2.0
            expD = np.exp(-Di * beta)
            sum_p = float(expD.sum())
            entropy = math.log(sum_p) + beta * float(Di @ expD) / sum_p
        P[i, others] = expD / sum_p
        realized[i] = math.exp(entropy)
    return P, realized


def tsne_project(X: np.ndarray, config: TsneConfig | None = None) -> ProjectionResult:
    """Embed rows into 2-D by gradient descent on the KL divergence.

    Early iterations exaggerate the attractive forces; momentum steps up
    partway through. Deterministic for a given (X, config): the layout is
    initialized from a seeded Gaussian with sigma 1e-4.
    """
    config = config or TsneConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if n < 10:
        raise ValueError(f"need at least 10 rows, got {n}")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if config.perplexity >= (n - 1) / 3.0:
        raise ValueError(
            f"perplexity {config.perplexity:g} too large for {n} rows: "
            f"must be below (n - 1) / 3 = {(n - 1) / 3.0:g}"
        )

    P_cond, realized = conditional_affinities(X, config.perplexity)
    P = (P_cond + P_cond.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)
    P_exaggerated = P * config.early_exaggeration

    rng = np.random.default_rng(config.seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    # Per-coordinate adaptive gains keep the fixed step size stable across
    # dataset sizes: grown while the gradient opposes the velocity (steady
    # descent), cut when they align (overshoot).
    gains = np.ones_like(Y)

    for it in range(config.iterations):
        P_eff = P_exaggerated if it < config.exaggeration_iters else P
        num = 1.0 / (1.0 + _squared_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q_norm = float(num.sum())
        PQ = (P_eff - num / Q_norm) * num
        grad = 4.0 * (PQ.sum(axis=1)[:, None] * Y - PQ @ Y)
        momentum = (
            config.initial_momentum
            if it < config.momentum_switch_iter
            else config.final_momentum
        )
        same_direction = np.sign(grad) == np.sign(update)
        gains = np.where(same_direction, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    logger.debug(
        "tsne on %d rows: perplexity %g (realized mean %.3f), %d iterations",
        n, config.perplexity, float(realized.mean()), config.iterations,
    )
    return ProjectionResult(
        points=Y,
        method="tsne",
        explained_variance_ratio=None,
        params={
            "perplexity": config.perplexity,
            "seed": config.seed,
            "iterations": config.iterations,
            "realized_perplexity_mean": float(realized.mean()),
        },
    )


def knn_preservation(X_high: np.ndarray, Y_low: np.ndarray, k: int = 10) -> float:
    """Mean fraction of each point's k nearest neighbors kept by the embedding."""
    X_high = np.asarray(X_high, dtype=np.float64)
    Y_low = np.asarray(Y_low, dtype=np.float64)
    n = X_high.shape[0]
    if Y_low.shape[0] != n:
        raise ValueError("embeddings and points must have the same row count")
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")

    def knn(M: np.ndarray) -> np.ndarray:
        D = _squared_distances(M)
        np.fill_diagonal(D, np.inf)
        return np.argsort(D, axis=1, kind="stable")[:, :k]

    high = knn(X_high)
    low = knn(Y_low)
    overlap = sum(
        len(set(high[i].tolist()) & set(low[i].tolist())) for i in range(n)
    )
    return overlap / (n * k)


@dataclass(frozen=True)
class SweepEntry:
    perplexity: float
    result: ProjectionResult
    knn_preservation: float


def perplexity_sweep(
    X: np.ndarray,
    perplexities: Sequence[float] = (5.0, 15.0, 30.0, 50.0),
    seed: int = 0,
    k: int = 10,
) -> list[SweepEntry]:
    """Run t-SNE at each perplexity and score neighborhood preservation.

    All runs share the same seed so layouts differ only by perplexity.
    """
    entries = []
    for p in perplexities:
        config = TsneConfig(perplexity=float(p), seed=seed)
        result = tsne_project(X, config)
        score = knn_preservation(X, result.points, k=k)
        logger.info("perplexity %g: knn preservation %.3f", p, score)
        entries.append(SweepEntry(perplexity=float(p), result=result, knn_preservation=score))
    return entries
