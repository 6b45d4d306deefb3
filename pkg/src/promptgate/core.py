"""Shared domain types for the detection pipeline.

Pure data carriers plus corpus validation; no I/O lives here. All types are
immutable after construction (frozen dataclasses, read-only numpy arrays) and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

BENIGN = 0
MALICIOUS = 1

# Reject reason codes used by validate_corpus.
REJECT_EMPTY_TEXT = "empty-text"
REJECT_DUPLICATE_ID = "duplicate-id"
REJECT_BAD_LABEL = "bad-label"
REJECT_EMPTY_ID = "empty-id"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PromptRecord:
    """One labeled prompt: 0 = benign, 1 = malicious.

    Carrier only; invariants (non-empty id/text, binary label) are enforced
    by validate_corpus so that bad rows can be reported instead of thrown.
    """

    id: str
    source: str
    text: str
    label: int


@dataclass(frozen=True)
class CorpusReject:
    record: PromptRecord
    reason: str


@dataclass(frozen=True)
class ValidationSummary:
    """Outcome of validate_corpus: accepted records plus per-record rejects."""

    accepted: tuple[PromptRecord, ...]
    rejects: tuple[CorpusReject, ...]

    @property
    def n_accepted(self) -> int:
        return len(self.accepted)

    def n_rejected(self, reason: str | None = None) -> int:
        if reason is None:
            return len(self.rejects)
        return sum(1 for r in self.rejects if r.reason == reason)

    @property
    def n_empty_text(self) -> int:
        return self.n_rejected(REJECT_EMPTY_TEXT)

    @property
    def n_duplicate_id(self) -> int:
        return self.n_rejected(REJECT_DUPLICATE_ID)

    @property
    def n_bad_label(self) -> int:
        return self.n_rejected(REJECT_BAD_LABEL)


def validate_corpus(records: Iterable[PromptRecord]) -> ValidationSummary:
    """Validate records, preserving input order among the accepted ones.

    A record is rejected for the first failing check, in this order:
    empty id, empty text (after trimming), non-binary label, duplicate id.
    Id uniqueness is enforced over accepted records only, so a rejected row
    does not consume its id.
    """
    accepted: list[PromptRecord] = []
    rejects: list[CorpusReject] = []
    seen_ids: set[str] = set()
    for rec in records:
        if not rec.id:
            rejects.append(CorpusReject(rec, REJECT_EMPTY_ID))
        elif not rec.text or not rec.text.strip():
            rejects.append(CorpusReject(rec, REJECT_EMPTY_TEXT))
        elif rec.label not in (BENIGN, MALICIOUS) or isinstance(rec.label, bool):
            rejects.append(CorpusReject(rec, REJECT_BAD_LABEL))
        elif rec.id in seen_ids:
            rejects.append(CorpusReject(rec, REJECT_DUPLICATE_ID))
        else:
            seen_ids.add(rec.id)
            accepted.append(rec)
    return ValidationSummary(tuple(accepted), tuple(rejects))


@dataclass(frozen=True)
class EmbeddedDataset:
    """Aligned record metadata plus an n x d float64 embedding matrix.

    Row i of ``matrix`` belongs to (ids[i], sources[i], labels[i]).
    Construction rejects misaligned, non-finite, or non-binary-label data.
    """

    ids: tuple[str, ...]
    sources: tuple[str, ...]
    labels: np.ndarray
    matrix: np.ndarray
    provider_tag: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "sources", tuple(str(s) for s in self.sources))
        labels = np.asarray(self.labels, dtype=np.int64)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
        n = matrix.shape[0]
        if not (len(self.ids) == len(self.sources) == len(labels) == n):
            raise ValueError(
                "misaligned dataset: "
                f"{len(self.ids)} ids, {len(self.sources)} sources, "
                f"{len(labels)} labels, {n} matrix rows"
            )
        if labels.size and not np.isin(labels, (BENIGN, MALICIOUS)).all():
            raise ValueError("labels must be 0 or 1")
        if matrix.size and not np.isfinite(matrix).all():
            raise ValueError("embedding matrix contains non-finite values")
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "matrix", _freeze(matrix))

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def subset(self, indices: Sequence[int] | np.ndarray) -> "EmbeddedDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return EmbeddedDataset(
            ids=tuple(self.ids[i] for i in idx),
            sources=tuple(self.sources[i] for i in idx),
            labels=self.labels[idx],
            matrix=self.matrix[idx],
            provider_tag=self.provider_tag,
        )


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/test index sets covering 0..n-1, with the seed that made them."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    test_fraction: float

    def __post_init__(self) -> None:
        train = np.asarray(self.train_indices, dtype=np.int64)
        test = np.asarray(self.test_indices, dtype=np.int64)
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        combined = np.sort(np.concatenate([train, test]))
        if combined.size and not np.array_equal(combined, np.arange(combined.size)):
            raise ValueError("train and test indices must partition 0..n-1")
        object.__setattr__(self, "train_indices", _freeze(train))
        object.__setattr__(self, "test_indices", _freeze(test))

    @property
    def n(self) -> int:
        return len(self.train_indices) + len(self.test_indices)


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts plus AUC/precision/recall/F1 for one (provider, model) pair.

    Range checks only: externally imported detector results carry rounded
    published values, so f1 is not re-derived from precision/recall here.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    auc: float
    precision: float
    recall: float
    f1: float
    threshold: float
    model_tag: str
    provider_tag: str

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("auc", "precision", "recall", "f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def n_evaluated(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_tag": self.model_tag,
            "provider_tag": self.provider_tag,
            "threshold": self.threshold,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "auc": self.auc,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalReport":
        return cls(
            tp=int(d["tp"]),
            fp=int(d["fp"]),
            tn=int(d["tn"]),
            fn=int(d["fn"]),
            auc=float(d["auc"]),
            precision=float(d["precision"]),
            recall=float(d["recall"]),
            f1=float(d["f1"]),
            threshold=float(d["threshold"]),
            model_tag=str(d["model_tag"]),
            provider_tag=str(d["provider_tag"]),
        )


@dataclass(frozen=True)
class ProjectionResult:
    """n x 2 projected points plus method metadata.

    explained_variance_ratio is set for PCA only; params carries
    method-specific settings (e.g. perplexity, seed).
    """

    points: np.ndarray
    method: str
    explained_variance_ratio: tuple[float, float] | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError(f"points must be n x 2, got shape {points.shape}")
        if self.method not in ("pca", "tsne"):
            raise ValueError(f"unknown projection method {self.method!r}")
        if self.method == "pca":
            evr = self.explained_variance_ratio
            if evr is None or len(evr) != 2:
                raise ValueError("pca results require two explained-variance ratios")
            if not all(0.0 <= r <= 1.0 for r in evr):
                raise ValueError(f"explained-variance ratios must be in [0, 1], got {evr}")
            if sum(evr) > 1.0 + 1e-12:
                raise ValueError(f"explained-variance ratios sum to {sum(evr)} > 1")
            object.__setattr__(self, "explained_variance_ratio", tuple(float(r) for r in evr))
        object.__setattr__(self, "points", _freeze(points))

    def __len__(self) -> int:
        return self.points.shape[0]
