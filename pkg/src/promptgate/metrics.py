"""Binary-classification metrics, model evaluation, and comparison reports."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import EmbeddedDataset, DatasetSplit, EvalReport, _freeze
from .learn import predict_proba

logger = logging.getLogger(__name__)

COMPARISON_FORMATS = ("markdown", "csv", "json")
_COMPARISON_METRICS = ("auc", "precision", "recall", "f1")


@dataclass(frozen=True)
class ScoredSet:
    """True labels paired with classifier scores, for threshold-free metrics."""

    y_true: np.ndarray
    scores: np.ndarray
    ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "y_true", _freeze(np.asarray(self.y_true, dtype=np.int64)))
        object.__setattr__(self, "scores", _freeze(np.asarray(self.scores, dtype=np.float64)))
        if self.y_true.ndim != 1 or self.scores.shape != self.y_true.shape:
            raise ValueError("y_true and scores must be 1-D and the same length")
        if len(self.y_true) == 0:
            raise ValueError("scored set must be non-empty")
        if not np.isin(self.y_true, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not np.isfinite(self.scores).all():
            raise ValueError("scores must be finite")
        if self.scores.min() < 0.0 or self.scores.max() > 1.0:
            raise ValueError("scores must lie in [0, 1]")
        if self.ids and len(self.ids) != len(self.y_true):
            raise ValueError("ids length does not match labels")

    def __len__(self) -> int:
        return len(self.y_true)


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[int, int, int, int]:
    """Confusion counts (tp, fp, tn, fn) with 1 as the positive class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be 1-D and the same length")
    for arr, name in ((y_true, "y_true"), (y_pred, "y_pred")):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must contain only 0 and 1")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return tp, fp, tn, fn


def precision_recall_f1(tp: int, fp: int, tn: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 from confusion counts; 0/0 is defined as 0.0."""
    for name, v in (("tp", tp), ("fp", fp), ("tn", tn), ("fn", fn)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties replaced by the mean rank of the tied group."""
    n = len(scores)
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    is_group_start = np.r_[True, sorted_scores[1:] != sorted_scores[:-1]]
    group_start = np.flatnonzero(is_group_start)
    group_end = np.r_[group_start[1:], n]  # exclusive
    mean_rank = (group_start + group_end + 1) / 2.0  # average of 1-based positions
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(mean_rank, group_end - group_start)
    return ranks


def roc_auc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """ROC AUC via the rank statistic, counting ties as half-concordant.

    Equals the probability that a uniformly random positive outranks a
    uniformly random negative. O(n log n); both classes must be present.
    """
    s = ScoredSet(y_true=y_true, scores=scores)
    n_pos = int(s.y_true.sum())
    n_neg = len(s) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative label")
    ranks = _average_ranks(s.scores)
    pos_rank_sum = float(ranks[s.y_true == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def report_from_scores(
    y_true: np.ndarray,
    scores: np.ndarray,
    threshold: float = 0.5,
    model_tag: str = "",
    provider_tag: str = "",
) -> EvalReport:
    """Full evaluation report from raw scores: confusion at the threshold plus AUC."""
    s = ScoredSet(y_true=y_true, scores=scores)
    y_pred = (s.scores >= threshold).astype(np.int64)
    tp, fp, tn, fn = confusion(s.y_true, y_pred)
    precision, recall, f1 = precision_recall_f1(tp, fp, tn, fn)
    return EvalReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        auc=roc_auc(s.y_true, s.scores),
        precision=precision, recall=recall, f1=f1,
        threshold=threshold, model_tag=model_tag, provider_tag=provider_tag,
    )


def evaluate(
    model,
    dataset: EmbeddedDataset,
    split: DatasetSplit,
    threshold: float = 0.5,
) -> EvalReport:
    """Score the held-out rows of ``split`` and report threshold metrics plus AUC."""
    if split.n != len(dataset):
        raise ValueError(f"split covers {split.n} rows, dataset has {len(dataset)}")
    test_idx = split.test_indices
    scores = predict_proba(model, dataset.matrix[test_idx])
    return report_from_scores(
        dataset.labels[test_idx],
        scores,
        threshold=threshold,
        model_tag=model.family,
        provider_tag=dataset.provider_tag,
    )


def load_scored_csv(path: str | Path) -> ScoredSet:
    """Load externally produced scores from CSV columns ``id,score,label_true``.

    Note: if the scores are hard 0/1 decisions rather than probabilities, the
    AUC computed from them is degenerate (one operating point).
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "score", "label_true"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: header must contain columns {sorted(required)}")
        ids: list[str] = []
        labels: list[int] = []
        scores: list[float] = []
        for row_number, row in enumerate(reader, start=2):
            try:
                scores.append(float(row["score"]))
                labels.append(int(row["label_true"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {row_number}: {exc}") from None
            ids.append(row["id"])
    if not ids:
        raise ValueError(f"{path}: no data rows")
    return ScoredSet(y_true=np.asarray(labels), scores=np.asarray(scores), ids=tuple(ids))


def write_reports(reports: Sequence[EvalReport], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_reports(path: str | Path) -> list[EvalReport]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return [EvalReport.from_dict(item) for item in raw]


def _sorted_reports(reports: Sequence[EvalReport]) -> list[EvalReport]:
    return sorted(reports, key=lambda r: (r.provider_tag, r.model_tag))


def _best_flags(reports: Sequence[EvalReport]) -> dict[str, int]:
    """Index of the best report per metric (first of the tied maxima)."""
    flags = {}
    for metric in _COMPARISON_METRICS:
        values = [getattr(r, metric) for r in reports]
        flags[metric] = int(np.argmax(values))
    return flags


def render_comparison(reports: Sequence[EvalReport], format: str = "markdown") -> str:
    """Render a provider-by-model metric grid with the best value per column flagged.

    Markdown bolds the best value, CSV marks it with a trailing ``*``, JSON
    carries a ``best`` object naming the winning (provider, model) pair.
    """
    if format not in COMPARISON_FORMATS:
        raise ValueError(f"unknown format {format!r}, expected one of {COMPARISON_FORMATS}")
    if not reports:
        raise ValueError("no reports to render")
    rows = _sorted_reports(reports)
    best = _best_flags(rows)

    if format == "json":
        payload = {
            "reports": [r.to_dict() for r in rows],
            "best": {
                metric: {
                    "provider": rows[i].provider_tag,
                    "model": rows[i].model_tag,
                    "value": getattr(rows[i], metric),
                }
                for metric, i in best.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    if format == "csv":
        lines = ["provider,model,auc,precision,recall,f1"]
        for i, r in enumerate(rows):
            cells = [r.provider_tag, r.model_tag]
            for metric in _COMPARISON_METRICS:
                cell = f"{getattr(r, metric):.6f}"
                if best[metric] == i:
                    cell += "*"
                cells.append(cell)
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    lines = [
        "| Provider | Model | AUC | Precision | Recall | F1 |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for i, r in enumerate(rows):
        cells = [r.provider_tag, r.model_tag]
        for metric in _COMPARISON_METRICS:
            cell = f"{getattr(r, metric):.3f}"
            if best[metric] == i:
                cell = f"**{cell}**"
            cells.append(cell)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
