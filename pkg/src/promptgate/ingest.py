"""Corpus loading, deduplication, and stratified train/test splitting.

File formats:
  * CSV: header row with at least ``text`` and ``label`` columns
    (``id``/``source`` optional), RFC-4180 quoting, UTF-8.
  * JSONL: one object per line with ``text`` and ``label`` keys
    (``id``/``source`` optional).
  * Manifest: JSON list of {"path", "format": "csv"|"jsonl", "source_tag"}.

Malformed rows (bad JSON, missing text, unknown label value) are reported
with their line numbers, not thrown; a missing or unparseable file is an
error.
"""

from __future__ import annotations

import csv
import json
import logging
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BENIGN, MALICIOUS, DatasetSplit, PromptRecord
from .rng import Xoshiro256StarStar

logger = logging.getLogger(__name__)

FORMATS = ("csv", "jsonl")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    format: str
    source_tag: str

    def __post_init__(self) -> None:
        if not self.path:
            raise ValueError("manifest entry path must be non-empty")
        if not self.source_tag:
            raise ValueError("manifest entry source_tag must be non-empty")
        if self.format not in FORMATS:
            raise ValueError(f"unknown corpus format {self.format!r}, expected one of {FORMATS}")


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]

    @classmethod
    def load(cls, path: str | Path) -> "CorpusManifest":
        """Parse a manifest; relative entry paths resolve against its directory."""
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise ValueError(f"manifest {path} must be a JSON list")
        base = path.parent
        entries = []
        for e in raw:
            entry_path = Path(e["path"])
            if not entry_path.is_absolute():
                entry_path = base / entry_path
            entries.append(
                ManifestEntry(path=str(entry_path), format=e["format"], source_tag=e["source_tag"])
            )
        return cls(tuple(entries))


@dataclass(frozen=True)
class RowError:
    path: str
    line: int
    reason: str


@dataclass(frozen=True)
class DedupSummary:
    removed: int
    label_conflicts: int


def _parse_label(value) -> int | None:
    """Accept 0/1 as int or string; anything else is unknown."""
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value if value in (BENIGN, MALICIOUS) else None
    if isinstance(value, str):
        v = value.strip()
        if v == "0":
            return BENIGN
        if v == "1":
            return MALICIOUS
    return None


def _load_csv(path: Path, source_tag: str) -> tuple[list[PromptRecord], list[RowError]]:
    records: list[PromptRecord] = []
    errors: list[RowError] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: CSV header must include 'text' and 'label' columns")
        for row_number, row in enumerate(reader, start=1):
            text = row.get("text")
            if text is None:
                errors.append(RowError(str(path), row_number, "missing text field"))
                continue
            label = _parse_label(row.get("label"))
            if label is None:
                errors.append(
                    RowError(str(path), row_number, f"unknown label value {row.get('label')!r}")
                )
                continue
            rec_id = (row.get("id") or "").strip() or f"{source_tag}:{row_number}"
            source = (row.get("source") or "").strip() or source_tag
            records.append(PromptRecord(id=rec_id, source=source, text=text, label=label))
    return records, errors


def _load_jsonl(path: Path, source_tag: str) -> tuple[list[PromptRecord], list[RowError]]:
    records: list[PromptRecord] = []
    errors: list[RowError] = []
    with open(path, encoding="utf-8") as fh:
        for row_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(RowError(str(path), row_number, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
                errors.append(RowError(str(path), row_number, "missing text field"))
                continue
            label = _parse_label(obj.get("label"))
            if label is None:
                errors.append(
                    RowError(str(path), row_number, f"unknown label value {obj.get('label')!r}")
                )
                continue
            rec_id = str(obj.get("id") or "").strip() or f"{source_tag}:{row_number}"
            source = str(obj.get("source") or "").strip() or source_tag
            records.append(PromptRecord(id=rec_id, source=source, text=obj["text"], label=label))
    return records, errors


def load_corpus(manifest: CorpusManifest) -> tuple[list[PromptRecord], list[RowError]]:
    """Load every manifest entry, concatenating records in manifest order.

    Records without an explicit id get "<source_tag>:<row_number>" (1-based
    data rows). Raises FileNotFoundError / ValueError for unreadable files;
    per-row problems come back as RowErrors.
    """
    records: list[PromptRecord] = []
    errors: list[RowError] = []
    for entry in manifest.entries:
        path = Path(entry.path)
        if not path.is_file():
            raise FileNotFoundError(f"corpus file not found: {path}")
        loader = _load_csv if entry.format == "csv" else _load_jsonl
        recs, errs = loader(path, entry.source_tag)
        records.extend(recs)
        errors.extend(errs)
        logger.info("loaded %s: %d records, %d row errors", path, len(recs), len(errs))
    return records, errors


def dedup_key(text: str) -> str:
    """Exact-duplicate key: NFC-normalized, whitespace-trimmed, case-sensitive."""
    return unicodedata.normalize("NFC", text).strip()


def deduplicate(records: Sequence[PromptRecord]) -> tuple[list[PromptRecord], DedupSummary]:
    """Drop exact-duplicate texts, keeping the first occurrence (and its label).

    A dropped duplicate whose label disagrees with the kept record counts as
    one label conflict. Idempotent.
    """
    kept: list[PromptRecord] = []
    first_label: dict[str, int] = {}
    removed = 0
    conflicts = 0
    for rec in records:
        key = dedup_key(rec.text)
        if key in first_label:
            removed += 1
            if rec.label != first_label[key]:
                conflicts += 1
        else:
            first_label[key] = rec.label
            kept.append(rec)
    if conflicts:
        logger.warning("deduplicate: %d duplicate(s) had conflicting labels; kept first labels", conflicts)
    return kept, DedupSummary(removed=removed, label_conflicts=conflicts)


def stratified_split(
    records: Sequence[PromptRecord] | Sequence[int] | np.ndarray,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> DatasetSplit:
    """Per-class seeded shuffle, then cut round(test_fraction * class_size) into test.

    Accepts records or a bare label sequence. Benign indices are shuffled
    first, then malicious, on a single generator stream; the first
    round(fraction * n_c) shuffled indices of each class go to test. Index
    arrays come back sorted ascending. Deterministic for fixed (labels, seed).
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labels = np.asarray(
        [r.label if isinstance(r, PromptRecord) else r for r in records], dtype=np.int64
    )
    gen = Xoshiro256StarStar(seed)
    test_parts: list[np.ndarray] = []
    train_parts: list[np.ndarray] = []
    for cls in (BENIGN, MALICIOUS):
        cls_idx = np.flatnonzero(labels == cls)
        if len(cls_idx) < 2:
            raise ValueError(f"class {cls} has {len(cls_idx)} record(s); need at least 2 per class")
        pool = list(cls_idx)
        gen.shuffle(pool)
        n_test = round(test_fraction * len(pool))
        test_parts.append(np.asarray(pool[:n_test], dtype=np.int64))
        train_parts.append(np.asarray(pool[n_test:], dtype=np.int64))
    return DatasetSplit(
        train_indices=np.sort(np.concatenate(train_parts)),
        test_indices=np.sort(np.concatenate(test_parts)),
        seed=seed,
        test_fraction=test_fraction,
    )
