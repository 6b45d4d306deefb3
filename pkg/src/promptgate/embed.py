"""Embedding providers and the tabular embedding cache.

Two providers share one contract (fixed-dimension float64 vectors, one per
text, order-aligned):

  * ``remote``: any OpenAI-compatible ``POST {base_url}/v1/embeddings``
    endpoint, with batching, bounded concurrency, and jittered-exponential
    retries.
  * ``local-hash``: a deterministic signed feature-hash embedder that needs
    no network or model weights, used for tests and offline runs.

Cache file: CSV ``id,source,label,e0,...,e{d-1}`` preceded by a comment line
``# provider=<tag> dim=<d>``. Floats are written as shortest round-trip
decimals, so write-then-read is bit-exact.
"""

from __future__ import annotations

import csv
import logging
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import requests

from .core import EmbeddedDataset, PromptRecord

logger = logging.getLogger(__name__)

PROVIDER_KINDS = ("remote", "local-hash")

_FNV_OFFSET_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Unicode alphanumeric runs (\w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingProviderError(RuntimeError):
    """Embedding backend failure (transport, HTTP, or contract violation)."""


class CacheFormatError(ValueError):
    """Embedding cache file is malformed or inconsistent with its header."""


@dataclass(frozen=True)
class ProviderConfig:
    """Which embedder to use and how to talk to it.

    ``dim`` is the declared vector length; remote responses must match it.
    ``api_key_env`` names the environment variable holding the bearer token
    (empty string sends no auth header).
    """

    kind: str
    model_name: str = ""
    base_url: str = ""
    api_key_env: str = ""
    dim: int = 384
    batch_size: int = 64
    max_in_flight: int = 4
    retry_max_attempts: int = 5
    retry_backoff_s: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}, expected one of {PROVIDER_KINDS}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.kind == "local-hash" and self.dim < 16:
            raise ValueError(f"local-hash dim must be >= 16, got {self.dim}")
        if self.kind == "remote" and not self.base_url:
            raise ValueError("remote provider requires base_url")
        if self.batch_size < 1 or self.max_in_flight < 1:
            raise ValueError("batch_size and max_in_flight must be positive")

    @property
    def tag(self) -> str:
        if self.kind == "local-hash":
            return f"local-hash-{self.dim}"
        return self.model_name or "remote"


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@lru_cache(maxsize=1 << 16)
def _token_buckets(token: str, dim: int) -> tuple[tuple[int, int], ...]:
    """(bucket, sign) pairs for a word token and the char 3-grams of '<token>'."""
    padded = "<" + token + ">"
    features = [token]
    features.extend(padded[i : i + 3] for i in range(len(padded) - 2))
    out = []
    for feat in features:
        h = _fnv1a64(feat.encode("utf-8"))
        sign = -1 if h >> 63 else 1
        out.append((h % dim, sign))
    return tuple(out)


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic signed feature-hash embedding, L2-normalized.

    Lowercase, split on non-alphanumeric; each word token and each character
    3-gram of the boundary-padded word ('<word>') is FNV-1a-64 hashed into
    ``hash % dim`` with sign taken from the hash's top bit. An all-zero
    accumulation (e.g. empty text) stays all-zero. Pure function of
    (text, dim) on every platform.
    """
    if dim < 16:
        raise ValueError(f"dim must be >= 16, got {dim}")
    acc = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        for bucket, sign in _token_buckets(token, dim):
            acc[bucket] += sign
    norm = float(np.linalg.norm(acc))
    if norm > 0.0:
        acc /= norm
    return acc


class RemoteEmbeddingClient:
    """OpenAI-compatible embeddings client with jittered-exponential retry.

    4xx responses fail immediately with the body surfaced; transport errors
    and 5xx responses are retried up to ``retry_max_attempts`` with backoff
    starting at ``retry_backoff_s``.
    """

    def __init__(
        self,
        config: ProviderConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if config.kind != "remote":
            raise ValueError(f"remote client requires a remote provider, got {config.kind!r}")
        self._config = config
        self._session = session or requests.Session()
        self._sleep = sleep
        self._jitter = random.Random()
        self._api_key = ""
        if config.api_key_env:
            self._api_key = os.environ.get(config.api_key_env, "")
            if not self._api_key:
                raise EmbeddingProviderError(
                    f"api key environment variable {config.api_key_env!r} is not set"
                )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        cfg = self._config
        url = cfg.base_url.rstrip("/") + "/v1/embeddings"
        body = {"model": cfg.model_name, "input": list(texts)}
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        last_error = ""
        for attempt in range(1, cfg.retry_max_attempts + 1):
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=30.0)
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code // 100 == 2:
                    return self._parse(resp.json(), len(texts))
                last_error = f"HTTP {resp.status_code}: {resp.text[:500]}"
                if resp.status_code // 100 == 4:
                    raise EmbeddingProviderError(last_error)
            if attempt < cfg.retry_max_attempts:
                delay = cfg.retry_backoff_s * 2 ** (attempt - 1) * self._jitter.uniform(0.5, 1.5)
                logger.warning("embedding attempt %d failed (%s); retrying in %.2fs", attempt, last_error, delay)
                self._sleep(delay)
        raise EmbeddingProviderError(
            f"embedding request failed after {cfg.retry_max_attempts} attempts; last error: {last_error}"
        )

    def _parse(self, payload: dict, n_expected: int) -> np.ndarray:
        try:
            data = payload["data"]
        except (TypeError, KeyError):
            raise EmbeddingProviderError(f"malformed embeddings response: {payload!r}") from None
        if len(data) != n_expected:
            raise EmbeddingProviderError(
                f"expected {n_expected} embeddings, response has {len(data)}"
            )
        rows: list[None | list[float]] = [None] * n_expected
        for item in data:
            idx = item.get("index")
            if not isinstance(idx, int) or not 0 <= idx < n_expected or rows[idx] is not None:
                raise EmbeddingProviderError(f"bad or duplicate response index: {idx!r}")
            rows[idx] = item["embedding"]
        dims = {len(r) for r in rows}
        if len(dims) != 1:
            raise EmbeddingProviderError(f"dimension mismatch across batch: {sorted(dims)}")
        (got_dim,) = dims
        if got_dim != self._config.dim:
            raise EmbeddingProviderError(
                f"provider returned dim {got_dim}, config declares {self._config.dim}"
            )
        matrix = np.asarray(rows, dtype=np.float64)
        if not np.isfinite(matrix).all():
            raise EmbeddingProviderError("response contains non-finite values")
        return matrix


def embed_batch(
    config: ProviderConfig,
    texts: Sequence[str],
    client: RemoteEmbeddingClient | None = None,
) -> np.ndarray:
    """One provider call: one vector per text, order-aligned, shape (n, dim).

    Remote responses are re-ordered by their index field.
    """
    texts = list(texts)
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise ValueError(f"text {i} is empty; embed only validated prompts")
    if not texts:
        return np.zeros((0, config.dim), dtype=np.float64)
    if config.kind == "local-hash":
        return np.stack([hash_embed(t, config.dim) for t in texts])
    if client is None:
        client = RemoteEmbeddingClient(config)
    return client.embed(texts)


def embed_texts(
    config: ProviderConfig,
    texts: Sequence[str],
    client: RemoteEmbeddingClient | None = None,
) -> np.ndarray:
    """Embed arbitrarily many texts by chunking into provider-sized batches."""
    texts = list(texts)
    if not texts:
        return np.zeros((0, config.dim), dtype=np.float64)
    if config.kind == "remote" and client is None:
        client = RemoteEmbeddingClient(config)
    chunks = [
        embed_batch(config, texts[i : i + config.batch_size], client)
        for i in range(0, len(texts), config.batch_size)
    ]
    return np.concatenate(chunks, axis=0)


def _cache_header(provider_tag: str, dim: int) -> list[str]:
    columns = ["id", "source", "label"] + [f"e{i}" for i in range(dim)]
    return [f"# provider={provider_tag} dim={dim}", ",".join(columns)]


def _format_row(rec_id: str, source: str, label: int, vector: np.ndarray) -> list[str]:
    return [rec_id, source, str(int(label))] + [repr(float(v)) for v in vector]


def write_embedding_cache(dataset: EmbeddedDataset, path: str | Path) -> None:
    """Write the full dataset to a cache file (overwrites)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_cache_header(dataset.provider_tag, dataset.dim)[0] + "\n")
        writer = csv.writer(fh)
        writer.writerow(["id", "source", "label"] + [f"e{i}" for i in range(dataset.dim)])
        for i in range(len(dataset)):
            writer.writerow(
                _format_row(dataset.ids[i], dataset.sources[i], dataset.labels[i], dataset.matrix[i])
            )


def read_embedding_cache(path: str | Path) -> EmbeddedDataset:
    """Read a cache file back into an EmbeddedDataset (bit-exact round trip)."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\n")
        m = re.fullmatch(r"# provider=(\S+) dim=(\d+)", first)
        if m is None:
            raise CacheFormatError(f"{path}: missing or malformed cache header line: {first!r}")
        provider_tag, dim = m.group(1), int(m.group(2))
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise CacheFormatError(f"{path}: missing column header") from None
        if columns[:3] != ["id", "source", "label"] or len(columns) != 3 + dim:
            raise CacheFormatError(f"{path}: column header does not match declared dim {dim}")
        ids: list[str] = []
        sources: list[str] = []
        labels: list[int] = []
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            rec_id = row[0] if row else "<unknown>"
            if len(row) != 3 + dim:
                raise CacheFormatError(
                    f"{path}: row {rec_id!r} has {len(row) - 3} embedding values, expected {dim}"
                )
            try:
                label = int(row[2])
                values = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise CacheFormatError(f"{path}: row {rec_id!r} is malformed: {exc}") from None
            ids.append(rec_id)
            sources.append(row[1])
            labels.append(label)
            rows.append(values)
    matrix = (
        np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, dim), dtype=np.float64)
    )
    try:
        return EmbeddedDataset(
            ids=tuple(ids), sources=tuple(sources), labels=np.asarray(labels, dtype=np.int64),
            matrix=matrix, provider_tag=provider_tag,
        )
    except ValueError as exc:
        raise CacheFormatError(f"{path}: {exc}") from None


def _batches(items: list, size: int) -> Iterable[list]:
    for i in range(0, len(items), size):
        yield items[i : i + size]


def embed_corpus(
    config: ProviderConfig,
    records: Sequence[PromptRecord],
    cache_path: str | Path,
) -> EmbeddedDataset:
    """Embed validated, deduplicated records, resuming from the cache by id.

    New rows are appended to the cache as their batches complete, in record
    order; the returned dataset follows the input record order regardless of
    cache row order. Up to ``max_in_flight`` remote batches run concurrently.
    """
    cache_path = Path(cache_path)
    cached: dict[str, np.ndarray] = {}
    if cache_path.exists():
        existing = read_embedding_cache(cache_path)
        if existing.provider_tag != config.tag:
            raise CacheFormatError(
                f"{cache_path}: cache provider {existing.provider_tag!r} "
                f"does not match configured provider {config.tag!r}"
            )
        if existing.dim != config.dim:
            raise CacheFormatError(
                f"{cache_path}: cache dim {existing.dim} does not match configured dim {config.dim}"
            )
        cached = {existing.ids[i]: existing.matrix[i] for i in range(len(existing))}
        logger.info("cache %s: %d rows present", cache_path, len(cached))
    else:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        with open(cache_path, "w", encoding="utf-8", newline="") as fh:
            for line in _cache_header(config.tag, config.dim):
                fh.write(line + "\n")

    missing = [r for r in records if r.id not in cached]
    if missing:
        client = RemoteEmbeddingClient(config) if config.kind == "remote" else None
        batches = list(_batches(missing, config.batch_size))

        def run(batch: list[PromptRecord]) -> np.ndarray:
            return embed_batch(config, [r.text for r in batch], client)

        if config.kind == "remote" and config.max_in_flight > 1:
            executor = ThreadPoolExecutor(max_workers=config.max_in_flight)
            results = executor.map(run, batches)
        else:
            executor = None
            results = map(run, batches)
        try:
            with open(cache_path, "a", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                # executor.map raises here, mid-iteration, if a batch failed;
                # rows for batches that completed first are already on disk.
                for batch, vectors in zip(batches, results):
                    for rec, vec in zip(batch, vectors):
                        cached[rec.id] = vec
                        writer.writerow(_format_row(rec.id, rec.source, rec.label, vec))
        except EmbeddingProviderError as exc:
            first, last = missing[0].id, missing[-1].id
            raise EmbeddingProviderError(
                f"embedding failed within ids {first}..{last}: {exc}"
            ) from exc
        finally:
            if executor is not None:
                executor.shutdown(wait=False, cancel_futures=True)

    if records:
        matrix = np.stack([cached[r.id] for r in records])
    else:
        matrix = np.zeros((0, config.dim), dtype=np.float64)
    return EmbeddedDataset(
        ids=tuple(r.id for r in records),
        sources=tuple(r.source for r in records),
        labels=np.asarray([r.label for r in records], dtype=np.int64),
        matrix=matrix,
        provider_tag=config.tag,
    )
