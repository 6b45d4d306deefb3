"""Shared test fixtures: the frozen corpus and an embedded copy of it."""

from pathlib import Path

import numpy as np
import pytest

from promptgate.core import EmbeddedDataset, validate_corpus
from promptgate.embed import ProviderConfig, hash_embed
from promptgate.ingest import CorpusManifest, deduplicate, load_corpus, stratified_split

FIXTURE_DIR = Path(__file__).parent / "fixtures"
CORPUS_MANIFEST = FIXTURE_DIR / "corpus" / "manifest.json"


@pytest.fixture(scope="session")
def corpus_records():
    """Validated, deduplicated records from the frozen corpus fixture."""
    records, _ = load_corpus(CorpusManifest.load(CORPUS_MANIFEST))
    kept, _ = deduplicate(validate_corpus(records).accepted)
    return kept


@pytest.fixture(scope="session")
def fixture_dataset(corpus_records):
    """The frozen corpus embedded with the 384-dim local hash provider."""
    provider = ProviderConfig(kind="local-hash", dim=384)
    matrix = np.stack([hash_embed(r.text, provider.dim) for r in corpus_records])
    return EmbeddedDataset(
        ids=tuple(r.id for r in corpus_records),
        sources=tuple(r.source for r in corpus_records),
        labels=np.asarray([r.label for r in corpus_records], dtype=np.int64),
        matrix=matrix,
        provider_tag=provider.tag,
    )


@pytest.fixture(scope="session")
def fixture_split(corpus_records):
    return stratified_split(corpus_records, test_fraction=0.25, seed=42)
