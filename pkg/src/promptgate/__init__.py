"""promptgate: embedding-based prompt-injection detection.

Pipeline: ingest labeled prompt corpora, embed them (remote OpenAI-compatible
API or a deterministic local hash embedder), train from-scratch classifiers
(logistic regression, random forest, gradient-boosted trees), evaluate with
AUC/precision/recall/F1, visualize the embedding space in 2-D (PCA, t-SNE),
and serve the chosen model as an HTTP guardrail endpoint.
"""

from .core import (
    BENIGN,
    MALICIOUS,
    CorpusReject,
    DatasetSplit,
    EmbeddedDataset,
    EvalReport,
    ProjectionResult,
    PromptRecord,
    ValidationSummary,
    validate_corpus,
)
from .embed import (
    CacheFormatError,
    EmbeddingProviderError,
    ProviderConfig,
    embed_batch,
    embed_corpus,
    hash_embed,
    read_embedding_cache,
    write_embedding_cache,
)
from .ingest import (
    CorpusManifest,
    ManifestEntry,
    deduplicate,
    load_corpus,
    stratified_split,
)
from .learn import (
    ForestConfig,
    ForestModel,
    GbtConfig,
    GbtModel,
    LogRegConfig,
    LogRegModel,
    ModelEnvelopeError,
    load_model,
    predict,
    predict_proba,
    save_model,
    train_gbt,
    train_logreg,
    train_random_forest,
)
from .metrics import (
    ScoredSet,
    confusion,
    evaluate,
    load_scored_csv,
    precision_recall_f1,
    render_comparison,
    roc_auc,
)
from .project import (
    TsneConfig,
    emit_scatter,
    knn_preservation,
    pca_project,
    perplexity_sweep,
    stratified_subsample,
    tsne_project,
)
from .serve import DetectionService, ServiceConfig, create_app

__version__ = "0.1.0"

__all__ = [
    "BENIGN",
    "MALICIOUS",
    "PromptRecord",
    "CorpusReject",
    "ValidationSummary",
    "validate_corpus",
    "EmbeddedDataset",
    "DatasetSplit",
    "EvalReport",
    "ProjectionResult",
    "CorpusManifest",
    "ManifestEntry",
    "load_corpus",
    "deduplicate",
    "stratified_split",
    "ProviderConfig",
    "EmbeddingProviderError",
    "CacheFormatError",
    "hash_embed",
    "embed_batch",
    "embed_corpus",
    "read_embedding_cache",
    "write_embedding_cache",
    "LogRegConfig",
    "LogRegModel",
    "train_logreg",
    "ForestConfig",
    "ForestModel",
    "train_random_forest",
    "GbtConfig",
    "GbtModel",
    "train_gbt",
    "ModelEnvelopeError",
    "save_model",
    "load_model",
    "predict",
    "predict_proba",
    "ScoredSet",
    "confusion",
    "precision_recall_f1",
    "roc_auc",
    "evaluate",
    "render_comparison",
    "load_scored_csv",
    "pca_project",
    "TsneConfig",
    "tsne_project",
    "perplexity_sweep",
    "knn_preservation",
    "emit_scatter",
    "stratified_subsample",
    "ServiceConfig",
    "DetectionService",
    "create_app",
    "__version__",
]
