"""2-D projections of embedding spaces: PCA, exact t-SNE, scatter output."""

from .pca import pca_project
from .scatter import SCATTER_FORMATS, emit_scatter, stratified_subsample
from .tsne import (
    PERPLEXITY_MAX,
    PERPLEXITY_MIN,
    SweepEntry,
    TsneConfig,
    conditional_affinities,
    knn_preservation,
    perplexity_sweep,
    tsne_project,
)

__all__ = [
    "pca_project",
    "tsne_project",
    "TsneConfig",
    "conditional_affinities",
    "knn_preservation",
    "perplexity_sweep",
    "SweepEntry",
    "PERPLEXITY_MIN",
    "PERPLEXITY_MAX",
    "emit_scatter",
    "stratified_subsample",
    "SCATTER_FORMATS",
]
