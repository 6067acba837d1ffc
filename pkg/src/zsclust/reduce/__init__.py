"""Standardization and the five reduction methods plus raw pass-through.

Every method is deterministic given (input, recipe): PCA-family signs
are pinned by the largest-magnitude-loading convention, t-SNE uses a
deterministic PCA initialization, and UMAP's stochastic optimizer is
driven entirely by the recipe seed.
"""

from .base import (
    METHOD_ISOMAP,
    METHOD_KPCA,
    METHOD_PCA,
    METHOD_RAW,
    METHOD_TSNE,
    METHOD_UMAP,
    ReducedSpace,
    ReductionRecipe,
    apply_recipe,
    raw_passthrough,
)
from .isomap import isomap
from .linear import kernel_pca, pca, standardize
from .tsne import tsne
from .umap import umap

__all__ = [
    "METHOD_ISOMAP",
    "METHOD_KPCA",
    "METHOD_PCA",
    "METHOD_RAW",
    "METHOD_TSNE",
    "METHOD_UMAP",
    "ReducedSpace",
    "ReductionRecipe",
    "apply_recipe",
    "isomap",
    "kernel_pca",
    "pca",
    "raw_passthrough",
    "standardize",
    "tsne",
    "umap",
]
