"""Standardization, PCA, and RBF kernel PCA."""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from ..errors import NumericError, ParameterError, ValidationError
from .base import METHOD_KPCA, METHOD_PCA, ReducedSpace, ReductionRecipe


def standardize(x: np.ndarray) -> np.ndarray:
    """Column-wise zero mean, unit standard deviation (ddof=0).

    Zero-variance columns map to all-zeros. Idempotent to rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValidationError("standardize needs at least 2 rows")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    out = x - mean
    nonzero = sd > 0
    out[:, nonzero] /= sd[nonzero]
    out[:, ~nonzero] = 0.0
    return out


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each component so its largest-magnitude loading is positive.

    components is (D, d), one column per direction; ties resolve to the
    first index via argmax.
    """
    for j in range(components.shape[1]):
        i = int(np.abs(components[:, j]).argmax())
        if components[i, j] < 0:
            components[:, j] = -components[:, j]
    return components


def pca(x: np.ndarray, target_dim: int, seed: int = 0) -> ReducedSpace:
    """Projection onto the top principal directions of the covariance.

    Explained-variance ratios are reported in non-increasing order;
    the sign convention makes output exactly deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if target_dim > min(n - 1, d):
        raise ParameterError(
            f"target_dim {target_dim} exceeds min(N-1, D) = {min(n - 1, d)}"
        )
    centered = x - x.mean(axis=0)
    try:
        _, singular, vt = linalg.svd(centered, full_matrices=False)
    except linalg.LinAlgError as exc:
        raise NumericError("PCA eigensolver failed to converge") from exc
    components = _fix_signs(vt[:target_dim].T.copy())
    coords = centered @ components
    variances = singular**2 / (n - 1)
    total = float(variances.sum())
    ratios = (variances[:target_dim] / total if total > 0 else variances[:target_dim])
    return ReducedSpace(
        coords=coords,
        recipe=ReductionRecipe(method=METHOD_PCA, target_dim=target_dim, seed=seed),
        diagnostics={
            "explained_variance": [float(v) for v in variances[:target_dim]],
            "explained_variance_ratio": [float(r) for r in ratios],
        },
    )


def pca_components(x: np.ndarray, target_dim: int) -> np.ndarray:
    """Top principal directions (D, target_dim) with pinned signs."""
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0)
    _, _, vt = linalg.svd(centered, full_matrices=False)
    return _fix_signs(vt[:target_dim].T.copy())


def rbf_kernel(x: np.ndarray, gamma: float) -> np.ndarray:
    """Gram matrix K_ij = exp(-gamma * ||x_i - x_j||^2)."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return np.exp(-gamma * cdist(x, x, metric="sqeuclidean"))


def kernel_pca(
    x: np.ndarray, target_dim: int, gamma: float, seed: int = 0
) -> ReducedSpace:
    """Eigenvectors of the double-centered RBF Gram matrix, scaled by
    sqrt(eigenvalue)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if target_dim > min(n - 1, x.shape[1]):
        raise ParameterError(
            f"target_dim {target_dim} exceeds min(N-1, D) = {min(n - 1, x.shape[1])}"
        )
    k = rbf_kernel(x, gamma)
    # Double-centering: H K H with H = I - 1/n.
    row_mean = k.mean(axis=1, keepdims=True)
    k_centered = k - row_mean - row_mean.T + k.mean()
    try:
        eigvals, eigvecs = linalg.eigh(k_centered)
    except linalg.LinAlgError as exc:
        raise NumericError("kernel PCA eigensolver failed to converge") from exc
    order = np.argsort(eigvals)[::-1][:target_dim]
    vals = np.maximum(eigvals[order], 0.0)
    vecs = _fix_signs(eigvecs[:, order].copy())
    coords = vecs * np.sqrt(vals)
    return ReducedSpace(
        coords=coords,
        recipe=ReductionRecipe(
            method=METHOD_KPCA,
            target_dim=target_dim,
            seed=seed,
            params={"gamma": float(gamma)},
        ),
        diagnostics={"eigenvalues": [float(v) for v in vals]},
    )
