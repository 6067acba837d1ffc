"""Isomap: geodesic distances on the k-NN graph, then classical MDS."""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial.distance import cdist

from ..errors import NumericError, ParameterError
from .base import METHOD_ISOMAP, ReducedSpace, ReductionRecipe
from .linear import _fix_signs

ON_DISCONNECT_BRIDGE = "bridge"
ON_DISCONNECT_ERROR = "error"


def classical_mds(distances: np.ndarray, target_dim: int) -> np.ndarray:
    """Coordinates whose Euclidean geometry best matches ``distances``.

    B = -1/2 H D^2 H; coordinates are top eigenvectors scaled by
    sqrt(eigenvalue), negative eigenvalues clamped to zero, signs
    pinned like PCA.
    """
    d2 = np.asarray(distances, dtype=np.float64) ** 2
    n = d2.shape[0]
    row_mean = d2.mean(axis=1, keepdims=True)
    b = -0.5 * (d2 - row_mean - row_mean.T + d2.mean())
    try:
        eigvals, eigvecs = linalg.eigh(b)
    except linalg.LinAlgError as exc:
        raise NumericError("MDS eigensolver failed to converge") from exc
    order = np.argsort(eigvals)[::-1][:target_dim]
    vals = np.maximum(eigvals[order], 0.0)
    vecs = _fix_signs(eigvecs[:, order].copy())
    return vecs * np.sqrt(vals)


def _knn_graph(x: np.ndarray, n_neighbors: int) -> csr_matrix:
    """Symmetric k-NN graph weighted by Euclidean length."""
    d = cdist(x, x)
    n = x.shape[0]
    # Column 0 of argsort is the point itself (distance 0).
    nn = np.argsort(d, axis=1, kind="stable")[:, 1 : n_neighbors + 1]
    rows = np.repeat(np.arange(n), n_neighbors)
    cols = nn.ravel()
    vals = d[rows, cols]
    g = csr_matrix((vals, (rows, cols)), shape=(n, n))
    return g.maximum(g.T)


def isomap(
    x: np.ndarray,
    target_dim: int,
    n_neighbors: int = 15,
    seed: int = 0,
    on_disconnect: str = ON_DISCONNECT_BRIDGE,
) -> ReducedSpace:
    """Geodesic embedding of the k-NN graph.

    A disconnected graph either raises (on_disconnect="error") or (the
    default) is repaired by adding the shortest Euclidean edge between
    components, recorded in diagnostics["bridged_edges"].
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n_neighbors < 1 or n_neighbors >= n:
        raise ParameterError(f"n_neighbors must be in [1, {n - 1}], got {n_neighbors}")
    graph = _knn_graph(x, n_neighbors)

    bridged: list[tuple[int, int]] = []
    n_comp, comp = connected_components(graph, directed=False)
    if n_comp > 1 and on_disconnect == ON_DISCONNECT_ERROR:
        raise ParameterError(
            f"k-NN graph has {n_comp} components with n_neighbors={n_neighbors}"
        )
    while n_comp > 1:
        # Add the globally shortest edge between any two components.
        d = cdist(x, x)
        same = comp[:, None] == comp[None, :]
        d[same] = np.inf
        a, b = np.unravel_index(d.argmin(), d.shape)
        a, b = int(a), int(b)
        graph = graph.tolil()
        graph[a, b] = graph[b, a] = d[a, b]
        graph = graph.tocsr()
        bridged.append((min(a, b), max(a, b)))
        n_comp, comp = connected_components(graph, directed=False)

    geodesic = shortest_path(graph, method="D", directed=False)
    coords = classical_mds(geodesic, target_dim)
    return ReducedSpace(
        coords=coords,
        recipe=ReductionRecipe(
            method=METHOD_ISOMAP,
            target_dim=target_dim,
            seed=seed,
            params={"n_neighbors": int(n_neighbors), "on_disconnect": on_disconnect},
        ),
        diagnostics={"bridged_edges": [[int(a), int(b)] for a, b in bridged]},
    )
