"""UMAP: fuzzy simplicial set construction + negative-sampling SGD.

High-dimensional memberships use the standard smooth-kNN construction:
rho_i is the distance to the nearest neighbor and sigma_i is bisected
until sum_j exp(-max(0, d_ij - rho_i)/sigma_i) = log2(k). Directed
memberships combine by probabilistic union w = a + b - ab. The
low-dimensional similarity 1/(1 + a d^(2b)) gets (a, b) from a
least-squares fit to the piecewise target curve defined by min_dist
and spread. Optimization is stochastic gradient descent with 5
negative samples per positive edge, 500 epochs for N <= 10k, initial
learning rate 1.0 decaying linearly, per-coordinate gradient clipping
at +-4, initialized from PCA rescaled to [-10, 10].

The SGD inner loop runs under numba with a three-word tausworthe
generator seeded from the recipe seed, so results are identical across
platforms for a fixed seed.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np
from scipy import sparse
from scipy.optimize import curve_fit
from scipy.spatial.distance import cdist

from .. import rng
from ..errors import ParameterError
from .base import METHOD_UMAP, ReducedSpace, ReductionRecipe
from .linear import pca_components

_SMOOTH_K_ITERS = 64
_NEGATIVE_SAMPLE_RATE = 5
_INITIAL_ALPHA = 1.0
_REPULSION = 1.0


@lru_cache(maxsize=None)
def fit_similarity_curve(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """(a, b) for 1/(1 + a d^(2b)) fitted to the offset exponential:
    1 for d < min_dist, exp(-(d - min_dist)/spread) beyond."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0.0, spread * 3.0, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def knn_memberships(
    x: np.ndarray, n_neighbors: int
) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray]:
    """Directed membership weights over each point's k nearest
    neighbors, plus (rho, sigma)."""
    n = x.shape[0]
    d = cdist(x, x)
    nn_idx = np.empty((n, n_neighbors), dtype=np.int64)
    nn_dist = np.empty((n, n_neighbors))
    for i in range(n):
        order = np.argsort(d[i], kind="stable")
        picked = order[order != i][:n_neighbors]
        nn_idx[i] = picked
        nn_dist[i] = d[i, picked]

    rho = nn_dist[:, 0].copy()
    target = np.log2(n_neighbors)
    sigma = np.empty(n)
    for i in range(n):
        lo, hi, mid = 0.0, np.inf, 1.0
        adjusted = np.maximum(nn_dist[i] - rho[i], 0.0)
        for _ in range(_SMOOTH_K_ITERS):
            psum = float(np.exp(-adjusted / mid).sum())
            if abs(psum - target) < 1e-5:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if np.isinf(hi) else (lo + hi) / 2.0
        sigma[i] = mid

    vals = np.exp(-np.maximum(nn_dist - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(n), n_neighbors)
    graph = sparse.csr_matrix(
        (vals.ravel(), (rows, nn_idx.ravel())), shape=(n, n)
    )
    return graph, rho, sigma


def fuzzy_union(directed: sparse.csr_matrix) -> sparse.csr_matrix:
    """Probabilistic t-conorm: w = a + b - ab, symmetric."""
    t = directed.T.tocsr()
    return (directed + t - directed.multiply(t)).tocsr()


@numba.njit(cache=True)
def _tau_rand_int(state):
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
    )
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
    )
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
    )
    return state[0] ^ state[1] ^ state[2]


@numba.njit(cache=True)
def _clip(val):
    if val > 4.0:
        return 4.0
    if val < -4.0:
        return -4.0
    return val


@numba.njit(cache=True)
def _optimize_layout(
    embedding,
    head,
    tail,
    epochs_per_sample,
    a,
    b,
    n_epochs,
    rng_state,
    negative_sample_rate,
    initial_alpha,
    repulsion,
):
    n_vertices = embedding.shape[0]
    dim = embedding.shape[1]
    alpha = initial_alpha
    epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    epoch_of_next_sample = epochs_per_sample.copy()

    for n in range(n_epochs):
        for i in range(epochs_per_sample.shape[0]):
            if epoch_of_next_sample[i] > n:
                continue
            j = head[i]
            k = tail[i]
            d2 = 0.0
            for d in range(dim):
                diff = embedding[j, d] - embedding[k, d]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for d in range(dim):
                grad_d = _clip(coeff * (embedding[j, d] - embedding[k, d]))
                embedding[j, d] += grad_d * alpha
                embedding[k, d] -= grad_d * alpha
            epoch_of_next_sample[i] += epochs_per_sample[i]

            n_neg = int(
                (n - epoch_of_next_negative_sample[i]) / epochs_per_negative_sample[i]
            )
            for _ in range(n_neg):
                k2 = _tau_rand_int(rng_state) % n_vertices
                if k2 == j:
                    continue
                d2 = 0.0
                for d in range(dim):
                    diff = embedding[j, d] - embedding[k2, d]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = (2.0 * repulsion * b) / (
                        (0.001 + d2) * (a * d2**b + 1.0)
                    )
                else:
                    coeff = 0.0
                for d in range(dim):
                    if coeff > 0.0:
                        grad_d = _clip(coeff * (embedding[j, d] - embedding[k2, d]))
                    else:
                        grad_d = 4.0
                    embedding[j, d] += grad_d * alpha
            epoch_of_next_negative_sample[i] += (
                n_neg * epochs_per_negative_sample[i]
            )
        alpha = initial_alpha * (1.0 - float(n + 1) / float(n_epochs))
    return embedding


def _epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    n_samples = n_epochs * (weights / weights.max())
    return np.where(n_samples > 0, float(n_epochs) / n_samples, np.inf)


def umap(
    x: np.ndarray,
    target_dim: int = 2,
    n_neighbors: int = 15,
    min_dist: float = 0.1,
    seed: int = 0,
) -> ReducedSpace:
    """Seeded UMAP embedding."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n_neighbors < 2 or n_neighbors >= n:
        raise ParameterError(f"n_neighbors must be in [2, {n - 1}], got {n_neighbors}")
    if min_dist <= 0:
        raise ParameterError("min_dist must be positive")

    graph = fuzzy_union(knn_memberships(x, n_neighbors)[0])
    n_epochs = 500 if n <= 10_000 else 200

    graph = graph.tocoo()
    keep = graph.data >= graph.data.max() / float(n_epochs)
    head = graph.row[keep].astype(np.int64)
    tail = graph.col[keep].astype(np.int64)
    weights = graph.data[keep]
    eps = _epochs_per_sample(weights, n_epochs)

    components = pca_components(x, target_dim)
    init = (x - x.mean(axis=0)) @ components
    scale = np.abs(init).max()
    if scale > 0:
        init = init / scale * 10.0
    embedding = np.ascontiguousarray(init, dtype=np.float64)

    g = rng.stream(seed, "umap-sgd")
    rng_state = (g.integers(1 << 32, size=3).astype(np.int64) | 128)

    a, b = fit_similarity_curve(float(min_dist), 1.0)
    embedding = _optimize_layout(
        embedding,
        head,
        tail,
        eps,
        a,
        b,
        n_epochs,
        rng_state,
        _NEGATIVE_SAMPLE_RATE,
        _INITIAL_ALPHA,
        _REPULSION,
    )
    return ReducedSpace(
        coords=np.asarray(embedding, dtype=np.float64),
        recipe=ReductionRecipe(
            method=METHOD_UMAP,
            target_dim=target_dim,
            seed=seed,
            params={"n_neighbors": int(n_neighbors), "min_dist": float(min_dist)},
        ),
        diagnostics={
            "a": a,
            "b": b,
            "n_epochs": n_epochs,
            "n_edges": int(head.shape[0]),
            "init": "pca",
        },
    )
