"""Gaussian mixture clustering via EM with full covariances.

Initialization is a seeded k-means (k-means++ seeding, 10 restarts,
best inertia kept). Each M-step adds 1e-6 to covariance diagonals;
EM stops when the mean log-likelihood improves by less than 1e-4 or
after 200 iterations. A covariance whose Cholesky factorization fails
despite regularization raises NumericError naming the component.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .. import rng
from ..errors import NumericError, ParameterError
from .assignment import AlgorithmInfo, ClusterAssignment, canonical_labels

_REG = 1e-6
_TOL = 1e-4
_MAX_ITER = 200
_KMEANS_RESTARTS = 10
_KMEANS_MAX_ITER = 100


@np.errstate(over="ignore", invalid="ignore")
def _kmeans_once(x: np.ndarray, k: int, g: np.random.Generator) -> tuple[np.ndarray, float]:
    n = x.shape[0]
    # k-means++ seeding.
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(g.integers(n))]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j] = x[int(g.integers(n))]
        else:
            r = g.random() * total
            centers[j] = x[min(int(np.searchsorted(np.cumsum(closest), r)), n - 1)]
        closest = np.minimum(closest, ((x - centers[j]) ** 2).sum(axis=1))

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(_KMEANS_MAX_ITER):
        d2 = cdist(x, centers, metric="sqeuclidean")
        new_labels = d2.argmin(axis=1)
        if (new_labels == labels).all():
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = x[mask].mean(axis=0)
            else:
                # Re-seed an empty cluster at the worst-fit point.
                centers[j] = x[int(d2.min(axis=1).argmax())]
    inertia = float(cdist(x, centers, metric="sqeuclidean").min(axis=1).sum())
    return labels, inertia


def _kmeans_init(x: np.ndarray, k: int, seed: int) -> np.ndarray:
    best_labels, best_inertia = None, np.inf
    for restart in range(_KMEANS_RESTARTS):
        g = rng.stream(seed, "gmm-kmeans", str(restart))
        labels, inertia = _kmeans_once(x, k, g)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels


def _estimate(
    x: np.ndarray, resp: np.ndarray
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    n, k = resp.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    with np.errstate(over="ignore", invalid="ignore"):
        means = (resp.T @ x) / nk[:, None]
        covs = []
        for j in range(k):
            diff = x - means[j]
            cov = (resp[:, j][:, None] * diff).T @ diff / nk[j]
            cov.flat[:: cov.shape[0] + 1] += _REG
            covs.append(cov)
    return weights, means, covs


def _log_prob(x: np.ndarray, weights, means, covs) -> np.ndarray:
    """Weighted log densities, shape (N, K)."""
    n, d = x.shape
    k = len(covs)
    out = np.empty((n, k))
    for j in range(k):
        try:
            # check_finite rejects covariances that overflowed to inf/nan.
            chol = linalg.cholesky(covs[j], lower=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericError(
                f"component {j}: covariance matrix singular despite regularization"
            ) from exc
        solved = linalg.solve_triangular(chol, (x - means[j]).T, lower=True)
        maha = (solved**2).sum(axis=0)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        out[:, j] = (
            np.log(weights[j])
            - 0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)
        )
    return out


def gmm(coords: np.ndarray, k: int, seed: int = 42) -> ClusterAssignment:
    """EM-fit mixture; labels are argmax responsibilities, no outliers.

    The per-iteration mean log-likelihood trace is kept in
    diagnostics["log_likelihood_trace"].
    """
    x = np.asarray(coords, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ParameterError("k must be >= 1")
    if n <= k:
        raise ParameterError(f"need more than k={k} points, got {n}")

    init_labels = _kmeans_init(x, k, seed)
    resp = np.zeros((n, k))
    resp[np.arange(n), init_labels] = 1.0

    trace: list[float] = []
    prev_ll = -np.inf
    converged = False
    for _ in range(_MAX_ITER):
        weights, means, covs = _estimate(x, resp)
        log_prob = _log_prob(x, weights, means, covs)
        log_norm = _logsumexp(log_prob)
        ll = float(log_norm.mean())
        trace.append(ll)
        resp = np.exp(log_prob - log_norm[:, None])
        if ll - prev_ll < _TOL:
            converged = True
            break
        prev_ll = ll

    labels = resp.argmax(axis=1).astype(np.int64)
    assignment = ClusterAssignment(
        labels=canonical_labels(labels),
        algorithm=AlgorithmInfo(name="gmm", params={"k": int(k)}, seed=int(seed)),
        diagnostics={
            "log_likelihood_trace": trace,
            "converged": converged,
            "n_iter": len(trace),
        },
    )
    assignment.check()
    return assignment


def gmm_responsibilities(coords: np.ndarray, k: int, seed: int = 42) -> np.ndarray:
    """Final responsibility matrix for property checks."""
    x = np.asarray(coords, dtype=np.float64)
    init_labels = _kmeans_init(x, k, seed)
    resp = np.zeros((x.shape[0], k))
    resp[np.arange(x.shape[0]), init_labels] = 1.0
    prev_ll = -np.inf
    for _ in range(_MAX_ITER):
        weights, means, covs = _estimate(x, resp)
        log_prob = _log_prob(x, weights, means, covs)
        log_norm = _logsumexp(log_prob)
        ll = float(log_norm.mean())
        resp = np.exp(log_prob - log_norm[:, None])
        if ll - prev_ll < _TOL:
            break
        prev_ll = ll
    return resp


def _logsumexp(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))
