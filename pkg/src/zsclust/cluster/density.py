"""DBSCAN with the k-distance auto-epsilon heuristic.

Semantics are the classical definition: a core point has at least
min_samples points (itself included) within eps; clusters are the
connected components of core points under eps-reachability; border
points attach to the lowest reachable cluster id; everything else is
an outlier. Components are numbered by their smallest core point, so
output is deterministic for any input order.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ParameterError
from .assignment import OUTLIER, AlgorithmInfo, ClusterAssignment

_CHUNK = 512


def _kth_neighbor_distance(coords: np.ndarray, k: int) -> np.ndarray:
    """Distance to the k-th nearest neighbor, self excluded."""
    n = coords.shape[0]
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        block = cdist(coords[start : start + _CHUNK], coords)
        # Row includes the self distance 0, so index k is the k-th
        # neighbor excluding self.
        out[start : start + block.shape[0]] = np.partition(block, k, axis=1)[:, k]
    return out


def auto_epsilon(coords: np.ndarray, min_samples: int) -> float:
    """Mean distance to the min_samples-th nearest neighbor.

    DBSCAN(m, k) in multiplier notation means
    eps = m * auto_epsilon(coords, k).
    """
    coords = np.asarray(coords, dtype=np.float64)
    if min_samples < 1:
        raise ParameterError("min_samples must be >= 1")
    if coords.shape[0] <= min_samples:
        raise ParameterError(
            f"need more than min_samples={min_samples} points, got {coords.shape[0]}"
        )
    return float(_kth_neighbor_distance(coords, min_samples).mean())


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Root at the smaller index so component representatives
            # are stable.
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def dbscan(coords: np.ndarray, eps: float, min_samples: int) -> ClusterAssignment:
    """Classical DBSCAN on Euclidean distances."""
    coords = np.asarray(coords, dtype=np.float64)
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if min_samples < 1:
        raise ParameterError("min_samples must be >= 1")
    n = coords.shape[0]

    neighbor_counts = np.zeros(n, dtype=np.int64)
    neighbors: list[np.ndarray] = []
    for start in range(0, n, _CHUNK):
        block = cdist(coords[start : start + _CHUNK], coords) <= eps
        neighbor_counts[start : start + block.shape[0]] = block.sum(axis=1)
        for row in block:
            neighbors.append(np.flatnonzero(row))
    core = neighbor_counts >= min_samples

    uf = _UnionFind(n)
    core_idx = np.flatnonzero(core)
    for i in core_idx:
        nb = neighbors[i]
        for j in nb[core[nb]]:
            uf.union(int(i), int(j))

    labels = np.full(n, OUTLIER, dtype=np.int64)
    component_id: dict[int, int] = {}
    for i in core_idx:
        root = uf.find(int(i))
        if root not in component_id:
            component_id[root] = len(component_id)
        labels[i] = component_id[root]

    for i in range(n):
        if core[i]:
            continue
        nb = neighbors[i]
        core_nb = nb[core[nb]]
        if core_nb.size:
            labels[i] = int(labels[core_nb].min())

    assignment = ClusterAssignment(
        labels=labels,
        algorithm=AlgorithmInfo(
            name="dbscan", params={"eps": float(eps), "min_samples": int(min_samples)}
        ),
        diagnostics={"n_core_points": int(core.sum())},
    )
    assignment.check()
    return assignment
