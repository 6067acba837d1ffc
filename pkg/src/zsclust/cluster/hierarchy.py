"""Agglomerative clustering with Ward linkage.

Nearest-neighbor-chain construction with the Lance-Williams Ward
update, O(N^2) time and memory. Merge heights follow the convention
that two singletons merge at their Euclidean distance; Ward linkage is
reducible, so sorting the chain's merges by height yields a valid
monotone dendrogram.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ParameterError
from .assignment import AlgorithmInfo, ClusterAssignment


def ward_linkage(coords: np.ndarray) -> np.ndarray:
    """Merge list in scipy layout: (id_a, id_b, height, size), heights
    non-decreasing; points are ids 0..N-1, merge t creates id N+t."""
    x = np.asarray(coords, dtype=np.float64)
    n = x.shape[0]
    d = cdist(x, x)
    np.fill_diagonal(d, np.inf)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)

    raw = np.empty((n - 1, 3))
    chain: list[int] = []
    for t in range(n - 1):
        if not chain:
            chain.append(int(np.flatnonzero(active)[0]))
        while True:
            a = chain[-1]
            row = np.where(active, d[a], np.inf)
            row[a] = np.inf
            b = int(row.argmin())
            # On distance ties prefer the reciprocal partner, otherwise
            # equal distances could cycle the chain.
            if len(chain) > 1 and row[chain[-2]] == row[b]:
                b = chain[-2]
            if len(chain) > 1 and b == chain[-2]:
                break
            chain.append(b)
        a = chain.pop()
        b = chain.pop()
        height = d[a, b]
        raw[t] = (min(a, b), max(a, b), height)

        # Lance-Williams Ward update into slot a; b retires. Rounding
        # can push the radicand a hair below zero, hence the clamp.
        sa, sb, sk = size[a], size[b], size
        with np.errstate(invalid="ignore"):
            radicand = (
                (sa + sk) * d[a] ** 2 + (sb + sk) * d[b] ** 2 - sk * height**2
            ) / (sa + sb + sk)
        d2 = np.sqrt(np.maximum(radicand, 0.0))
        d2[~np.isfinite(radicand)] = np.inf
        d[a], d[:, a] = d2, d2
        d[a, a] = np.inf
        size[a] = sa + sb
        active[b] = False
        d[b], d[:, b] = np.inf, np.inf

    # Sort by height and relabel representatives into cluster ids.
    order = np.argsort(raw[:, 2], kind="stable")
    parent = np.arange(n, dtype=np.int64)

    def find(p: int) -> int:
        root = p
        while parent[root] != root:
            root = parent[root]
        while parent[p] != root:
            parent[p], p = root, parent[p]
        return root

    node_of = np.arange(n, dtype=np.int64)
    node_size = np.ones(2 * n - 1, dtype=np.int64)
    merges = np.empty((n - 1, 4))
    for t, e in enumerate(order):
        ra, rb = find(int(raw[e, 0])), find(int(raw[e, 1]))
        na, nb = node_of[ra], node_of[rb]
        merges[t] = (min(na, nb), max(na, nb), raw[e, 2], node_size[na] + node_size[nb])
        node_size[n + t] = node_size[na] + node_size[nb]
        parent[ra] = rb
        node_of[rb] = n + t
    return merges


def cut_linkage(merges: np.ndarray, n: int, k: int) -> np.ndarray:
    """Flat labels from the first N-k merges, contiguous ids in order
    of first appearance."""
    parent = np.arange(n, dtype=np.int64)

    def find(p: int) -> int:
        root = p
        while parent[root] != root:
            root = parent[root]
        while parent[p] != root:
            parent[p], p = root, parent[p]
        return root

    # Node ids in the merge rows are mapped back to a member point so
    # union-find can run over points alone.
    point_of_node = list(range(n)) + [0] * (n - 1)
    for t in range(n - 1):
        point_of_node[n + t] = point_of_node[int(merges[t, 0])]
    for t in range(n - k):
        a = point_of_node[int(merges[t, 0])]
        b = point_of_node[int(merges[t, 1])]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    labels = np.empty(n, dtype=np.int64)
    seen: dict[int, int] = {}
    for i in range(n):
        r = find(i)
        if r not in seen:
            seen[r] = len(seen)
        labels[i] = seen[r]
    return labels


def ward_hierarchical(coords: np.ndarray, k: int) -> ClusterAssignment:
    """Ward agglomeration cut at k clusters; no outliers."""
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    if k < 1 or k > n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    if n == 1 or k == n:
        labels = np.arange(n, dtype=np.int64) if k == n else np.zeros(n, dtype=np.int64)
        return ClusterAssignment(
            labels=labels,
            algorithm=AlgorithmInfo(name="ward", params={"k": int(k)}),
            diagnostics={"merge_heights": []},
        )
    merges = ward_linkage(coords)
    labels = cut_linkage(merges, n, k)
    assignment = ClusterAssignment(
        labels=labels,
        algorithm=AlgorithmInfo(name="ward", params={"k": int(k)}),
        diagnostics={"merge_heights": [float(h) for h in merges[:, 2]]},
    )
    assignment.check()
    return assignment
