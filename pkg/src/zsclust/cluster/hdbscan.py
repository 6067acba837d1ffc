"""Hierarchical density clustering with condensed-tree extraction.

Pipeline, all in Euclidean space:

1. core distance of each point = distance to its min_samples-th
   nearest neighbor (self excluded);
2. mutual reachability d_m(a, b) = max(core(a), core(b), d(a, b));
3. minimum spanning tree of the complete mutual-reachability graph
   (Prim's algorithm with on-demand rows, O(N^2) time, O(N) memory);
4. single-linkage hierarchy from the sorted MST edges;
5. condensed tree: walking the hierarchy top-down, a split is real
   only when both sides hold at least min_cluster_size points,
   otherwise the small side's points fall out of the current cluster
   at lambda = 1/distance;
6. cluster extraction by maximum stability (excess of mass), the root
   never competing; points outside every selected cluster get -1.

Degenerate rule: when the whole MST has zero weight (all points
coincide under mutual reachability) the dataset is a single cluster.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .assignment import OUTLIER, AlgorithmInfo, ClusterAssignment, canonical_labels
from .density import _kth_neighbor_distance


def _mutual_reachability_mst(
    coords: np.ndarray, core: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prim's MST over the implicit mutual-reachability graph.

    Returns (edge_a, edge_b, weight) arrays of length N-1.
    """
    n = coords.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best_dist = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    edges_a = np.empty(n - 1, dtype=np.int64)
    edges_b = np.empty(n - 1, dtype=np.int64)
    weights = np.empty(n - 1)

    current = 0
    in_tree[0] = True
    for t in range(n - 1):
        d = np.sqrt(((coords - coords[current]) ** 2).sum(axis=1))
        mreach = np.maximum(np.maximum(core, core[current]), d)
        update = (~in_tree) & (mreach < best_dist)
        best_dist[update] = mreach[update]
        best_from[update] = current

        nxt = int(np.where(in_tree, np.inf, best_dist).argmin())
        edges_a[t] = best_from[nxt]
        edges_b[t] = nxt
        weights[t] = best_dist[nxt]
        in_tree[nxt] = True
        current = nxt
    return edges_a, edges_b, weights


def _single_linkage(
    edges_a: np.ndarray, edges_b: np.ndarray, weights: np.ndarray, n: int
) -> np.ndarray:
    """Merge list in scipy linkage layout: (id_a, id_b, height, size).

    Node ids 0..n-1 are points; merge t creates node n+t.
    """
    order = np.argsort(weights, kind="stable")
    parent = np.arange(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    node_of = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)
    merges = np.empty((n - 1, 4))
    for t, e in enumerate(order):
        ra, rb = find(int(edges_a[e])), find(int(edges_b[e]))
        na, nb = node_of[ra], node_of[rb]
        new = n + t
        merges[t] = (na, nb, weights[e], size[na] + size[nb])
        size[new] = size[na] + size[nb]
        parent[ra] = rb
        node_of[rb] = new
    return merges


def _condense(
    merges: np.ndarray, n: int, min_cluster_size: int
) -> tuple[list[dict], np.ndarray]:
    """Condensed tree from the single-linkage hierarchy.

    Returns (clusters, point_cluster): one dict per condensed cluster
    holding parent id, birth lambda, and stability accumulators; per
    point, the condensed cluster it fell out of.
    """
    children = {
        n + t: (int(merges[t, 0]), int(merges[t, 1])) for t in range(n - 1)
    }
    height = {n + t: float(merges[t, 2]) for t in range(n - 1)}
    sizes = np.ones(2 * n - 1, dtype=np.int64)
    for t in range(n - 1):
        sizes[n + t] = int(merges[t, 3])

    def leaves(node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.extend(children[x])
        return out

    clusters: list[dict] = [
        {"parent": -1, "birth": 0.0, "stability": 0.0, "children": []}
    ]
    point_cluster = np.zeros(n, dtype=np.int64)

    root = 2 * n - 2
    stack = [(root, 0)]
    while stack:
        node, cid = stack.pop()
        # Only internal nodes reach the stack: every pushed child has
        # size >= min_cluster_size >= 2.
        left, right = children[node]
        h = height[node]
        lam = np.inf if h == 0.0 else 1.0 / h
        big_l = sizes[left] >= min_cluster_size
        big_r = sizes[right] >= min_cluster_size
        if big_l and big_r:
            for child in (left, right):
                new_id = len(clusters)
                clusters.append(
                    {"parent": cid, "birth": lam, "stability": 0.0, "children": []}
                )
                clusters[cid]["children"].append(new_id)
                clusters[cid]["stability"] += (
                    (lam - clusters[cid]["birth"]) * sizes[child]
                )
                stack.append((child, new_id))
        else:
            for child, big in ((left, big_l), (right, big_r)):
                if big:
                    stack.append((child, cid))
                else:
                    for p in leaves(child):
                        point_cluster[p] = cid
                        clusters[cid]["stability"] += lam - clusters[cid]["birth"]
    return clusters, point_cluster


def _select_excess_of_mass(clusters: list[dict]) -> set[int]:
    """Pick the antichain maximizing total stability; root excluded."""
    selected: set[int] = set()
    value = [0.0] * len(clusters)
    for cid in range(len(clusters) - 1, -1, -1):
        c = clusters[cid]
        child_sum = sum(value[ch] for ch in c["children"])
        if cid == 0:
            value[cid] = child_sum
            continue
        if not c["children"]:
            selected.add(cid)
            value[cid] = c["stability"]
        elif c["stability"] >= child_sum:
            selected.add(cid)
            _deselect_subtree(clusters, cid, selected)
            value[cid] = c["stability"]
        else:
            value[cid] = child_sum
    return selected


def _deselect_subtree(clusters: list[dict], cid: int, selected: set[int]) -> None:
    stack = list(clusters[cid]["children"])
    while stack:
        x = stack.pop()
        selected.discard(x)
        stack.extend(clusters[x]["children"])


def hdbscan(
    coords: np.ndarray, min_cluster_size: int = 15, min_samples: int = 5
) -> ClusterAssignment:
    """Density clustering that extracts the most stable clusters.

    Points not captured by any selected cluster are labeled -1.
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    if min_cluster_size < 2:
        raise ParameterError("min_cluster_size must be >= 2")
    if min_samples < 1:
        raise ParameterError("min_samples must be >= 1")
    if n <= min_cluster_size:
        raise ParameterError(
            f"need more than min_cluster_size={min_cluster_size} points, got {n}"
        )
    if n <= min_samples:
        raise ParameterError(
            f"need more than min_samples={min_samples} points, got {n}"
        )

    core = _kth_neighbor_distance(coords, min_samples)
    edges_a, edges_b, weights = _mutual_reachability_mst(coords, core)

    info = AlgorithmInfo(
        name="hdbscan",
        params={
            "min_cluster_size": int(min_cluster_size),
            "min_samples": int(min_samples),
        },
    )

    if float(weights.max()) == 0.0:
        # All mutual-reachability distances vanish: one cluster.
        labels = np.zeros(n, dtype=np.int64)
        return ClusterAssignment(
            labels=labels, algorithm=info, diagnostics={"degenerate_zero_mst": True}
        )

    merges = _single_linkage(edges_a, edges_b, weights, n)
    clusters, point_cluster = _condense(merges, n, min_cluster_size)
    selected = _select_excess_of_mass(clusters)

    # Nearest selected ancestor (including the fall-out cluster itself).
    resolve: dict[int, int] = {}
    labels = np.full(n, OUTLIER, dtype=np.int64)
    for p in range(n):
        cid = int(point_cluster[p])
        if cid not in resolve:
            walk = cid
            hit = -1
            while walk != -1:
                if walk in selected:
                    hit = walk
                    break
                walk = clusters[walk]["parent"]
            resolve[cid] = hit
        if resolve[cid] != -1:
            labels[p] = resolve[cid]

    assignment = ClusterAssignment(
        labels=canonical_labels(labels),
        algorithm=info,
        diagnostics={
            "n_condensed_clusters": len(clusters) - 1,
            "n_selected": len(selected),
        },
    )
    assignment.check()
    return assignment
