"""External validation metrics, per-species diagnostics, and spatial checks.

Everything here is a pure function of a contingency table or of
(coords, labels). Entropies use natural logs; the normalized
quantities are base-invariant. The expected mutual information under
the fixed-marginals permutation model is evaluated exactly with
log-factorials, so it survives contingency tables with thousands of
rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, ParameterError, UndefinedMetricError

OUTLIER = -1

MODE_EXCLUDE = "exclude"
MODE_SINGLETONS = "singletons"

BEHAVIOR_OVERSPLIT = "Oversplit"
BEHAVIOR_MERGED = "Merged"
BEHAVIOR_IDEAL = "Ideal"
BEHAVIOR_MIXED = "Mixed"

FATE_OUTLIER = "Outlier"
FATE_MERGED = "Merged"
FATE_OWN_CLUSTER = "OwnCluster"


@dataclass
class ContingencyTable:
    """Cluster-by-species count matrix with marginals.

    Row k, column s holds the number of images in cluster k belonging
    to species s. Row sums, column sums and the grand total are kept
    alongside.
    """

    n_ks: np.ndarray  # (K, S) int64
    cluster_ids: list[int]
    species: list[str]

    @property
    def n_k(self) -> np.ndarray:
        return self.n_ks.sum(axis=1)

    @property
    def n_s(self) -> np.ndarray:
        return self.n_ks.sum(axis=0)

    @property
    def N(self) -> int:
        return int(self.n_ks.sum())

    @property
    def K(self) -> int:
        return int(self.n_ks.shape[0])

    @property
    def S(self) -> int:
        return int(self.n_ks.shape[1])


def contingency(
    pred_labels: Sequence[int],
    true_labels: Sequence[str],
    outlier_mode: str = MODE_EXCLUDE,
) -> ContingencyTable:
    """Tabulate predicted clusters against ground truth.

    ``exclude`` drops rows labeled -1 before tabulating (the outlier
    ratio is reported separately); ``singletons`` gives each -1 point a
    fresh one-member cluster.
    """
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = list(true_labels)
    if pred.shape[0] != len(true):
        raise DegenerateInputError(
            f"label lengths differ: {pred.shape[0]} vs {len(true)}"
        )
    if outlier_mode not in (MODE_EXCLUDE, MODE_SINGLETONS):
        raise ParameterError(f"unknown outlier_mode {outlier_mode!r}")

    if outlier_mode == MODE_EXCLUDE:
        keep = pred != OUTLIER
        if not keep.any():
            raise DegenerateInputError("every point is an outlier")
        pred = pred[keep]
        true = [t for t, k in zip(true, keep) if k]
    else:
        pred = pred.copy()
        nxt = int(pred.max(initial=-1)) + 1
        for i in np.flatnonzero(pred == OUTLIER):
            pred[i] = nxt
            nxt += 1

    cluster_ids = sorted(set(int(p) for p in pred))
    species = sorted(set(true))
    ci = {c: i for i, c in enumerate(cluster_ids)}
    si = {s: i for i, s in enumerate(species)}
    table = np.zeros((len(cluster_ids), len(species)), dtype=np.int64)
    for p, t in zip(pred, true):
        table[ci[int(p)], si[t]] += 1
    return ContingencyTable(n_ks=table, cluster_ids=cluster_ids, species=species)


def _entropy(counts: np.ndarray, total: int) -> float:
    """H = -sum (c/N) ln(c/N) over non-zero counts."""
    c = counts[counts > 0].astype(np.float64)
    p = c / total
    return float(-(p * np.log(p)).sum())


def _conditional_entropy(n_ks: np.ndarray, marginal: np.ndarray, total: int) -> float:
    """H(rows | columns) when marginal holds the column sums."""
    h = 0.0
    for j in range(n_ks.shape[1]):
        col = n_ks[:, j]
        nz = col[col > 0].astype(np.float64)
        if nz.size:
            h -= float((nz / total * np.log(nz / marginal[j])).sum())
    return h


def v_measure(h: float, c: float) -> float:
    """Harmonic mean of homogeneity and completeness; 0 when both are 0."""
    if h + c == 0.0:
        return 0.0
    return 2.0 * h * c / (h + c)


def homogeneity_completeness_v(table: ContingencyTable) -> tuple[float, float, float]:
    """(h, c, V) with the degenerate conventions h=1 when the species
    partition is trivial and c=1 when the cluster partition is."""
    h_true = _entropy(table.n_s, table.N)
    h_pred = _entropy(table.n_k, table.N)
    # H(G|C): condition species on clusters -> columns are clusters.
    h_g_given_c = _conditional_entropy(table.n_ks.T, table.n_k, table.N)
    h_c_given_g = _conditional_entropy(table.n_ks, table.n_s, table.N)
    h = 1.0 if h_true == 0.0 else 1.0 - h_g_given_c / h_true
    c = 1.0 if h_pred == 0.0 else 1.0 - h_c_given_g / h_pred
    return h, c, v_measure(h, c)


def mutual_information(table: ContingencyTable) -> float:
    """MI = sum_ks (n_ks/N) ln(N n_ks / (n_k n_s))."""
    if table.N < 2:
        raise DegenerateInputError("mutual information needs at least 2 points")
    n_k = table.n_k.astype(np.float64)
    n_s = table.n_s.astype(np.float64)
    N = float(table.N)
    mi = 0.0
    rows, cols = np.nonzero(table.n_ks)
    for k, s in zip(rows, cols):
        n = float(table.n_ks[k, s])
        mi += (n / N) * math.log(N * n / (n_k[k] * n_s[s]))
    return mi


def expected_mutual_information(table: ContingencyTable) -> float:
    """E[MI] under the hypergeometric fixed-marginals model.

    Exact triple sum in log-factorial space:
    sum_k sum_s sum_n (n/N) ln(Nn/(n_k n_s)) *
      n_k! n_s! (N-n_k)! (N-n_s)! / (N! n! (n_k-n)! (n_s-n)! (N-n_k-n_s+n)!)
    """
    n_k = [int(x) for x in table.n_k]
    n_s = [int(x) for x in table.n_s]
    N = table.N
    lg = math.lgamma
    lg_n = lg(N + 1)
    emi = 0.0
    for a in n_k:
        base_a = lg(a + 1) + lg(N - a + 1)
        for b in n_s:
            base = base_a + lg(b + 1) + lg(N - b + 1) - lg_n
            lo = max(1, a + b - N)
            hi = min(a, b)
            for n in range(lo, hi + 1):
                log_p = base - (
                    lg(n + 1) + lg(a - n + 1) + lg(b - n + 1) + lg(N - a - b + n + 1)
                )
                emi += (n / N) * math.log(N * n / (a * b)) * math.exp(log_p)
    return emi


def _ami_parts(table: ContingencyTable) -> tuple[float, float, float, bool]:
    """(mi, emi, denominator, degenerate) for the AMI ratio."""
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    mean_h = 0.5 * (_entropy(table.n_k, table.N) + _entropy(table.n_s, table.N))
    den = mean_h - emi
    return mi, emi, den, abs(den) < 1e-15


def ami(table: ContingencyTable) -> float:
    """Adjusted mutual information with the arithmetic-mean normalizer.

    Identical single-class partitions score 1; other degenerate
    denominators score 0 (flagged in MetricReport).
    """
    if table.K == 1 and table.S == 1:
        return 1.0
    mi, emi, den, degenerate = _ami_parts(table)
    if degenerate:
        return 0.0
    return (mi - emi) / den


def ari(table: ContingencyTable) -> float:
    """Adjusted Rand index from the contingency pair counts."""
    if table.N < 2:
        raise DegenerateInputError("ARI needs at least 2 points")
    comb = math.comb
    sum_cells = sum(comb(int(n), 2) for n in table.n_ks.flat)
    sum_k = sum(comb(int(n), 2) for n in table.n_k)
    sum_s = sum(comb(int(n), 2) for n in table.n_s)
    expected = sum_k * sum_s / comb(table.N, 2)
    maximum = 0.5 * (sum_k + sum_s)
    if maximum == expected:
        # Both partitions are the same trivial partition.
        return 1.0
    return (sum_cells - expected) / (maximum - expected)


def purity(table: ContingencyTable) -> float:
    """Mean plurality fraction: (1/N) sum_k max_s n_ks."""
    return float(table.n_ks.max(axis=1).sum()) / table.N


def silhouette(coords: np.ndarray, labels: Sequence[int]) -> float:
    """Mean silhouette over non-outlier points, Euclidean distances.

    Outlier rows (-1) are dropped before scoring; singleton clusters
    contribute 0. Raises UndefinedMetricError with fewer than two
    clusters remaining. Distance rows are processed in chunks so memory
    stays O(N * chunk + N * K).
    """
    coords = np.asarray(coords, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)
    if coords.shape[0] != lab.shape[0]:
        raise DegenerateInputError("coords and labels lengths differ")
    keep = lab != OUTLIER
    coords, lab = coords[keep], lab[keep]
    uniq = np.unique(lab)
    if uniq.size < 2:
        raise UndefinedMetricError("silhouette needs at least 2 clusters")

    n = coords.shape[0]
    k = uniq.size
    col = np.searchsorted(uniq, lab)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), col] = 1.0
    sizes = onehot.sum(axis=0)

    # cluster_dist[i, c] = summed distance from point i to cluster c.
    cluster_dist = np.empty((n, k))
    chunk = 1024
    for start in range(0, n, chunk):
        block = cdist(coords[start : start + chunk], coords)
        cluster_dist[start : start + block.shape[0]] = block @ onehot

    own_size = sizes[col]
    own_sum = cluster_dist[np.arange(n), col]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = own_sum / np.maximum(own_size - 1, 1)
        mean_other = cluster_dist / sizes[None, :]
        mean_other[np.arange(n), col] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        scores = np.where(denom > 0, (b - a) / denom, 0.0)
    scores[own_size == 1] = 0.0
    return float(scores.mean())


@dataclass
class SpeciesDiagnostics:
    """Isolation index, effective cluster count and the behavior class
    they imply for one species."""

    species: str
    isolation_index: float
    effective_cluster_count: float
    behavior: str
    n_clustered: int

    def to_json_obj(self) -> dict:
        return {
            "species": self.species,
            "isolation_index": self.isolation_index,
            "effective_cluster_count": self.effective_cluster_count,
            "behavior": self.behavior,
            "n_clustered": self.n_clustered,
        }


def classify_behavior(
    ii: float, ecc: float, ii_threshold: float = 0.95, ecc_threshold: float = 1.5
) -> str:
    if ii >= ii_threshold:
        return BEHAVIOR_OVERSPLIT if ecc >= ecc_threshold else BEHAVIOR_IDEAL
    return BEHAVIOR_MIXED if ecc >= ecc_threshold else BEHAVIOR_MERGED


def species_diagnostics(
    table: ContingencyTable,
    ii_threshold: float = 0.95,
    ecc_threshold: float = 1.5,
) -> list[SpeciesDiagnostics]:
    """Per-species isolation index and effective cluster count.

    For species s over non-outlier clusters c:
      isolation_index        = (1/N_s) sum_c n_sc^2 / |c|
      effective_cluster_count = sum_c n_sc / |c|
    with N_s the species' clustered-image count. Species with no
    clustered images never appear in an exclude-mode table, so they are
    absent from the output by construction.
    """
    sizes = table.n_k.astype(np.float64)
    out: list[SpeciesDiagnostics] = []
    for j, sp in enumerate(table.species):
        col = table.n_ks[:, j].astype(np.float64)
        n_s = col.sum()
        if n_s == 0:
            continue
        nz = col > 0
        ii = float((col[nz] ** 2 / sizes[nz]).sum() / n_s)
        ecc = float((col[nz] / sizes[nz]).sum())
        out.append(
            SpeciesDiagnostics(
                species=sp,
                isolation_index=ii,
                effective_cluster_count=ecc,
                behavior=classify_behavior(ii, ecc, ii_threshold, ecc_threshold),
                n_clustered=int(n_s),
            )
        )
    return out


def species_fate(
    pred_labels: Sequence[int],
    true_labels: Sequence[str],
    threshold: int,
) -> dict[str, str]:
    """Outcome of each under-represented species (fewer than ``threshold``
    images): Outlier when a majority of its images are labeled -1,
    Merged when a majority land in clusters where it is not the
    plurality species, OwnCluster otherwise."""
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = list(true_labels)
    counts: dict[str, int] = {}
    for t in true:
        counts[t] = counts.get(t, 0) + 1

    # Plurality species per cluster, over all points.
    comp: dict[int, dict[str, int]] = {}
    for p, t in zip(pred, true):
        if p == OUTLIER:
            continue
        members = comp.setdefault(int(p), {})
        members[t] = members.get(t, 0) + 1
    plur_count = {c: max(d.values()) for c, d in comp.items()}

    fates: dict[str, str] = {}
    for sp, n_sp in counts.items():
        if n_sp >= threshold:
            continue
        n_out = 0
        n_merged = 0
        for p, t in zip(pred, true):
            if t != sp:
                continue
            if p == OUTLIER:
                n_out += 1
            elif comp[int(p)].get(sp, 0) < plur_count[int(p)]:
                n_merged += 1
        if n_out * 2 > n_sp:
            fates[sp] = FATE_OUTLIER
        elif n_merged * 2 > n_sp:
            fates[sp] = FATE_MERGED
        else:
            fates[sp] = FATE_OWN_CLUSTER
    return fates


@dataclass
class ClusterGeometry:
    cluster: int
    size: int
    centroid_radius: float
    homogeneity: float

    def to_json_obj(self) -> dict:
        return {
            "cluster": self.cluster,
            "size": self.size,
            "centroid_radius": self.centroid_radius,
            "homogeneity": self.homogeneity,
        }


def cluster_geometry(
    coords2d: np.ndarray,
    pred_labels: Sequence[int],
    true_labels: Sequence[str],
) -> list[ClusterGeometry]:
    """Per-cluster distance of the centroid from the plot origin and
    plurality species fraction, enabling the radius-vs-purity check."""
    coords2d = np.asarray(coords2d, dtype=np.float64)
    if coords2d.ndim != 2 or coords2d.shape[1] != 2:
        raise ParameterError("cluster_geometry needs 2D coordinates")
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = list(true_labels)
    out: list[ClusterGeometry] = []
    for c in sorted(set(int(p) for p in pred if p != OUTLIER)):
        mask = pred == c
        centroid = coords2d[mask].mean(axis=0)
        members = [t for t, m in zip(true, mask) if m]
        top = max(members.count(s) for s in set(members))
        out.append(
            ClusterGeometry(
                cluster=c,
                size=int(mask.sum()),
                centroid_radius=float(np.hypot(*centroid)),
                homogeneity=top / len(members),
            )
        )
    return out


@dataclass
class MetricReport:
    """Every external metric plus per-species diagnostics for one run."""

    homogeneity: float
    completeness: float
    v_measure: float
    mi: float
    ami: float
    ari: float
    purity: float
    silhouette: Optional[float]
    outlier_ratio: float
    n_clusters: int
    per_species: list[SpeciesDiagnostics] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
            "v_measure": self.v_measure,
            "mi": self.mi,
            "ami": self.ami,
            "ari": self.ari,
            "purity": self.purity,
            "silhouette": self.silhouette,
            "outlier_ratio": self.outlier_ratio,
            "n_clusters": self.n_clusters,
            "per_species": [d.to_json_obj() for d in self.per_species],
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())


def compute_report(
    pred_labels: Sequence[int],
    true_labels: Sequence[str],
    coords: Optional[np.ndarray] = None,
    outlier_mode: str = MODE_EXCLUDE,
    ii_threshold: float = 0.95,
    ecc_threshold: float = 1.5,
) -> MetricReport:
    """Assemble the full MetricReport for one clustering run.

    The silhouette is computed in whatever space ``coords`` lives in
    (the space that was clustered); it is null when coords are absent
    or fewer than two clusters remain.
    """
    pred = np.asarray(pred_labels, dtype=np.int64)
    n_total = pred.shape[0]
    outlier_ratio = float((pred == OUTLIER).sum()) / n_total if n_total else 0.0
    table = contingency(pred, true_labels, outlier_mode)
    h, c, v = homogeneity_completeness_v(table)
    mi = mutual_information(table)
    flags: list[str] = []
    if table.K == 1 and table.S == 1:
        ami_val = 1.0
    else:
        mi_, emi, den, degenerate = _ami_parts(table)
        if degenerate:
            ami_val = 0.0
            flags.append("ami-degenerate-denominator")
        else:
            ami_val = (mi_ - emi) / den
    sil: Optional[float] = None
    if coords is not None:
        try:
            sil = silhouette(coords, pred)
        except UndefinedMetricError:
            flags.append("silhouette-undefined")
    n_clusters = len([c_ for c_ in set(int(p) for p in pred) if c_ != OUTLIER])
    return MetricReport(
        homogeneity=h,
        completeness=c,
        v_measure=v,
        mi=mi,
        ami=ami_val,
        ari=ari(table),
        purity=purity(table),
        silhouette=sil,
        outlier_ratio=outlier_ratio,
        n_clusters=n_clusters,
        per_species=species_diagnostics(table, ii_threshold, ecc_threshold),
        flags=flags,
    )
