import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

import oracles
from zsclust.errors import (
    DegenerateInputError,
    ParameterError,
    UndefinedMetricError,
)
from zsclust.metrics import (
    MODE_SINGLETONS,
    ContingencyTable,
    ami,
    ari,
    classify_behavior,
    cluster_geometry,
    compute_report,
    contingency,
    expected_mutual_information,
    homogeneity_completeness_v,
    mutual_information,
    purity,
    silhouette,
    species_diagnostics,
    species_fate,
    v_measure,
)


def test_worked_v_measure_value():
    assert abs(v_measure(0.95, 0.50) - 0.655) < 5e-4


def test_perfect_clustering():
    t = contingency([0, 0, 1, 1], ["a", "a", "b", "b"])
    assert np.array_equal(np.sort(t.n_ks, axis=None), [0, 0, 2, 2])
    h, c, v = homogeneity_completeness_v(t)
    assert (h, c, v) == (1.0, 1.0, 1.0)
    assert ami(t) == pytest.approx(1.0, abs=1e-12)
    assert ari(t) == 1.0
    assert purity(t) == 1.0


def test_single_cluster_two_balanced_species():
    t = contingency([0, 0, 0, 0], ["a", "a", "b", "b"])
    h, c, v = homogeneity_completeness_v(t)
    assert h == 0.0
    assert c == 1.0
    assert v == 0.0
    assert abs(ami(t)) < 1e-12
    assert purity(t) == 0.5


def test_contingency_outlier_modes():
    t = contingency([0, -1], ["a", "b"])
    assert t.N == 1
    t2 = contingency([0, -1, -1], ["a", "b", "c"], MODE_SINGLETONS)
    assert t2.N == 3
    assert t2.K == 3
    with pytest.raises(DegenerateInputError):
        contingency([-1, -1], ["a", "b"])
    with pytest.raises(DegenerateInputError):
        contingency([0, 1], ["a"])


def test_oracle_equivalence_sample():
    rng = np.random.default_rng(777)
    for _ in range(40):
        pred, true = oracles.random_partition_pair(rng)
        t = contingency(pred, true)
        h, c, v = homogeneity_completeness_v(t)
        assert abs(h - oracles.homogeneity(pred, true)) <= 1e-10
        assert abs(c - oracles.completeness(pred, true)) <= 1e-10
        assert abs(v - oracles.v_measure(pred, true)) <= 1e-10
        assert abs(mutual_information(t) - oracles.mutual_information(pred, true)) <= 1e-10
        assert abs(ami(t) - oracles.ami(pred, true)) <= 1e-10
        assert abs(ari(t) - oracles.ari(pred, true)) <= 1e-10
        assert abs(purity(t) - oracles.purity(pred, true)) <= 1e-10


def test_emi_brute_force_3x3():
    rng = np.random.default_rng(5)
    pred = [int(v) for v in rng.integers(0, 3, 12)]
    true = [f"s{v}" for v in rng.integers(0, 3, 12)]
    t = contingency(pred, true)
    assert expected_mutual_information(t) == pytest.approx(
        oracles.expected_mi(pred, true), abs=1e-12
    )


def test_ari_pair_counting_case():
    t = ContingencyTable(
        n_ks=np.array([[2, 1], [1, 2]]), cluster_ids=[0, 1], species=["a", "b"]
    )
    pred = [0, 0, 0, 1, 1, 1]
    true = ["a", "a", "b", "a", "b", "b"]
    assert ari(t) == pytest.approx(oracles.ari(pred, true), abs=1e-12)


def test_h_c_duality():
    rng = np.random.default_rng(2)
    for _ in range(20):
        pred, true = oracles.random_partition_pair(rng)
        pred_s = [f"c{p}" for p in pred]
        t1 = contingency(pred, true)
        # Swap roles: clusters become "species" and vice versa.
        true_ids = {s: i for i, s in enumerate(sorted(set(true)))}
        t2 = contingency([true_ids[x] for x in true], pred_s)
        h1, c1, _ = homogeneity_completeness_v(t1)
        h2, c2, _ = homogeneity_completeness_v(t2)
        assert h1 == pytest.approx(c2, abs=1e-12)
        assert c1 == pytest.approx(h2, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_relabeling_invariance(data):
    n = data.draw(st.integers(4, 20))
    pred = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    true = data.draw(
        st.lists(st.sampled_from(["a", "b", "c"]), min_size=n, max_size=n)
    )
    perm = data.draw(st.permutations(list(range(5))))
    renamed = {"a": "x", "b": "y", "c": "z"}
    t1 = contingency(pred, true)
    t2 = contingency([perm[p] for p in pred], [renamed[s] for s in true])
    for fn in (ami, ari, purity):
        assert fn(t1) == pytest.approx(fn(t2), abs=1e-12)
    assert homogeneity_completeness_v(t1)[2] == pytest.approx(
        homogeneity_completeness_v(t2)[2], abs=1e-12
    )


def test_permutation_matrix_contingency():
    t = ContingencyTable(
        n_ks=np.diag([7, 3, 5]), cluster_ids=[0, 1, 2], species=["a", "b", "c"]
    )
    h, c, v = homogeneity_completeness_v(t)
    assert h == c == v == 1.0
    assert ami(t) == pytest.approx(1.0, abs=1e-12)
    assert ari(t) == 1.0
    assert purity(t) == 1.0


def test_ami_bounds_and_self():
    rng = np.random.default_rng(11)
    for _ in range(25):
        pred, true = oracles.random_partition_pair(rng)
        t = contingency(pred, true)
        assert ami(t) <= 1.0 + 1e-12
        if len(set(pred)) == len(pred) > 1:
            # All-singleton marginals force MI = H under any permutation,
            # so self-AMI is the degenerate 0/0 case, reported as 0.
            continue
        t_self = contingency(pred, [f"c{p}" for p in pred])
        assert ami(t_self) == pytest.approx(1.0, abs=1e-9)


def test_silhouette_cases():
    coords = np.array([[0.0, 0], [0.1, 0], [10, 0], [10.1, 0]])
    labels = [0, 0, 1, 1]
    assert silhouette(coords, labels) > 0.9
    assert silhouette(coords, labels) == pytest.approx(
        oracles.silhouette(coords, labels), abs=1e-12
    )

    # a = 0 (identical pair), b > 0 -> s = 1.
    coords2 = np.array([[0.0, 0], [0, 0], [5, 5], [5, 5]])
    assert silhouette(coords2, [0, 0, 1, 1]) == 1.0

    # Label permutation leaves the value unchanged.
    assert silhouette(coords, [1, 1, 0, 0]) == silhouette(coords, labels)

    with pytest.raises(UndefinedMetricError):
        silhouette(coords, [0, 0, 0, 0])
    # Outliers dropped before the cluster-count check.
    with pytest.raises(UndefinedMetricError):
        silhouette(coords, [0, 0, -1, -1])


def test_silhouette_singletons_contribute_zero():
    coords = np.array([[0.0, 0], [0.1, 0], [9.0, 0]])
    val = silhouette(coords, [0, 0, 1])
    assert val == pytest.approx(oracles.silhouette(coords, [0, 0, 1]), abs=1e-12)


def test_species_diagnostics_examples():
    # One pure cluster per species.
    pred = [0] * 10 + [1] * 10
    true = ["a"] * 10 + ["b"] * 10
    diags = {d.species: d for d in species_diagnostics(contingency(pred, true))}
    assert diags["a"].isolation_index == 1.0
    assert diags["a"].effective_cluster_count == 1.0
    assert diags["a"].behavior == "Ideal"

    # One species split into two pure clusters of 50.
    pred = [0] * 50 + [1] * 50
    true = ["a"] * 100
    d = species_diagnostics(contingency(pred, true))[0]
    assert d.isolation_index == pytest.approx(1.0)
    assert d.effective_cluster_count == pytest.approx(2.0)
    assert d.behavior == "Oversplit"

    # 50/50 shared cluster of 100.
    pred = [0] * 100
    true = ["a"] * 50 + ["b"] * 50
    for d in species_diagnostics(contingency(pred, true)):
        assert d.isolation_index == pytest.approx(0.5)
        assert d.effective_cluster_count == pytest.approx(0.5)
        assert d.behavior == "Merged"


def test_species_diagnostics_match_oracle():
    rng = np.random.default_rng(3)
    pred = [int(v) for v in rng.integers(-1, 4, 60)]
    true = [f"s{v}" for v in rng.integers(0, 3, 60)]
    if all(p == -1 for p in pred):
        pred[0] = 0
    diags = species_diagnostics(contingency(pred, true))
    for d in diags:
        assert d.isolation_index == pytest.approx(
            oracles.isolation_index(pred, true, d.species), abs=1e-12
        )
        assert d.effective_cluster_count == pytest.approx(
            oracles.effective_cluster_count(pred, true, d.species), abs=1e-12
        )


def test_ecc_sums_to_cluster_count():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = int(rng.integers(10, 60))
        pred = [int(v) for v in rng.integers(-1, 5, n)]
        true = [f"s{v}" for v in rng.integers(0, 4, n)]
        if all(p == -1 for p in pred):
            pred[0] = 0
        t = contingency(pred, true)
        total = sum(
            d.effective_cluster_count for d in species_diagnostics(t)
        )
        assert abs(total - t.K) <= 1e-9


def test_weighted_ii_identity():
    rng = np.random.default_rng(6)
    pred = [int(v) for v in rng.integers(0, 5, 80)]
    true = [f"s{v}" for v in rng.integers(0, 4, 80)]
    t = contingency(pred, true)
    lhs = sum(
        d.n_clustered * d.isolation_index for d in species_diagnostics(t)
    )
    sizes = t.n_k.astype(float)
    rhs = float(((t.n_ks.astype(float) ** 2).sum(axis=1) / sizes).sum())
    assert abs(lhs - rhs) <= 1e-9


def test_behavior_thresholds():
    assert classify_behavior(0.99, 1.0) == "Ideal"
    assert classify_behavior(0.99, 1.6) == "Oversplit"
    assert classify_behavior(0.5, 1.0) == "Merged"
    assert classify_behavior(0.89, 1.9) == "Mixed"  # multiple + shared clusters
    assert classify_behavior(0.9, 1.2, ii_threshold=0.8) == "Ideal"


def test_species_fate():
    # 40 images, 30 outliers -> Outlier.
    pred = [-1] * 30 + [0] * 10 + [0] * 500
    true = ["rare"] * 40 + ["common"] * 500
    fates = species_fate(pred, true, threshold=150)
    assert fates == {"rare": "Outlier"}

    # All 40 inside a 540-cluster dominated by another species -> Merged.
    pred = [0] * 540
    fates = species_fate(pred, true, threshold=150)
    assert fates == {"rare": "Merged"}

    # Own pure cluster -> OwnCluster.
    pred = [1] * 40 + [0] * 500
    fates = species_fate(pred, true, threshold=150)
    assert fates == {"rare": "OwnCluster"}


def test_cluster_geometry():
    coords = np.array([[0.0, 0], [0.2, -0.2], [3.0, 4.0], [3.0, 4.0]])
    labels = [0, 0, 1, 1]
    true = ["a", "a", "b", "b"]
    geo = {g.cluster: g for g in cluster_geometry(coords, labels, true)}
    assert geo[0].centroid_radius == pytest.approx(np.hypot(0.1, -0.1))
    assert geo[1].centroid_radius == pytest.approx(5.0)
    assert geo[1].homogeneity == 1.0
    with pytest.raises(ParameterError):
        cluster_geometry(np.zeros((4, 3)), labels, true)


def test_cluster_geometry_radius_purity_correlation():
    rng = np.random.default_rng(8)
    coords, labels, true = [], [], []
    # Pure clusters far from origin, mixed clusters near it.
    for c in range(6):
        far = c < 3
        center = rng.normal(size=2)
        center = center / np.linalg.norm(center) * (10.0 if far else 1.0)
        for i in range(20):
            coords.append(center + rng.normal(scale=0.2, size=2))
            labels.append(c)
            true.append(f"sp{c}" if far else f"sp{i % 3}")
    geo = cluster_geometry(np.asarray(coords), labels, true)
    rho = spearmanr(
        [g.centroid_radius for g in geo], [g.homogeneity for g in geo]
    ).statistic
    assert rho > 0


def test_report_assembly_and_json():
    pred = [0, 0, 1, 1, -1, 2]
    true = ["a", "a", "b", "b", "c", "c"]
    coords = np.array([[0, 0], [0, 0.1], [5, 5], [5, 5.1], [9, 9], [2, 2]])
    report = compute_report(pred, true, coords=coords)
    assert report.outlier_ratio == pytest.approx(1 / 6)
    assert report.n_clusters == 3
    obj = json.loads(report.to_json())
    assert list(obj)[:4] == ["homogeneity", "completeness", "v_measure", "mi"]
    assert obj["silhouette"] is not None
    report2 = compute_report(pred, true, coords=coords)
    assert report.to_json() == report2.to_json()


def test_report_silhouette_undefined_flag():
    report = compute_report([0, 0, 0], ["a", "b", "a"], coords=np.zeros((3, 2)))
    assert report.silhouette is None
    assert "silhouette-undefined" in report.flags
