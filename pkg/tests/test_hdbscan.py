import numpy as np
import pytest

from zsclust.cluster import hdbscan
from zsclust.errors import ParameterError
from zsclust.metrics import ari, compute_report, contingency
from zsclust.synth import make_blobs


def test_thirty_blobs_recovered():
    x, truth = make_blobs([60] * 30, dim=2, sigma=0.5, min_separation=30.0, seed=21)
    assignment = hdbscan(x, min_cluster_size=15, min_samples=5)
    report = compute_report(assignment.labels, [str(v) for v in truth])
    assert assignment.n_clusters == 30
    assert report.v_measure == pytest.approx(1.0, abs=1e-9)


def test_uniform_noise_mostly_outliers():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 1, size=(500, 2))
    assignment = hdbscan(x, min_cluster_size=50, min_samples=10)
    assert assignment.n_clusters <= 5
    assert assignment.outlier_ratio > 0.5


def test_all_identical_single_cluster():
    x = np.ones((40, 3))
    assignment = hdbscan(x, min_cluster_size=10, min_samples=3)
    assert assignment.n_clusters == 1
    assert assignment.outlier_ratio == 0.0


def test_min_cluster_size_respected():
    x, _ = make_blobs([8, 120, 120], dim=2, sigma=0.4, min_separation=25.0, seed=5)
    assignment = hdbscan(x, min_cluster_size=15, min_samples=5)
    for c in range(assignment.n_clusters):
        assert (assignment.labels == c).sum() >= 15
    # The 8-point blob cannot form a cluster.
    assert assignment.n_clusters == 2


def test_permutation_invariance():
    x, _ = make_blobs([50, 50, 50], dim=2, sigma=0.5, min_separation=20.0, seed=8)
    base = hdbscan(x, 15, 5).labels
    rng = np.random.default_rng(0)
    perm = rng.permutation(x.shape[0])
    permuted = hdbscan(x[perm], 15, 5).labels
    t = contingency(
        [int(v) for v in base[perm]],
        [f"c{int(v)}" for v in permuted],
        outlier_mode="singletons",
    )
    assert ari(t) == pytest.approx(1.0, abs=1e-12)


def test_exact_scale_invariance():
    x, _ = make_blobs([50, 50], dim=3, sigma=0.5, min_separation=15.0, seed=13)
    a = hdbscan(x, 15, 5).labels
    b = hdbscan(x * 7.5, 15, 5).labels
    assert list(a) == list(b)


def test_parameter_checks():
    x = np.zeros((10, 2))
    with pytest.raises(ParameterError):
        hdbscan(x, min_cluster_size=15, min_samples=5)  # N <= mcs
    with pytest.raises(ParameterError):
        hdbscan(np.random.default_rng(0).normal(size=(30, 2)), 1, 5)
