import numpy as np
import pytest

from zsclust.errors import ParameterError
from zsclust.metrics import silhouette
from zsclust.reduce import standardize, tsne
from zsclust.reduce.tsne import (
    joint_probabilities,
    kl_and_grad,
    similarity_matrix,
)
from zsclust.synth import make_blobs


def test_kl_decreases():
    x, _ = make_blobs([50, 50, 50], dim=8, sigma=0.6, min_separation=15.0, seed=1)
    space = tsne(standardize(x), perplexity=20, seed=0)
    d = space.diagnostics
    assert d["kl_final"] < d["kl_init"]
    assert d["kl_final"] < d["kl_post_exaggeration"]


def test_p_and_q_are_distributions():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(80, 6))
    p = joint_probabilities(x, 15)
    assert abs(p.sum() - 1.0) < 1e-9
    assert (p >= 0).all()
    q = similarity_matrix(rng.normal(size=(80, 2)))
    assert abs(q.sum() - 1.0) < 1e-9
    assert (np.diag(q) == 0).all()


def test_conditional_perplexity_hits_target():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(60, 5))
    from zsclust.reduce.tsne import _pairwise_sq, conditional_probabilities

    perplexity = 12.0
    p = conditional_probabilities(_pairwise_sq(x), perplexity)
    for i in range(60):
        row = p[i][p[i] > 0]
        h = -(row * np.log(row)).sum()
        assert abs(h - np.log(perplexity)) < 2e-5


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10, 4))
    p = joint_probabilities(x, 2.5)
    y = rng.normal(size=(10, 2))
    _, grad = kl_and_grad(p, y)
    h = 1e-6
    num = np.zeros_like(y)
    for i in range(10):
        for k in range(2):
            yp, ym = y.copy(), y.copy()
            yp[i, k] += h
            ym[i, k] -= h
            num[i, k] = (kl_and_grad(p, yp)[0] - kl_and_grad(p, ym)[0]) / (2 * h)
    rel = np.abs(grad - num) / np.maximum(np.abs(num), 1e-12)
    assert rel.max() < 1e-4


def test_blob_separation_in_2d():
    x, truth = make_blobs([100, 100, 100], dim=10, sigma=0.5,
                          min_separation=20.0, seed=4)
    space = tsne(standardize(x), perplexity=30, seed=0)
    assert silhouette(space.coords, [int(v) for v in truth]) > 0.5


def test_deterministic():
    x, _ = make_blobs([40, 40], dim=6, sigma=0.5, min_separation=10.0, seed=5)
    xs = standardize(x)
    a = tsne(xs, perplexity=10, seed=3).coords
    b = tsne(xs, perplexity=10, seed=3).coords
    assert np.array_equal(a, b)


def test_perplexity_validation():
    x = np.random.default_rng(6).normal(size=(50, 4))
    with pytest.raises(ParameterError):
        tsne(x, perplexity=20)  # needs N > 3 * perplexity
    with pytest.raises(ParameterError):
        tsne(x, perplexity=0)


def test_converged_gradient_below_step():
    x, _ = make_blobs([40, 40], dim=5, sigma=0.5, min_separation=12.0, seed=7)
    space = tsne(standardize(x), perplexity=12, seed=0)
    d = space.diagnostics
    assert d["grad_norm_final"] < max(d["step_norm_final"], 1e-12) or (
        d["grad_norm_final"] < 1e-10
    )
