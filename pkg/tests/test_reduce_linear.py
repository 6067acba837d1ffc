import numpy as np
import pytest

from zsclust.errors import ParameterError, ValidationError
from zsclust.reduce import kernel_pca, pca, raw_passthrough, standardize
from zsclust.reduce.linear import rbf_kernel


def test_standardize_two_point_column():
    out = standardize(np.array([[1.0], [3.0]]))
    assert out.mean() == pytest.approx(0.0, abs=1e-15)
    assert out.std() == pytest.approx(1.0, abs=1e-15)
    assert out[0, 0] == -out[1, 0]


def test_standardize_constant_column():
    out = standardize(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
    assert (out[:, 0] == 0.0).all()


def test_standardize_random_matrix():
    rng = np.random.default_rng(1)
    x = rng.normal(loc=3, scale=7, size=(100, 8))
    out = standardize(x)
    assert np.abs(out.mean(axis=0)).max() < 1e-9
    assert np.abs(out.std(axis=0) - 1).max() < 1e-9


def test_standardize_idempotent():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 5))
    once = standardize(x)
    twice = standardize(once)
    assert np.abs(once - twice).max() < 1e-12


def test_standardize_needs_two_rows():
    with pytest.raises(ValidationError):
        standardize(np.ones((1, 3)))


def test_pca_degenerate_line():
    t = np.linspace(-1, 1, 20)
    x = np.c_[t, t]
    space = pca(x, 2)
    direction = space.diagnostics["explained_variance_ratio"]
    assert direction[0] == pytest.approx(1.0, abs=1e-12)
    assert direction[1] == pytest.approx(0.0, abs=1e-12)
    # First direction is (1/sqrt2, 1/sqrt2) after the sign convention.
    recon = space.coords[:, :1] @ np.array([[2**-0.5, 2**-0.5]])
    assert np.allclose(recon, x - x.mean(axis=0), atol=1e-12)


def test_pca_isotropic_ratios():
    # Sample-covariance eigenvalue spread for an isotropic Gaussian is
    # governed by N/D; 2000x10 keeps max/min comfortably under 1.5
    # (500x10 sits at the random-matrix bulk edge ~1.6).
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2000, 10))
    ratios = pca(x, 10).diagnostics["explained_variance_ratio"]
    assert max(ratios) / min(ratios) < 1.5
    assert all(a >= b for a, b in zip(ratios, ratios[1:]))


def test_pca_full_rank_reconstruction():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 6))
    space = pca(x, 6)
    centered = x - x.mean(axis=0)
    # coords = centered V; V orthogonal -> centered = coords V^T.
    v = np.linalg.lstsq(space.coords, centered, rcond=None)[0]
    assert np.abs(space.coords @ v - centered).max() < 1e-8


def test_pca_deterministic_sign():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 4))
    a = pca(x, 3).coords
    b = pca(x, 3).coords
    assert np.array_equal(a, b)
    for j in range(3):
        assert np.ptp(a[:, j]) > 0


def test_pca_target_dim_limit():
    with pytest.raises(ParameterError):
        pca(np.random.default_rng(0).normal(size=(5, 10)), 5)


def test_kpca_small_gamma_matches_pca():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(60, 5))
    x = x - x.mean(axis=0)
    lin = pca(x, 2).coords
    kern = kernel_pca(x, 2, gamma=1e-6).coords
    for j in range(2):
        corr = abs(np.corrcoef(lin[:, j], kern[:, j])[0, 1])
        assert corr > 0.99


def test_kpca_two_points_symmetric():
    coords = kernel_pca(np.array([[0.0, 0.0], [1.0, 1.0]]), 1, gamma=0.5).coords
    assert coords[0, 0] == pytest.approx(-coords[1, 0], abs=1e-12)


def test_rbf_kernel_unit_diagonal():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(10, 3))
    k = rbf_kernel(x, gamma=0.3)
    assert np.allclose(np.diag(k), 1.0, atol=1e-15)
    assert (k <= 1.0 + 1e-15).all()


def test_kpca_gamma_validation():
    with pytest.raises(ParameterError):
        kernel_pca(np.ones((5, 2)), 1, gamma=0.0)


def test_raw_passthrough():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(20, 7)).astype(np.float32)
    space = raw_passthrough(x)
    assert np.array_equal(space.coords, x.astype(np.float64))
    assert space.recipe.method == "raw"
    assert space.diagnostics == {}
