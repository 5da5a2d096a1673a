import numpy as np
import pytest

from hyperdrift.core.pca import covariance, jacobi_eigh, pca_latent_dim


@pytest.mark.parametrize("n", [1, 2, 5, 12])
def test_jacobi_against_lapack(n, rng):
    a = rng.normal(size=(n, n))
    a = a + a.T
    vals, q = jacobi_eigh(a)
    np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-10)
    assert np.linalg.norm(q @ np.diag(vals) @ q.T - a) < 1e-8
    np.testing.assert_allclose(q.T @ q, np.eye(n), atol=1e-10)


def test_covariance_matches_numpy(rng):
    x = rng.normal(size=(50, 4))
    np.testing.assert_allclose(covariance(x), np.cov(x, rowvar=False), atol=1e-12)


def test_line_in_5d_needs_one_component(rng):
    t = rng.normal(size=(200, 1))
    assert pca_latent_dim(t @ rng.normal(size=(1, 5)), 0.7) == 1


def test_isotropic_gaussian(rng):
    x = rng.normal(size=(20000, 4))
    vals, _ = jacobi_eigh(covariance(x))
    share = np.cumsum(vals) / vals.sum()
    expected = int(np.searchsorted(share, 0.7 - 1e-12) + 1)
    assert pca_latent_dim(x, 0.7) == expected == 3


def test_full_variance_counts_positive_eigenvalues(rng):
    x = rng.normal(size=(100, 3)) @ rng.normal(size=(3, 6))
    assert pca_latent_dim(x, 1.0) == 3


def test_constant_data():
    assert pca_latent_dim(np.ones((10, 3)), 0.7) == 1
