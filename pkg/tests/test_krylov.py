import numpy as np
import pytest
import scipy.linalg

from qadvect.krylov import KrylovConvergenceError, expm_multiply_hermitian


def random_hermitian(rng, n, scale=1.0):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (m + m.conj().T) / 2


@pytest.mark.parametrize("n, t", [(5, 0.3), (40, 1.0), (120, 2.5)])
def test_matches_dense_expm(rng, n, t):
    H = random_hermitian(rng, n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    exact = scipy.linalg.expm(-1j * t * H) @ v
    got = expm_multiply_hermitian(lambda x: H @ x, v, t)
    np.testing.assert_allclose(got, exact, atol=1e-11 * np.linalg.norm(v))


def test_restarts_on_large_norm(rng):
    # |tH| ~ 400 cannot converge in one 16-dimensional space.
    H = random_hermitian(rng, 200, scale=20.0)
    v = rng.normal(size=200).astype(complex)
    exact = scipy.linalg.expm(-1j * H) @ v
    got = expm_multiply_hermitian(lambda x: H @ x, v, 1.0, max_dim=16)
    np.testing.assert_allclose(got, exact, atol=1e-9)


def test_invariant_subspace_breakdown():
    H = np.diag([1.0, 2.0, 3.0, 4.0])
    v = np.array([0, 1.0, 0, 0], dtype=complex)
    got = expm_multiply_hermitian(lambda x: H @ x, v, 0.7)
    np.testing.assert_allclose(got, np.exp(-0.7j * 2) * v, atol=1e-15)


def test_zero_vector():
    assert not expm_multiply_hermitian(lambda x: x, np.zeros(3), 1.0).any()


def test_preserves_norm(rng):
    H = random_hermitian(rng, 64)
    v = rng.normal(size=64).astype(complex)
    out = expm_multiply_hermitian(lambda x: H @ x, v, 3.0)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(v), rel=1e-12)


def test_gives_up_after_split_budget(rng):
    H = random_hermitian(rng, 100, scale=50.0)
    with pytest.raises(KrylovConvergenceError):
        expm_multiply_hermitian(lambda x: H @ x, rng.normal(size=100), 10.0, max_dim=3, max_splits=2)
