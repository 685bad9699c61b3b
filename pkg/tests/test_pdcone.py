import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdflow import pdcone
from pdflow.errors import NotPositiveDefiniteError


def pd_matrix(seed, n, spread=0.5):
    return pdcone.random_pd(n, np.random.default_rng(seed), spread)


class TestValidation:
    def test_as_pd_accepts_pd(self):
        X = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_array_equal(pdcone.as_pd(X), X)

    def test_as_pd_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            pdcone.as_pd(np.diag([1.0, -1.0]))

    def test_as_pd_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            pdcone.as_pd(np.array([[1.0, 0.3], [0.0, 1.0]]))

    def test_is_pd(self):
        assert pdcone.is_pd(np.eye(3))
        assert not pdcone.is_pd(np.zeros((2, 2)))


class TestSpectralFunctions:
    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_sqrt_squares_back(self, n):
        X = pd_matrix(n, n)
        r = pdcone.sqrt_pd(X)
        np.testing.assert_allclose(r @ r, X, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(pdcone.inv_sqrt_pd(X) @ r, np.eye(n), atol=1e-12)

    def test_pow_half_is_sqrt(self):
        X = pd_matrix(5, 3)
        np.testing.assert_allclose(pdcone.pow_pd(X, 0.5), pdcone.sqrt_pd(X), rtol=1e-12)

    def test_log_exp_roundtrip(self):
        X = pd_matrix(6, 3, 1.0)
        np.testing.assert_allclose(pdcone.expm_sym(pdcone.logm_pd(X)), X, rtol=1e-11)

    def test_logdet_and_etr(self):
        X = pd_matrix(7, 3)
        assert pdcone.logdet(X) == pytest.approx(np.linalg.slogdet(X)[1], rel=1e-12)
        assert pdcone.etr(X) == pytest.approx(np.exp(np.trace(X)), rel=1e-12)

    def test_eig_sym_descending(self):
        e = pdcone.eig_sym(np.diag([1.0, 3.0, 2.0]))
        np.testing.assert_allclose(e.values, [3.0, 2.0, 1.0])

    def test_invariant_density(self):
        X = np.diag([2.0, 0.5, 4.0])
        assert pdcone.invariant_density(X) == pytest.approx(4.0 ** -2.0)

    def test_leading_minors(self):
        X = np.array([[2.0, 1.0], [1.0, 3.0]])
        np.testing.assert_allclose(pdcone.leading_minors(X), [2.0, 5.0])


class TestMeans:
    def test_quadratic_mean_solves_equation(self):
        X, Y = pd_matrix(1, 3), pd_matrix(2, 3)
        A = pdcone.solve_quadratic_mean(X, Y)
        np.testing.assert_allclose(A @ X @ A, Y, rtol=1e-10, atol=1e-12)
        assert pdcone.is_pd(A)

    def test_geometric_mean_commuting(self):
        A, B = np.diag([1.0, 4.0]), np.diag([9.0, 1.0])
        np.testing.assert_allclose(pdcone.geometric_mean(A, B), np.diag([3.0, 2.0]), rtol=1e-12)

    def test_geometric_mean_symmetric(self):
        A, B = pd_matrix(3, 3), pd_matrix(4, 3)
        np.testing.assert_allclose(pdcone.geometric_mean(A, B), pdcone.geometric_mean(B, A), rtol=1e-10)


class TestBatch:
    def test_inv_batch(self, rng):
        X = np.stack([pdcone.random_pd(3, rng) for _ in range(5)])
        np.testing.assert_allclose(pdcone.inv_batch(X), np.linalg.inv(X), rtol=1e-10)

    def test_inv_batch_2x2(self, rng):
        X = np.stack([pdcone.random_pd(2, rng) for _ in range(5)])
        np.testing.assert_allclose(pdcone.inv_batch(X), np.linalg.inv(X), rtol=1e-10)

    def test_factor_batch_reconstructs(self, rng):
        X = np.stack([pdcone.random_pd(3, rng) for _ in range(4)])
        F = pdcone.factor_batch(X)
        np.testing.assert_allclose(F @ np.swapaxes(F, -1, -2), X, rtol=1e-10)

    def test_factor_batch_near_singular(self):
        # Cholesky fails at this conditioning; the eigen fallback still factors
        X = np.diag([1.0, 1e-18])[None]
        F = pdcone.factor_batch(X)
        assert np.all(np.isfinite(F))
        np.testing.assert_allclose((F @ np.swapaxes(F, -1, -2))[0, 0, 0], 1.0, rtol=1e-12)

    def test_expm_batch(self, rng):
        from scipy.linalg import expm
        A = rng.standard_normal((3, 3, 3)) * 0.3
        np.testing.assert_allclose(pdcone.expm_batch(A), np.stack([expm(a) for a in A]), rtol=1e-10)

    def test_min_eig_batch(self):
        X = np.stack([np.diag([3.0, 0.5]), np.diag([2.0, 2.0])])
        np.testing.assert_allclose(pdcone.min_eig_batch(X), [0.5, 2.0])


class TestFiniteDifferences:
    def test_laplacian_log_det_is_zero(self):
        # d log|X| = X^{-1}, so X d log|X| = I is constant
        X = pd_matrix(8, 3)
        assert abs(pdcone.laplacian_fd(pdcone.logdet, X)) < 1e-5

    def test_laplacian_of_trace(self):
        X = pd_matrix(9, 3)
        got = pdcone.laplacian_fd(np.trace, X)
        assert got == pytest.approx(2.0 * np.trace(X), rel=1e-5)

    def test_matrix_grad_of_trace_ax(self):
        X, A = pd_matrix(10, 2), pd_matrix(11, 2)
        np.testing.assert_allclose(pdcone.matrix_grad_fd(lambda Z: np.trace(A @ Z), X), A, rtol=1e-6)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_congruence_logdet(seed, n):
    g = np.random.default_rng(seed)
    X = pdcone.random_pd(n, g)
    a = g.standard_normal((n, n)) + 2 * np.eye(n)
    Y = pdcone.congruence(X, a)
    assert pdcone.is_pd(Y)
    np.testing.assert_allclose(pdcone.logdet(Y), pdcone.logdet(X) + 2 * np.log(abs(np.linalg.det(a))), atol=1e-8)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_geometric_mean_determinant(seed, n):
    g = np.random.default_rng(seed)
    A, B = pdcone.random_pd(n, g), pdcone.random_pd(n, g)
    M = pdcone.geometric_mean(A, B)
    np.testing.assert_allclose(pdcone.logdet(M), 0.5 * (pdcone.logdet(A) + pdcone.logdet(B)), atol=1e-9)
