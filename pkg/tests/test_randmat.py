import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from pdflow import randmat
from pdflow.errors import ParameterError
from pdflow.randmat import RngStream


def mean_z(samples, reference):
    """Largest entrywise |z| of a sample mean of matrices against ``reference``."""
    m = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
    se = np.where(se > 0, se, np.inf)
    return float(np.max(np.abs(m - reference) / se))


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(5, 2).generator().standard_normal(4)
        b = RngStream(5, 2).generator().standard_normal(4)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(5, 1).generator().standard_normal(4)
        b = RngStream(5, 2).generator().standard_normal(4)
        assert not np.allclose(a, b)

    def test_child_is_distinct(self):
        s = RngStream(3, 0)
        assert s.child(0) != s.child(1)
        assert str(s) == "seed=3:stream=0"


class TestHaar:
    def test_orthogonal(self):
        Q = randmat.sample_haar_orthogonal(4, RngStream(1), size=50)
        np.testing.assert_allclose(Q @ np.swapaxes(Q, -1, -2), np.broadcast_to(np.eye(4), Q.shape), atol=1e-12)

    def test_mean_zero(self):
        Q = randmat.sample_haar_orthogonal(3, RngStream(2), size=4000)
        assert mean_z(Q, np.zeros((3, 3))) < 4.0

    def test_both_determinant_signs(self):
        d = np.linalg.det(randmat.sample_haar_orthogonal(3, RngStream(3), size=200))
        assert np.any(d > 0) and np.any(d < 0)


class TestWishart:
    @pytest.mark.parametrize("p", [3.0, 4.5])
    def test_mean(self, p):
        sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
        W = randmat.sample_wishart(sigma, p, RngStream(4), size=8000)
        assert mean_z(W, p * sigma) < 4.0

    def test_n1_is_scaled_chi_square(self):
        W = randmat.sample_wishart(np.eye(1) * 0.5, 3.3, RngStream(5), size=4000)[:, 0, 0]
        assert stats.kstest(W, stats.chi2(3.3, scale=0.5).cdf).pvalue > 0.01

    def test_inverse_wishart_mean(self):
        sigma = np.eye(2)
        p = 7.0
        V = randmat.sample_inverse_wishart(sigma, p, RngStream(6), size=8000)
        assert mean_z(V, np.linalg.inv(sigma) / (p - 2 - 1)) < 4.0

    def test_degrees_of_freedom_checked(self):
        with pytest.raises(ParameterError):
            randmat.sample_wishart(np.eye(3), 1.5, RngStream(0))

    def test_single_draw_shape(self):
        assert randmat.sample_wishart(np.eye(2), 3, RngStream(0)).shape == (2, 2)


class TestKernelPi:
    def test_mean(self):
        # Wishart(I/2, 2a) has mean a I, so the kernel has mean a X
        X = np.array([[2.0, 0.4], [0.4, 1.0]])
        Y = randmat.sample_kernel_pi(1.7, X, RngStream(7), size=8000)
        assert mean_z(Y, 1.7 * X) < 4.0

    def test_parameter_range(self):
        with pytest.raises(ParameterError):
            randmat.sample_kernel_pi(0.2, np.eye(3), RngStream(0))


class TestMatrixGig:
    def test_scalar_law_matches_scipy(self):
        nu, a, b = 0.8, 1.5, 0.7
        chain = randmat.sample_matrix_gig(nu, a * np.eye(1), b * np.eye(1), RngStream(8), n_samples=3000, thin=20)
        x = chain.samples[:, 0, 0]
        ref = stats.geninvgauss(nu, 2 * math.sqrt(a * b), scale=math.sqrt(b / a))
        se = x.std(ddof=1) / math.sqrt(chain.ess)
        assert abs(x.mean() - ref.mean()) / se < 4.0
        assert not chain.warning

    def test_log_target_matches_density_n1(self):
        nu, a, b, x = 0.8, 1.5, 0.7, 1.3
        S = np.array([[math.log(x)]])
        # density in log coordinates: x^nu e^{-ax-b/x}
        expected = nu * math.log(x) - a * x - b / x
        assert randmat.gig_log_target(S, nu, a * np.eye(1), b * np.eye(1)) == pytest.approx(expected, rel=1e-12)

    def test_exp_jacobian_n1(self):
        assert randmat.log_exp_jacobian(np.array([0.7])) == pytest.approx(0.7)


def test_effective_sample_size_iid():
    x = np.random.default_rng(0).standard_normal(4000)
    assert 3000 < randmat.effective_sample_size(x) < 5500


def test_effective_sample_size_ar1():
    g = np.random.default_rng(1)
    x = np.zeros(20000)
    for k in range(1, x.size):
        x[k] = 0.9 * x[k - 1] + g.standard_normal()
    # AR(1) with coefficient r has ESS ratio (1 - r)/(1 + r)
    assert randmat.effective_sample_size(x) / x.size == pytest.approx(0.1 / 1.9, rel=0.35)


@given(st.integers(0, 1000), st.integers(1, 3))
def test_wishart_draws_are_pd(seed, n):
    W = randmat.sample_wishart(np.eye(n), n + 0.5, RngStream(seed), size=5)
    assert np.all(np.linalg.eigvalsh(W) > 0)
