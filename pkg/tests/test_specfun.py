import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from pdflow import pdcone, specfun
from pdflow.errors import DomainError


def k1_oracle(s, v, w):
    """``int_0^inf y^{s-1} e^{-v y - w / y} dy`` through the Macdonald function."""
    return 2.0 * (w / v) ** (s / 2) * special.kv(s, 2.0 * math.sqrt(v * w))


class TestGamma:
    @pytest.mark.parametrize("s, n", [(2.3, 1), (2.3, 3), (4.1, 2)])
    def test_matches_multigammaln(self, s, n):
        assert specfun.log_gamma_n(s, n) == pytest.approx(special.multigammaln(s, n), rel=1e-13)

    def test_gamma_n_exp(self):
        assert specfun.gamma_n(3.0, 1) == pytest.approx(2.0)

    def test_vector_argument_reduces_to_scalar(self):
        # equal components reduce the generalized Gamma to the scalar one
        s = 2.2
        assert specfun.log_gamma_n(np.array([0.0, s])) == pytest.approx(special.multigammaln(s, 2), rel=1e-12)


class TestPowerFunction:
    def test_final_component_is_determinant_power(self):
        X = pdcone.random_pd(3, np.random.default_rng(0))
        assert specfun.power_fn([0.0, 0.0, 0.7], X) == pytest.approx(np.linalg.det(X) ** 0.7, rel=1e-12)

    def test_tail_sums(self):
        np.testing.assert_allclose(specfun.tail_sums([1.0, 2.0, 3.0]), [6.0, 5.0, 3.0])

    @given(st.integers(0, 5000))
    def test_multiplicative_in_s(self, seed):
        g = np.random.default_rng(seed)
        X = pdcone.random_pd(3, g)
        s, t = g.normal(size=3), g.normal(size=3)
        lhs = specfun.log_power_fn(s + t, X)
        assert lhs == pytest.approx(specfun.log_power_fn(s, X) + specfun.log_power_fn(t, X), abs=1e-9)

    @pytest.mark.parametrize("s", [[0.3, -0.2, 0.5], [1.0, 0.0, -0.4]])
    def test_laplacian_eigenvalue_by_finite_differences(self, s):
        X = pdcone.random_pd(3, np.random.default_rng(1))
        fd = pdcone.laplacian_fd(lambda Z: specfun.power_fn(s, Z), X) / specfun.power_fn(s, X)
        assert fd == pytest.approx(specfun.laplacian_eigenvalue(s), rel=1e-5)

    def test_laplacian_eigenvalue_constant_term(self):
        # p_0 = 1 is harmonic: the constant (n - n^3)/48 cancels sum r_i^2 at s = 0
        for n in (1, 2, 3):
            r = specfun.spectral_parameter(np.zeros(n))
            assert float(np.sum(r**2)) == pytest.approx(-(n - n**3) / 48, abs=1e-12)
            assert specfun.laplacian_eigenvalue(np.zeros(n)) == pytest.approx(0.0, abs=1e-12)

    def test_spherical_function_at_identity(self):
        v, _ = specfun.spherical_h([0.3, -0.2], np.eye(2))
        assert v == pytest.approx(1.0, rel=1e-12)

    def test_grad_log_power_fn(self):
        X = pdcone.random_pd(2, np.random.default_rng(2))
        s = [0.4, -0.3]
        fd = pdcone.matrix_grad_fd(lambda Z: specfun.log_power_fn(s, Z), X)
        np.testing.assert_allclose(specfun.grad_log_power_fn(s, X), fd, rtol=1e-6, atol=1e-8)


class TestBessel:
    @pytest.mark.parametrize("s, v, w", [(0.3, 1.0, 2.0), (-1.2, 0.5, 0.7), (2.0, 3.0, 0.1)])
    def test_n1_matches_macdonald(self, s, v, w):
        val, err = specfun.bessel_K(s, [[v]], [[w]])
        assert val == pytest.approx(k1_oracle(s, v, w), rel=1e-10)
        assert specfun.macdonald_bessel_n1(s, v, w) == pytest.approx(k1_oracle(s, v, w), rel=1e-12)

    def test_bessel_b_n1(self):
        nu, x = 0.5, 2.0
        val, _ = specfun.bessel_B(nu, [[x]])
        assert val == pytest.approx(k1_oracle(nu, x, 1.0), rel=1e-10)

    def test_n2_inversion_symmetry(self):
        V = np.array([[1.0, 0.2], [0.2, 0.8]])
        W = np.array([[0.6, -0.1], [-0.1, 1.3]])
        a, ea = specfun.bessel_K(0.4, V, W)
        b, eb = specfun.bessel_K(-0.4, W, V)
        assert abs(a - b) <= 3 * math.hypot(ea, eb) + 1e-10 * a

    def test_n2_scaling(self):
        # Y -> Y / c gives K(s | cV, W) = c^{-n s} K(s | V, cW)
        V = np.array([[1.0, 0.2], [0.2, 0.8]])
        W = np.array([[0.6, -0.1], [-0.1, 1.3]])
        c, s = 2.0, 0.4
        a, _ = specfun.bessel_K(s, c * V, W)
        b, _ = specfun.bessel_K(s, V, c * W)
        assert a == pytest.approx(c ** (-2 * s) * b, rel=1e-9)

    def test_asymptotic_n1(self):
        # B_nu(z^2 m^2 / 4) ~ sqrt(pi) (2/z)^{nu+1/2} m^{-nu-1/2} e^{-z m}
        nu, m, z = 0.3, 1.2, 60.0
        exact, _ = specfun.bessel_B(nu, [[z * z * m * m / 4]])
        assert specfun.bessel_B_asymptotic(nu, [[m]], z) == pytest.approx(exact, rel=0.02)


class TestCs:
    @pytest.mark.parametrize("s", [[-0.7], [-0.5, -0.6], [-0.2, -0.9]])
    def test_formula_matches_quadrature(self, s):
        q, err = specfun.c_s_quadrature(s)
        assert specfun.c_s_formula(s) == pytest.approx(q, rel=max(10 * err / q, 1e-9))

    def test_n1_is_gamma(self):
        assert specfun.c_s_formula([-0.7]) == pytest.approx(special.gamma(1.4), rel=1e-13)

    def test_divergent(self):
        with pytest.raises(DomainError):
            specfun.c_s_formula([0.3])


class TestWhittaker:
    def test_n1_closed_matches_quadrature(self):
        lam = [0.7, -0.4]
        X = [np.eye(1) * 1.3, np.eye(1) * 0.6]
        a, ea = specfun.whittaker_psi(lam, X, method="closed")
        b, eb = specfun.whittaker_psi(lam, X, method="trapezoid")
        assert a == pytest.approx(b, rel=1e-9)

    def test_single_level(self):
        v, _ = specfun.whittaker_psi([0.7], [np.eye(1) * 1.3])
        assert v == pytest.approx(1.3**0.7, rel=1e-12)

    def test_stade_closed_form(self):
        lam, nu = [0.6, 0.2], [0.9, 0.4]
        v, e = specfun.stade_integral(0.7, 0.6, lam, nu)
        assert v == pytest.approx(specfun.stade_closed_form(0.7, 0.6, lam, nu), rel=1e-9)

    def test_stade_single_level_is_gamma(self):
        v, _ = specfun.stade_integral(0.5, 2.0, [0.6], [0.9])
        assert v == pytest.approx(special.gamma(2.0) * 2.0**2.0, rel=1e-12)

    def test_stade_pair_condition(self):
        with pytest.raises(DomainError):
            specfun.stade_integral(0.5, 1.0, [0.6, -0.8], [0.1, 0.0])

    def test_density_laplace_is_probability_at_zero(self):
        v, e = specfun.whittaker_density_laplace(0.0, [0.6, 0.2], [0.9, 0.4])
        assert v == pytest.approx(1.0, rel=1e-8)

    def test_density_laplace_decreasing(self):
        a, _ = specfun.whittaker_density_laplace(0.5, [0.6, 0.2], [0.9, 0.4])
        b, _ = specfun.whittaker_density_laplace(1.0, [0.6, 0.2], [0.9, 0.4])
        assert 0 < b < a < 1


def test_check_finite():
    from pdflow.errors import EvaluationError

    with pytest.raises(EvaluationError):
        specfun.check_finite(float("nan"), "x")
