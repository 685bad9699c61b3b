import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdflow import sde
from pdflow.errors import ParameterError
from pdflow.randmat import RngStream


def z(x, mean):
    x = np.asarray(x, dtype=float)
    return (x.mean() - mean) / (x.std(ddof=1) / math.sqrt(x.size))


class TestSystemSpec:
    def test_burke_hypothesis(self):
        with pytest.raises(ParameterError, match=r"requires 2\(λ−ν\)>n−1"):
            sde.SystemSpec(sde.SystemKind.BURKE_PAIR, 2, nu=1.0, lam=(1.0,))

    def test_burke_valid(self):
        spec = sde.SystemSpec("BURKE_PAIR", 1, nu=-1.0, lam=(1.0,))
        assert spec.n_particles == 2
        assert spec.kind is sde.SystemKind.BURKE_PAIR

    def test_chain_needs_drifts(self):
        with pytest.raises(ParameterError):
            sde.SystemSpec("CHAIN", 1)

    def test_particle_counts(self):
        assert sde.SystemSpec("CHAIN", 1, nus=(1.0, 0.5, 0.2)).n_particles == 3
        assert sde.SystemSpec("TRIANGULAR", 1, lam=(0.5, -0.3)).n_particles == 3
        assert sde.SystemSpec("BESSEL_TRIPLE", 2).n_particles == 3

    def test_noise_kinds(self):
        assert sde.SystemSpec("MY_PAIR", 1, nu=1.0).noise_kinds == ["delta", "none"]
        assert sde.SystemSpec("NRW", 2).noise_kinds == ["omega"]

    def test_triangular_index(self):
        assert [sde.triangular_index(1, 1), sde.triangular_index(2, 1), sde.triangular_index(2, 2)] == [0, 1, 2]


class TestStepperConfig:
    def test_defaults(self):
        c = sde.StepperConfig()
        assert c.h == 1e-3 and c.scheme is sde.Scheme.SPLIT_MULTIPLICATIVE

    def test_rejects_bad_step(self):
        with pytest.raises(ParameterError):
            sde.StepperConfig(h=0.0)


class TestSimulate:
    def test_zero_horizon_returns_initial_state(self):
        X0 = np.array([[[2.0, 0.1], [0.1, 1.0]]])
        s = sde.simulate(sde.SystemSpec("DOOB_BM", 2, nu=1.0), X0, 0.0, RngStream(0), n_paths=3)
        assert s.states.shape == (1, 3, 1, 2, 2)
        np.testing.assert_array_equal(s.terminal[:, 0], np.broadcast_to(X0[0], (3, 2, 2)))

    def test_deterministic_given_seed(self):
        spec = sde.SystemSpec("DOOB_BM", 2, nu=0.8)
        a = sde.simulate(spec, np.eye(2)[None], 0.2, RngStream(4), sde.StepperConfig(h=1e-2), n_paths=5, record_every=None)
        b = sde.simulate(spec, np.eye(2)[None], 0.2, RngStream(4), sde.StepperConfig(h=1e-2), n_paths=5, record_every=None)
        np.testing.assert_array_equal(a.terminal, b.terminal)

    def test_states_stay_positive_definite(self):
        spec = sde.SystemSpec("BURKE_PAIR", 2, nu=-0.5, lam=(1.5,))
        X0 = np.stack([np.eye(2), 0.5 * np.eye(2)])
        s = sde.simulate(spec, X0, 0.5, RngStream(5), sde.StepperConfig(h=1e-2), n_paths=50, record_every=10)
        assert np.all(np.linalg.eigvalsh(s.states) > 0)

    def test_scalar_log_moments(self):
        # at n = 1 the Laplacian is d^2/du^2 in u = log x: log X_t ~ N(2 nu t, 2 t)
        nu, T = 0.7, 1.0
        s = sde.simulate(sde.SystemSpec("DOOB_BM", 1, nu=nu), np.eye(1)[None], T, RngStream(10), sde.StepperConfig(h=1e-2), n_paths=4000, record_every=None)
        u = np.log(s.terminal[:, 0, 0, 0])
        assert abs(z(u, 2 * nu * T)) < 3.5
        assert u.var(ddof=1) == pytest.approx(2 * T, rel=0.1)

    def test_integrated_trace_mean(self):
        # E X_t = e^t for nu = 0 at n = 1, so E int_0^T X dt = e^T - 1
        f = sde.Functional(sde.FunctionalKind.INT_TRACE, 0)
        s = sde.simulate(sde.SystemSpec("DOOB_BM", 1), np.eye(1)[None], 1.0, RngStream(2), sde.StepperConfig(h=1e-2), n_paths=4000, record_every=None, functionals=[f])
        assert abs(z(s.functionals[f], math.e - 1)) < 3.5

    def test_functional_kind_from_string(self):
        assert sde.Functional("LOG_EIG", 0, 1).kind is sde.FunctionalKind.LOG_EIG

    def test_path_functional_matches_online(self):
        f = sde.Functional(sde.FunctionalKind.INT_TRACE, 0)
        s = sde.simulate(sde.SystemSpec("DOOB_BM", 2, nu=1.0), np.eye(2)[None], 0.1, RngStream(3), sde.StepperConfig(h=1e-2), n_paths=4, record_every=1, functionals=[f])
        np.testing.assert_allclose(sde.path_functional(s, f), s.functionals[f], rtol=1e-12)

    def test_euler_scheme_moments(self):
        s = sde.simulate(sde.SystemSpec("DOOB_BM", 1, nu=0.7), np.eye(1)[None], 1.0, RngStream(11), sde.StepperConfig(h=1e-2, scheme="EULER_PROJECTED"), n_paths=4000, record_every=None)
        assert abs(z(np.log(s.terminal[:, 0, 0, 0]), 1.4)) < 3.5

    def test_bad_initial_shape(self):
        with pytest.raises(ParameterError):
            sde.simulate(sde.SystemSpec("DOOB_BM", 2), np.eye(3)[None], 0.1, RngStream(0))

    def test_negative_horizon(self):
        with pytest.raises(ParameterError):
            sde.simulate(sde.SystemSpec("DOOB_BM", 1), np.eye(1)[None], -1.0, RngStream(0))


class TestGroupPaths:
    def test_gl_bm_shape_and_start(self):
        times, G = sde.gl_bm_path(3, 0.5, 0.2, 1e-2, RngStream(1), n_paths=3, record_every=5)
        assert G.shape == (5, 3, 3, 3)
        np.testing.assert_allclose(times, [0.0, 0.05, 0.1, 0.15, 0.2])
        np.testing.assert_array_equal(G[0], np.broadcast_to(np.eye(3), (3, 3, 3)))

    def test_gl_bm_log_det_drift(self):
        # log|G| gains n nu h per step plus mean-zero noise (trace of the generator)
        times, G = sde.gl_bm_path(2, 0.5, 1.0, 1e-2, RngStream(3), n_paths=2000, record_every=100)
        ld = np.linalg.slogdet(G[-1])[1]
        assert abs(z(ld, 2 * 0.5 * 1.0)) < 3.5

    def test_nrw_eigenvalue_match(self):
        times, ev1, ev2 = sde.nrw_path(3, 0.3, 0.2, 1e-2, RngStream(2), n_paths=2)
        np.testing.assert_allclose(ev1, ev2, rtol=1e-9)

    def test_log_singular_growth_shape(self):
        out = sde.gl_log_singular_growth(2, 1.0, 1.0, 1e-2, RngStream(4), n_paths=3, checkpoints=[0.5])
        assert out.shape == (2, 3, 2)


class TestExport:
    def test_path_csv(self):
        s = sde.simulate(sde.SystemSpec("DOOB_BM", 1), np.eye(1)[None], 0.0, RngStream(0), n_paths=1)
        fh = io.StringIO()
        sde.write_path_csv(fh, s)
        assert fh.getvalue().splitlines() == ["# pdflow-path v1", "time,particle,row,col,value", "0.0,0,0,0,1.0"]


class TestGeneratorFD:
    def test_doob_generator_on_log_det(self):
        # at n = 1: Delta log x = 0 and the Doob drift of x^nu contributes 2 nu
        spec = sde.SystemSpec("DOOB_BM", 1, nu=0.7)
        val = sde.generator_apply_fd(spec, lambda S: float(np.log(S[0][0, 0])), [np.eye(1) * 1.3])
        assert val == pytest.approx(1.4, rel=1e-5)


@given(st.integers(0, 500))
def test_reproducible_streams(seed):
    spec = sde.SystemSpec("DOOB_BM", 1, nu=0.2)
    a = sde.simulate(spec, np.eye(1)[None], 0.05, RngStream(seed), sde.StepperConfig(h=1e-2), n_paths=2, record_every=None)
    b = sde.simulate(spec, np.eye(1)[None], 0.05, RngStream(seed), sde.StepperConfig(h=1e-2), n_paths=2, record_every=None)
    np.testing.assert_array_equal(a.terminal, b.terminal)
