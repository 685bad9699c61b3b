import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdflow import toda
from pdflow.errors import ConeExitError, NotPositiveDefiniteError
from pdflow.pdcone import random_pd, sym

LAM = (0.6, 0.1, -0.5)


def random_state(seed, N=3, n=2, momentum=0.3):
    g = np.random.default_rng(seed)
    X = np.array([random_pd(n, g, 0.3) for _ in range(N)])
    P = np.array([momentum * sym(g.standard_normal((n, n))) for _ in range(N)])
    return toda.TodaState(X, P)


@pytest.fixture(scope="module")
def critical():
    g = np.random.default_rng(3)
    X = np.array([random_pd(2, g, 0.3) for _ in range(3)])
    Y = toda.critical_point(LAM, X)
    return Y, toda.top_row_state(Y, LAM)


class TestState:
    def test_shapes(self):
        s = random_state(0)
        assert (s.N, s.n) == (3, 2)

    def test_rejects_non_pd(self):
        with pytest.raises(NotPositiveDefiniteError):
            toda.TodaState(np.array([np.eye(2), -np.eye(2)]), np.zeros((2, 2, 2)))

    def test_lax_matrix_shape(self):
        s = random_state(1)
        A, B = toda.lax_blocks(s.X, s.P)
        assert len(A) == 2 and len(B) == 3
        assert toda.lax_matrix(A, B).shape == (6, 6)

    def test_first_constant_is_total_momentum_block(self):
        s = random_state(2)
        A, B = toda.lax_blocks(s.X, s.P)
        np.testing.assert_allclose(toda.constants_of_motion(s, 1)[0], sum(B), rtol=1e-12)


class TestFlow:
    def test_first_constant_and_traces_conserved(self):
        s = random_state(4)
        traj = toda.integrate_rk4(s, 1.0, 1e-3, record_every=100)
        C0 = toda.constants_of_motion(traj.state(0), 3)
        C1 = toda.constants_of_motion(traj.state(-1), 3)
        # RK4 truncation at h = 1e-3 is of order 1e-12 per unit time
        assert np.linalg.norm(C1[0] - C0[0]) <= 1e-8 * np.linalg.norm(C0[0])
        for k in range(3):
            assert np.trace(C1[k]) == pytest.approx(np.trace(C0[k]), rel=1e-8, abs=1e-12)

    def test_lax_equation(self):
        # dL/dt = [L, M] = L M - M L, checked by central differences
        s = random_state(5)
        h = 1e-4
        tr = toda.integrate_rk4(s, 2 * h, h / 10, record_every=10)
        Ls = [toda.lax_matrix(*toda.lax_blocks(x, p)) for x, p in zip(tr.X, tr.P)]
        dL = (Ls[2] - Ls[0]) / (2 * h)
        A, _ = toda.lax_blocks(tr.X[1], tr.P[1])
        M = toda.lax_m_matrix(A, s.n)
        np.testing.assert_allclose(dL, Ls[1] @ M - M @ Ls[1], atol=1e-6)

    def test_cone_exit_detected(self):
        X = np.array([random_pd(2, np.random.default_rng(3), 0.3) for _ in range(3)])
        P = np.array([5 * np.eye(2), -5 * np.eye(2), np.zeros((2, 2))])
        with pytest.raises(ConeExitError):
            toda.integrate_rk4(toda.TodaState(X, P), 50.0, 1e-2)

    def test_trajectory_csv(self):
        tr = toda.integrate_rk4(random_state(6), 0.01, 1e-3, record_every=10)
        fh = io.StringIO()
        toda.write_trajectory_csv(fh, tr, kmax=2)
        lines = fh.getvalue().splitlines()
        assert lines[0] == "# pdflow-toda v1"
        assert lines[1] == "time,object,row,col,value"
        # 2 recorded times x (3 X + 3 P + 2 C) blocks x 4 entries
        assert len(lines) == 2 + 2 * 8 * 4


class TestBacklund:
    def test_dressing_residual(self):
        g = np.random.default_rng(7)
        X = np.array([random_pd(2, g, 0.3) for _ in range(3)])
        Y = np.array([random_pd(2, g, 0.3) for _ in range(2)])
        assert toda.dressing_residual(toda.BacklundState(X, Y, 0.7)) <= 1e-12

    def test_wrong_sizes(self):
        with pytest.raises(Exception):
            toda.BacklundState(np.array([np.eye(2)] * 3), np.array([np.eye(2)] * 3), 0.5)

    def test_trace_shift(self):
        # traces of the constants shift by n nu^k between the N- and (N-1)-particle systems
        g = np.random.default_rng(8)
        nu = 0.7
        b = toda.BacklundState(np.array([random_pd(2, g, 0.3) for _ in range(3)]), np.array([random_pd(2, g, 0.3) for _ in range(2)]), nu)
        AX, BX, AY, BY = toda.backlund_blocks(b)
        CX = toda.constants_from_blocks(AX, BX, 3)
        CY = toda.constants_from_blocks(AY, BY, 3)
        for k in range(3):
            assert np.trace(CX[k]) == pytest.approx(np.trace(CY[k]) + 2 * nu ** (k + 1), rel=1e-9)


class TestCascade:
    def test_critical_point(self, critical):
        Y, _ = critical
        assert toda.cpe_residual(Y, LAM) < 1e-10
        assert len(Y) == 3 and [len(l) for l in Y] == [1, 2, 3]

    def test_top_row_first_constant(self, critical):
        _, state = critical
        C = toda.constants_of_motion(state, 3)
        np.testing.assert_allclose(C[0], sum(LAM) * np.eye(2), atol=1e-12)
        for k in range(3):
            assert np.trace(C[k]) == pytest.approx(2 * sum(l ** (k + 1) for l in LAM), rel=1e-10)

    def test_cascade_preserves_critical_set(self, critical):
        Y, _ = critical
        t, Ys = toda.integrate_cascade(Y, LAM, 0.5, 1e-3, record_every=100)
        assert max(toda.cpe_residual(y, LAM) for y in Ys) < 1e-10

    def test_energy_gradient_vanishes(self, critical):
        Y, _ = critical
        e0 = toda.energy_lambda(Y, LAM)
        assert np.isfinite(e0)


@given(st.integers(0, 2000))
def test_first_constant_conserved_property(seed):
    s = random_state(seed, N=2, n=2, momentum=0.1)
    traj = toda.integrate_rk4(s, 0.2, 1e-2, record_every=20)
    C0 = toda.constants_of_motion(traj.state(0), 1)[0]
    C1 = toda.constants_of_motion(traj.state(-1), 1)[0]
    # h = 1e-2 leaves an RK4 truncation error near h^4 = 1e-8
    assert np.linalg.norm(C1 - C0) <= 1e-6 * max(np.linalg.norm(C0), 1e-3)
