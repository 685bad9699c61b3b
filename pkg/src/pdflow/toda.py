"""Classical indefinite non-Abelian Toda lattice on the PD cone.

Positions ``X_i`` are positive definite, momenta ``P_i = dX_i/dt`` are
symmetric, and with ``A_i = X_{i+1} X_i^{-1}``, ``B_i = P_i X_i^{-1}`` the
flow reads ``dB_i/dt = A_{i-1} - A_i``. Block matrices of matrices are
stored as dense ``(N n) x (N n)`` arrays, so the ordered product
``(LM)_{ij} = sum_k L_{ik} M_{kj}`` is ordinary matrix multiplication.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConeExitError, ConvergenceError, ParameterError
from .pdcone import as_pd, as_sym, expm_sym, geometric_mean, is_pd, logdet, sqrt_pd, sym


@dataclass
class TodaState:
    """``X`` and ``P`` are arrays of shape ``(N, n, n)``."""

    X: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.X = np.array([as_pd(x, f"X_{i + 1}") for i, x in enumerate(self.X)])
        self.P = np.array([as_sym(p, f"P_{i + 1}") for i, p in enumerate(self.P)])
        if self.X.shape != self.P.shape:
            raise ParameterError("X and P must have the same shape")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


def lax_blocks(X, P):
    """``A_i = X_{i+1} X_i^{-1}`` (``N - 1`` of them) and ``B_i = P_i X_i^{-1}``."""
    X = np.asarray(X, dtype=float)
    Xi = np.linalg.inv(X)
    A = X[1:] @ Xi[:-1]
    B = np.asarray(P, dtype=float) @ Xi
    return A, B


def lax_matrix(A, B) -> np.ndarray:
    """Block tridiagonal ``L`` with ``B_i`` on the diagonal, ``-I`` above, ``A_i`` below."""
    B = np.asarray(B, dtype=float)
    N, n, _ = B.shape
    L = np.zeros((N * n, N * n))
    for i in range(N):
        L[i * n:(i + 1) * n, i * n:(i + 1) * n] = B[i]
        if i + 1 < N:
            L[i * n:(i + 1) * n, (i + 1) * n:(i + 2) * n] = -np.eye(n)
            L[(i + 1) * n:(i + 2) * n, i * n:(i + 1) * n] = A[i]
    return L


def lax_m_matrix(A, n: int) -> np.ndarray:
    """Strictly lower block matrix ``M`` with ``A_i`` below the diagonal."""
    A = np.asarray(A, dtype=float).reshape(-1, n, n)
    N = A.shape[0] + 1
    M = np.zeros((N * n, N * n))
    for i in range(N - 1):
        M[(i + 1) * n:(i + 2) * n, i * n:(i + 1) * n] = A[i]
    return M


def block_trace(L: np.ndarray, n: int) -> np.ndarray:
    """Sum of the ``n x n`` diagonal blocks."""
    N = L.shape[0] // n
    return sum(L[i * n:(i + 1) * n, i * n:(i + 1) * n] for i in range(N))


def constants_from_blocks(A, B, kmax: int) -> list[np.ndarray]:
    if kmax < 1:
        raise ParameterError("kmax must be at least 1")
    n = np.asarray(B).shape[-1]
    L = lax_matrix(A, B)
    out, Lk = [], np.eye(L.shape[0])
    for _ in range(kmax):
        Lk = Lk @ L
        out.append(block_trace(Lk, n))
    return out


def constants_of_motion(state: TodaState, kmax: int) -> list[np.ndarray]:
    """Matrix-valued ``C_k = sum_i (L^k)_{ii}`` for ``k = 1..kmax``."""
    A, B = lax_blocks(state.X, state.P)
    return constants_from_blocks(A, B, kmax)


def toda_rhs(X, P):
    """``(dX/dt, dP/dt)`` with ``dP_i/dt = P_i X_i^{-1} P_i + X_i X_{i-1}^{-1} X_i - X_{i+1}``."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    Xi = np.linalg.inv(X)
    dP = P @ Xi @ P
    dP[1:] += X[1:] @ Xi[:-1] @ X[1:]
    dP[:-1] -= X[1:]
    return P.copy(), sym(dP)


def _check_cone(X, t):
    for i, x in enumerate(X):
        if not is_pd(x):
            raise ConeExitError(f"X_{i + 1} left the positive definite cone at t={t:.6g}")


@dataclass
class TodaTrajectory:
    times: np.ndarray
    X: np.ndarray
    P: np.ndarray

    def state(self, k: int = -1) -> TodaState:
        return TodaState(self.X[k], self.P[k])


def _rk4(rhs, y, T, h, check, record_every=1):
    steps = int(round(T / h))
    if steps:
        h = T / steps
    times, traj = [0.0], [tuple(np.copy(a) for a in y)]
    for k in range(1, steps + 1):
        k1 = rhs(*y)
        k2 = rhs(*[a + 0.5 * h * d for a, d in zip(y, k1)])
        k3 = rhs(*[a + 0.5 * h * d for a, d in zip(y, k2)])
        k4 = rhs(*[a + h * d for a, d in zip(y, k3)])
        y = tuple(a + h / 6 * (d1 + 2 * d2 + 2 * d3 + d4) for a, d1, d2, d3, d4 in zip(y, k1, k2, k3, k4))
        check(y, k * h)
        if k % record_every == 0 or k == steps:
            times.append(k * h)
            traj.append(tuple(np.copy(a) for a in y))
    return np.array(times), traj


def integrate_rk4(state: TodaState, T: float, h: float, record_every: int = 1) -> TodaTrajectory:
    """Fixed-step RK4 for the ``(X, P)`` flow; raises ConeExitError on blow-up."""
    if not h > 0:
        raise ParameterError("h must be positive")
    times, traj = _rk4(toda_rhs, (state.X, state.P), T, h, lambda y, t: _check_cone(y[0], t), record_every)
    return TodaTrajectory(times, np.stack([a for a, _ in traj]), np.stack([b for _, b in traj]))


# -- Baecklund transformation ---------------------------------------------------


@dataclass
class BacklundState:
    """``X`` has ``N`` entries and ``Y`` has ``N - 1``."""

    X: np.ndarray
    Y: np.ndarray
    nu: float

    def __post_init__(self):
        self.X = np.array([as_pd(x, f"X_{i + 1}") for i, x in enumerate(self.X)])
        n = self.X.shape[1]
        self.Y = np.array([as_pd(y, f"Y_{i + 1}") for i, y in enumerate(self.Y)]).reshape(-1, n, n)
        if self.Y.shape[0] != self.X.shape[0] - 1:
            raise ParameterError("Y must have one fewer entry than X")


def backlund_rhs(X, Y, nu: float):
    """``dX_i/dt = nu X_i + Y_i - X_i Y_{i-1}^{-1} X_i`` and
    ``dY_i/dt = nu Y_i + Y_i X_i^{-1} Y_i - X_{i+1}`` (``Y_N = 0``, ``Y_0^{-1} = 0``)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1, *X.shape[1:])
    dX = nu * X
    dX[:-1] += Y
    if len(Y):
        dX[1:] -= X[1:] @ np.linalg.inv(Y) @ X[1:]
    dY = nu * Y + Y @ np.linalg.inv(X[:-1]) @ Y - X[1:]
    return sym(dX), sym(dY)


def backlund_blocks(bstate: BacklundState):
    """``(A, B, A', B')`` of both lattices implied by the coupled flow."""
    dX, dY = backlund_rhs(bstate.X, bstate.Y, bstate.nu)
    A, B = lax_blocks(bstate.X, dX)
    if len(bstate.Y):
        Ap, Bp = lax_blocks(bstate.Y, dY)
    else:
        Ap, Bp = np.zeros((0, bstate.X.shape[1], bstate.X.shape[1])), np.zeros((0,) + bstate.X.shape[1:])
    return A, B, Ap, Bp


def dressing_matrix(X, Y) -> np.ndarray:
    """Unit lower block bidiagonal ``D`` with ``X_{i+1} Y_i^{-1}`` below the diagonal."""
    X = np.asarray(X, dtype=float)
    N, n, _ = X.shape
    D = np.eye(N * n)
    for i in range(N - 1):
        D[(i + 1) * n:(i + 2) * n, i * n:(i + 1) * n] = X[i + 1] @ np.linalg.inv(Y[i])
    return D


def lax_hat(Ap, Bp, nu: float, n: int) -> np.ndarray:
    """``L^{(N-1)}(A', B')`` bordered by a last block row/column ``(0, ..., 0, nu I)``
    with ``-I`` just above the corner."""
    M = Bp.shape[0] + 1
    out = np.zeros((M * n, M * n))
    if M > 1:
        out[: (M - 1) * n, : (M - 1) * n] = lax_matrix(Ap, Bp)
        out[(M - 2) * n:(M - 1) * n, (M - 1) * n:] = -np.eye(n)
    out[(M - 1) * n:, (M - 1) * n:] = nu * np.eye(n)
    return out


def dressing_residual(bstate: BacklundState, B=None) -> float:
    """``||L D - D L_hat||_F / (||L D||_F + ||D L_hat||_F)``; ``B`` overrides the velocities."""
    A, B0, Ap, Bp = backlund_blocks(bstate)
    B = B0 if B is None else np.asarray(B, dtype=float)
    n = bstate.X.shape[1]
    L = lax_matrix(A, B)
    D = dressing_matrix(bstate.X, bstate.Y)
    Lh = lax_hat(Ap, Bp, bstate.nu, n)
    lhs, rhs = L @ D, D @ Lh
    return float(np.linalg.norm(lhs - rhs) / (np.linalg.norm(lhs) + np.linalg.norm(rhs)))


def integrate_backlund(bstate: BacklundState, T: float, h: float, record_every: int = 1):
    """RK4 for the coupled ``(X, Y)`` flow. Returns ``(times, [(X, Y), ...])``."""
    nu = bstate.nu

    def check(y, t):
        _check_cone(y[0], t)
        _check_cone(y[1], t)

    return _rk4(lambda X, Y: backlund_rhs(X, Y, nu), (bstate.X, bstate.Y), T, h, check, record_every)


# -- triangular arrays ---------------------------------------------------------
#
# A triangular array is a list of levels ``Y[m-1]`` of shape ``(m, n, n)``,
# ``m = 1..N``; the top level ``Y[N-1]`` is the fixed bottom-row data ``X``.


def cascade_rhs(Y: Sequence[np.ndarray], lam) -> list[np.ndarray]:
    """``dY^m_i/dt = lam_m Y^m_i + Y^{m-1}_i - Y^m_i (Y^{m-1}_{i-1})^{-1} Y^m_i``
    with ``Y^{m-1}_m = 0`` and ``(Y^{m-1}_0)^{-1} = 0``."""
    lam = np.asarray(lam, dtype=float)
    out = []
    for m, level in enumerate(Y, start=1):
        level = np.asarray(level, dtype=float)
        d = lam[m - 1] * level
        if m > 1:
            below = np.asarray(Y[m - 2], dtype=float)
            d[:-1] += below
            d[1:] -= level[1:] @ np.linalg.inv(below) @ level[1:]
        out.append(sym(d))
    return out


def _energy_grad(Y, lam):
    """Gradients ``d F_lambda / d Y^m_i`` for the free levels ``m < N``."""
    N = len(Y)
    inv = [np.linalg.inv(np.asarray(l, dtype=float)) for l in Y]
    grads = []
    for m in range(1, N):
        lev = np.asarray(Y[m - 1], dtype=float)
        up = np.asarray(Y[m], dtype=float)
        g = np.empty_like(lev)
        for i in range(1, m + 1):
            Yi = inv[m - 1][i - 1]
            G = inv[m][i - 1] - Yi @ up[i] @ Yi
            if m > 1:
                down = np.asarray(Y[m - 2], dtype=float)
                if i <= m - 1:
                    G = G - Yi @ down[i - 1] @ Yi
                if i >= 2:
                    G = G + inv[m - 2][i - 2]
            G = G - (lam[m - 1] - lam[m]) * Yi
            g[i - 1] = sym(G)
        grads.append(g)
    return grads


def energy_lambda(Y, lam) -> float:
    """``F_lambda(Y) = F(Y) - log e_lambda(Y)``."""
    from .specfun import log_e_lambda, whittaker_energy

    return whittaker_energy(Y) - log_e_lambda(lam, Y)


def cpe_residual(Y, lam) -> float:
    """Largest ``||theta_{Y^m_i} F_lambda||_F`` over the free entries."""
    lam = np.asarray(lam, dtype=float)
    res = 0.0
    for m, g in enumerate(_energy_grad(Y, lam), start=1):
        for i in range(m):
            res = max(res, float(np.linalg.norm(np.asarray(Y[m - 1][i]) @ g[i])))
    return res


def _sym_basis(n):
    out = []
    for a in range(n):
        for b in range(a, n):
            E = np.zeros((n, n))
            E[a, b] = E[b, a] = 1.0
            out.append(E)
    return out


def initial_array(X) -> list[np.ndarray]:
    """Fill lower levels by geometric means of neighbouring entries above."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    levels = [X]
    for m in range(N - 1, 0, -1):
        up = levels[0]
        levels.insert(0, np.array([geometric_mean(up[i], up[i + 1]) for i in range(m)]))
    return levels


def critical_point(lam, X, tol: float = 1e-10, max_iter: int = 100) -> list[np.ndarray]:
    """Minimize ``F_lambda`` over arrays with top level ``X`` by damped Newton.

    Each iterate ``Y0`` is updated as ``Y0^{1/2} exp(D) Y0^{1/2}`` entrywise.
    The gradient in ``D`` is exact; the Hessian is a central difference of
    the gradient along ``Y0^{1/2} (I + D) Y0^{1/2}``, which agrees with the
    exponential chart to second order at the critical point.
    """
    lam = np.asarray(lam, dtype=float)
    X = np.array([as_pd(x) for x in np.asarray(X, dtype=float)])
    N, n = X.shape[0], X.shape[1]
    if lam.size != N:
        raise ParameterError("lambda must have one entry per particle")
    Y = initial_array(X)
    if N == 1:
        return Y
    basis = _sym_basis(n)
    slots = [(m, i) for m in range(1, N) for i in range(m)]
    dim = len(slots) * len(basis)

    def flat_grad(Yc, roots):
        g = _energy_grad(Yc, lam)
        out = np.empty(dim)
        k = 0
        for m, i in slots:
            Gm = roots[(m, i)] @ g[m - 1][i] @ roots[(m, i)]
            for E in basis:
                out[k] = float(np.sum(Gm * E))
                k += 1
        return out

    def moved(Yc, roots, d, chart):
        Yn = [np.array(l, copy=True) for l in Yc]
        k = 0
        for m, i in slots:
            D = sum(d[k + j] * E for j, E in enumerate(basis))
            k += len(basis)
            core = expm_sym(D) if chart == "exp" else np.eye(n) + D
            r = roots[(m, i)]
            Yn[m - 1][i] = sym(r @ core @ r)
        return Yn

    f = energy_lambda(Y, lam)
    for _ in range(max_iter):
        if cpe_residual(Y, lam) <= tol:
            return Y
        roots = {(m, i): sqrt_pd(Y[m - 1][i]) for m, i in slots}
        g = flat_grad(Y, roots)
        eps = 1e-6
        H = np.empty((dim, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = eps
            H[:, k] = (flat_grad(moved(Y, roots, e, "lin"), roots) - flat_grad(moved(Y, roots, -e, "lin"), roots)) / (2 * eps)
        H = 0.5 * (H + H.T)
        w, V = np.linalg.eigh(H)
        step = -(V @ ((V.T @ g) / np.maximum(w, 1e-8 * max(1.0, w.max()))))
        t = 1.0
        while t > 1e-12:
            Yn = moved(Y, roots, t * step, "exp")
            fn = energy_lambda(Yn, lam)
            if fn <= f + 1e-4 * t * float(g @ step):
                break
            t /= 2
        else:
            # no decrease at machine precision: accept if already stationary enough
            break
        Y, f = Yn, fn
    res = cpe_residual(Y, lam)
    if res <= tol:
        return Y
    raise ConvergenceError(f"critical point iteration stopped with residual {res:.3e}")


def integrate_cascade(Y0, lam, T: float, h: float, record_every: int = 1):
    """RK4 for the deterministic cascade. Returns ``(times, [levels, ...])``."""
    N = len(Y0)
    sizes = [m for m in range(1, N + 1)]
    n = np.asarray(Y0[0]).shape[-1]

    def pack(levels):
        return np.concatenate([np.asarray(l, dtype=float) for l in levels])

    def unpack(flat):
        out, k = [], 0
        for s in sizes:
            out.append(flat[k:k + s])
            k += s
        return out

    def rhs(flat):
        return (pack(cascade_rhs(unpack(flat), lam)),)

    times, traj = _rk4(rhs, (pack(Y0),), T, h, lambda y, t: _check_cone(y[0], t), record_every)
    return times, [unpack(y[0].reshape(-1, n, n)) for y in traj]


def top_row_state(Y, lam) -> TodaState:
    """Toda state ``(X, P)`` of the top level under the cascade flow."""
    d = cascade_rhs(Y, lam)
    return TodaState(np.asarray(Y[-1]), d[-1])


# -- export ------------------------------------------------------------------

TRAJECTORY_SCHEMA = "pdflow-toda v1"


def write_trajectory_csv(fh, traj: TodaTrajectory, kmax: int = 3) -> None:
    """Rows ``time, object, row, col, value`` for ``X_i``, ``P_i`` and ``C_k``."""
    fh.write(f"# {TRAJECTORY_SCHEMA}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time", "object", "row", "col", "value"])
    for t, X, P in zip(traj.times, traj.X, traj.P):
        objs = [(f"X_{i + 1}", x) for i, x in enumerate(X)] + [(f"P_{i + 1}", p) for i, p in enumerate(P)]
        A, B = lax_blocks(X, P)
        objs += [(f"C_{k + 1}", c) for k, c in enumerate(constants_from_blocks(A, B, kmax))]
        for tag, M in objs:
            for r in range(M.shape[0]):
                for c in range(M.shape[1]):
                    w.writerow([repr(float(t)), tag, r, c, repr(float(M[r, c]))])
