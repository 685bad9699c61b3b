"""Linear algebra and calculus on the cone of positive definite matrices.

Matrices are plain ``numpy`` arrays. Functions that require a positive
definite argument validate it with :func:`as_pd`, which rejects any matrix
with a non-positive eigenvalue instead of clamping it.

The matrix partial derivative used throughout the package is

    (d_X f)_ij = (1 + delta_ij) / 2 * df / dx_ij,

where ``f`` is regarded as a function of the independent entries
``x_ij`` (i <= j) of a symmetric matrix. With ``theta_X = X d_X`` the
invariant Laplacian is ``Delta = tr(theta_X theta_X)``.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    DegenerateCongruenceError,
    EvaluationError,
    NotPositiveDefiniteError,
)

SYM_TOL = 1e-10


class EigDecomp(NamedTuple):
    """Eigenvalues in non-increasing order and matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


# -- validation --------------------------------------------------------------


def sym(X: np.ndarray) -> np.ndarray:
    """Symmetric part of a square matrix (or a stack of them)."""
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def as_sym(X, name: str = "X") -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X))))
    if np.max(np.abs(X - X.T)) > SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return sym(X)


def as_pd(X, name: str = "X") -> np.ndarray:
    """Validate that ``X`` is symmetric positive definite and return it.

    Raises
    ------
    NotPositiveDefiniteError
        If the smallest eigenvalue is not strictly positive or the matrix
        contains non-finite entries.
    """
    X = as_sym(X, name)
    if not np.all(np.isfinite(X)):
        raise NotPositiveDefiniteError(f"{name} has non-finite entries")
    lam = np.linalg.eigvalsh(X)
    if lam[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (smallest eigenvalue {lam[0]:.3e})"
        )
    return X


def is_pd(X) -> bool:
    try:
        as_pd(X)
    except (NotPositiveDefiniteError, ValueError):
        return False
    return True


# -- spectral functions ------------------------------------------------------


def eig_sym(X) -> EigDecomp:
    """Eigen-decomposition of a symmetric matrix, eigenvalues non-increasing."""
    X = as_sym(X)
    w, v = np.linalg.eigh(X)
    return EigDecomp(w[::-1].copy(), v[:, ::-1].copy())


def spectral_apply(X: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to the eigenvalues of a symmetric matrix or stack."""
    w, v = np.linalg.eigh(X)
    return sym((v * fn(w)[..., None, :]) @ np.swapaxes(v, -1, -2))


def sqrt_pd(X) -> np.ndarray:
    """The unique positive definite square root."""
    return spectral_apply(as_pd(X), np.sqrt)


def inv_sqrt_pd(X) -> np.ndarray:
    return spectral_apply(as_pd(X), lambda w: 1.0 / np.sqrt(w))


def pow_pd(X, p: float) -> np.ndarray:
    return spectral_apply(as_pd(X), lambda w: w**p)


def logm_pd(X) -> np.ndarray:
    return spectral_apply(as_pd(X), np.log)


def expm_sym(S) -> np.ndarray:
    return spectral_apply(as_sym(S, "S"), np.exp)


def logdet(X) -> float:
    sign, val = np.linalg.slogdet(X)
    if sign <= 0:
        raise NotPositiveDefiniteError("determinant is not positive")
    return float(val)


def etr(X) -> float:
    """Exponential of the trace."""
    return math.exp(float(np.trace(X)))


def invariant_density(X) -> float:
    """Density ``|X|^{-(n+1)/2}`` of the invariant measure w.r.t. Lebesgue."""
    X = as_pd(X)
    n = X.shape[0]
    return math.exp(-0.5 * (n + 1) * logdet(X))


# -- group action ------------------------------------------------------------


def congruence(X, a) -> np.ndarray:
    """The action ``X[a] = a^T X a`` of GL(n) on symmetric matrices."""
    X = as_sym(X)
    a = np.asarray(a, dtype=float)
    if a.shape != X.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {X.shape}")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= 1e-14 * max(s[0], 1e-300):
        raise DegenerateCongruenceError("degenerate congruence: a is singular")
    return sym(a.T @ X @ a)


def solve_quadratic_mean(X, Y) -> np.ndarray:
    """The unique positive definite ``A`` with ``A X A = Y``."""
    X = as_pd(X, "X")
    Y = as_pd(Y, "Y")
    r = sqrt_pd(X)
    ri = inv_sqrt_pd(X)
    return sym(ri @ sqrt_pd(sym(r @ Y @ r)) @ ri)


def geometric_mean(A, B) -> np.ndarray:
    """The matrix geometric mean ``A # B``: the midpoint of the geodesic."""
    A = as_pd(A, "A")
    r = sqrt_pd(A)
    ri = inv_sqrt_pd(A)
    return sym(r @ sqrt_pd(sym(ri @ as_pd(B, "B") @ ri)) @ r)


def leading_minors(X: np.ndarray) -> np.ndarray:
    """Determinants of the upper-left k x k corners, k = 1..n."""
    n = X.shape[-1]
    return np.stack([np.linalg.det(X[..., :k, :k]) for k in range(1, n + 1)], axis=-1)


def random_pd(n: int, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Random PD matrix with log-eigenvalues N(0, spread^2) and Haar frame."""
    z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    q = q * np.sign(np.diag(r))
    lam = np.exp(spread * rng.standard_normal(n))
    return sym((q * lam) @ q.T)


# -- batched kernels used by the simulators -----------------------------------


def expm_batch(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack of (not necessarily symmetric) matrices.

    Scaling and squaring with a degree-14 Taylor polynomial; accurate to
    rounding for the small increments produced by the SDE steppers and
    considerably faster than a per-matrix Pade evaluation for large stacks.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n == 1:
        return np.exp(A)
    norm = np.max(np.sum(np.abs(A), axis=-2)) if A.size else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.25)))) if norm > 0.25 else 0
    B = A / (2.0**s)
    eye = np.broadcast_to(np.eye(n), A.shape)
    out = eye + B
    term = B
    for k in range(2, 15):
        term = term @ B / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def min_eig_batch(X: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each symmetric matrix in a stack."""
    n = X.shape[-1]
    if n == 1:
        return X[..., 0, 0]
    if n == 2:
        a, b, d = X[..., 0, 0], 0.5 * (X[..., 0, 1] + X[..., 1, 0]), X[..., 1, 1]
        return 0.5 * (a + d) - np.hypot(0.5 * (a - d), b)
    return np.linalg.eigvalsh(X)[..., 0]


def inv_batch(X: np.ndarray) -> np.ndarray:
    n = X.shape[-1]
    if n == 1:
        return 1.0 / X
    if n == 2:
        a, b, c, d = X[..., 0, 0], X[..., 0, 1], X[..., 1, 0], X[..., 1, 1]
        det = a * d - b * c
        out = np.empty_like(X)
        out[..., 0, 0] = d / det
        out[..., 0, 1] = -b / det
        out[..., 1, 0] = -c / det
        out[..., 1, 1] = a / det
        return out
    return np.linalg.inv(X)


def chol_batch(X: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of each matrix in a stack."""
    if X.shape[-1] == 1:
        return np.sqrt(X)
    return np.linalg.cholesky(X)


def factor_batch(X: np.ndarray) -> np.ndarray:
    """``F`` with ``F F^T = X`` for each matrix in a stack.

    Cholesky where it succeeds; matrices whose condition number exceeds the
    working precision make the whole stack fall back to ``V diag(sqrt(max(w, eps w_max)))``, which
    perturbs ``X`` at roundoff level only.
    """
    try:
        return chol_batch(X)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(X)
    top = np.max(w, axis=-1, keepdims=True)
    if not np.all(top > 0):
        raise np.linalg.LinAlgError("matrix is not positive semidefinite")
    w = np.maximum(w, np.finfo(float).eps * top)
    return V * np.sqrt(w)[..., None, :]


def sqrt_batch(X: np.ndarray) -> np.ndarray:
    if X.shape[-1] == 1:
        return np.sqrt(X)
    return spectral_apply(X, np.sqrt)


# -- finite-difference calculus ----------------------------------------------


def _coords(n: int):
    return [(i, j) for i in range(n) for j in range(i, n)]


def _basis(n: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((n, n))
    E[i, j] = 1.0
    E[j, i] = 1.0
    return E


def _safe_eval(f, X) -> float:
    try:
        v = float(f(X))
    except Exception as exc:  # noqa: BLE001 - reported with context
        raise EvaluationError(f"evaluation failed at X={X.tolist()}: {exc}") from exc
    if not math.isfinite(v):
        raise EvaluationError(f"evaluation failed at X={X.tolist()}: non-finite value {v}")
    return v


def matrix_grad_fd(f: Callable[[np.ndarray], float], X, h: float = 1e-5) -> np.ndarray:
    """Central-difference approximation of the matrix derivative ``d_X f``.

    Parameters
    ----------
    f : callable
        Scalar function of a symmetric matrix.
    X : array_like
        Point of evaluation (symmetric, usually positive definite).
    h : float
        Step in each independent coordinate.

    Raises
    ------
    EvaluationError
        If ``f`` raises or returns a non-finite value at a stencil point.
    """
    X = as_sym(X)
    n = X.shape[0]
    G = np.zeros((n, n))
    for i, j in _coords(n):
        E = _basis(n, i, j)
        d = (_safe_eval(f, X + h * E) - _safe_eval(f, X - h * E)) / (2 * h)
        c = 1.0 if i == j else 0.5
        G[i, j] = G[j, i] = c * d
    return G


def theta_fd(f, X, h: float = 1e-5) -> np.ndarray:
    """``theta_X f = X d_X f`` by central differences."""
    X = as_sym(X)
    return X @ matrix_grad_fd(f, X, h)


def _grad_and_hessian(f, X, h):
    """Gradient ``d_X f`` and the 4-index tensor ``D[a,b,c,d] = d_ab d_cd f``."""
    n = X.shape[0]
    coords = _coords(n)
    m = len(coords)
    E = [_basis(n, i, j) for i, j in coords]
    c = np.array([1.0 if i == j else 0.5 for i, j in coords])
    f0 = _safe_eval(f, X)
    fp = np.array([_safe_eval(f, X + h * e) for e in E])
    fm = np.array([_safe_eval(f, X - h * e) for e in E])
    H = np.zeros((m, m))
    for p in range(m):
        H[p, p] = (fp[p] - 2 * f0 + fm[p]) / h**2
        for q in range(p + 1, m):
            s = (
                _safe_eval(f, X + h * (E[p] + E[q]))
                - _safe_eval(f, X + h * (E[p] - E[q]))
                - _safe_eval(f, X - h * (E[p] - E[q]))
                + _safe_eval(f, X - h * (E[p] + E[q]))
            ) / (4 * h**2)
            H[p, q] = H[q, p] = s
    G = np.zeros((n, n))
    D = np.zeros((n, n, n, n))
    for p, (a, b) in enumerate(coords):
        G[a, b] = G[b, a] = c[p] * (fp[p] - fm[p]) / (2 * h)
        for q, (cc, d) in enumerate(coords):
            v = c[p] * c[q] * H[p, q]
            for a1, b1 in {(a, b), (b, a)}:
                for c1, d1 in {(cc, d), (d, cc)}:
                    D[a1, b1, c1, d1] = v
    return G, D


def laplacian_fd(f: Callable[[np.ndarray], float], X, h: float = 1e-4) -> float:
    """Invariant Laplacian ``tr(theta_X^2) f`` by finite differences.

    Composing ``theta_X`` with itself produces a first-order term from
    differentiating the coefficient ``X``:

        Delta f = (n+1)/2 tr(X d f) + sum X_il X_km d_lk d_mi f,

    which reduces to ``x^2 f'' + x f'`` for n = 1.
    """
    X = as_sym(X)
    n = X.shape[0]
    G, D = _grad_and_hessian(f, X, h)
    first = 0.5 * (n + 1) * np.trace(X @ G)
    second = np.einsum("il,km,lkmi->", X, X, D)
    return float(first + second)


def omega_fd(f: Callable[[np.ndarray], float], X, h: float = 1e-4) -> float:
    """Generator of ``G G^T`` for a right-invariant Brownian motion ``G``.

    ``Omega f = tr(X^2 d d) f + 1/2 tr(X d f) + 1/2 tr(X) tr(d f)``.
    """
    X = as_sym(X)
    G, D = _grad_and_hessian(f, X, h)
    X2 = X @ X
    second = np.einsum("ab,bcca->", X2, D)
    return float(second + 0.5 * np.trace(X @ G) + 0.5 * np.trace(X) * np.trace(G))


def partial_fd(f: Callable[[list], float], states: list, k: int, h: float = 1e-5) -> np.ndarray:
    """``d_{X_k} f`` for a function of several matrices."""

    def g(Z):
        s = list(states)
        s[k] = Z
        return f(s)

    return matrix_grad_fd(g, states[k], h)


def laplacian_partial_fd(f: Callable[[list], float], states: list, k: int, h: float = 1e-4) -> float:
    """``Delta_{X_k} f`` for a function of several matrices."""

    def g(Z):
        s = list(states)
        s[k] = Z
        return f(s)

    return laplacian_fd(g, states[k], h)


def omega_partial_fd(f: Callable[[list], float], states: list, k: int, h: float = 1e-4) -> float:
    def g(Z):
        s = list(states)
        s[k] = Z
        return f(s)

    return omega_fd(g, states[k], h)
