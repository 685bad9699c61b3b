"""Special functions of matrix argument.

Covers power functions, the multivariate Gamma function, spherical
functions, matrix Bessel functions and Whittaker functions on ``P_n^N``,
plus the integrals they enter. Numeric integrals return ``(value, error)``
pairs.

Conventions
-----------
* ``p_s(X) = prod_k |X^{(k)}|^{s_k}`` with ``X^{(k)}`` the upper-left
  ``k x k`` corner. A scalar exponent ``nu`` stands for ``s = (0,...,0,nu)``,
  i.e. ``p_s = |X|^nu``.
* ``K_n(s|V,W) = int p_s(Y) etr(-VY - WY^{-1}) mu(dY)`` and
  ``B_nu(X) = K_n(nu|X,I)``.
* A triangular array ``Y`` for ``N`` levels is a list of lists with
  ``Y[m-1][i-1]`` holding ``Y^m_i`` (``1 <= i <= m <= N``).
"""

from __future__ import annotations

import csv
import math
from typing import Sequence

import numpy as np
from scipy import special

from . import quadrature
from .errors import DomainError, EvaluationError, ParameterError
from .pdcone import as_pd, logdet, sym
from .randmat import RngStream, _rng, log_exp_jacobian, sample_haar_orthogonal

# -- power, gamma, eigenvalues ----------------------------------------------


def _exponents(s, n: int) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size == 1 and n > 1:
        out = np.zeros(n)
        out[-1] = s[0]
        return out
    if s.size != n:
        raise ParameterError(f"exponent vector has length {s.size}, expected {n}")
    return s


def log_power_fn(s, X) -> float:
    X = as_pd(X)
    n = X.shape[0]
    s = _exponents(s, n)
    tot = 0.0
    for k in range(1, n + 1):
        if s[k - 1] != 0.0:
            tot += s[k - 1] * logdet(X[:k, :k])
    return tot


def power_fn(s, X) -> float:
    """``p_s(X)`` built from the leading principal minors."""
    return math.exp(log_power_fn(s, X))


def tail_sums(s) -> np.ndarray:
    """``(s_k + ... + s_n)_{k=1..n}``."""
    s = np.asarray(s, dtype=float)
    return np.cumsum(s[::-1])[::-1]


def log_gamma_n(s, n: int | None = None) -> float:
    """Log of the multivariate Gamma function ``Gamma_n(s)``.

    ``s`` is either an exponent vector or a scalar ``a`` (then ``n`` is
    required and the classical ``Gamma_n(a)`` is returned).

    Raises
    ------
    DomainError
        Unless ``2 (s_k + ... + s_n) > k - 1`` for every ``k``.
    """
    if np.ndim(s) == 0:
        if n is None:
            raise ParameterError("n is required for a scalar argument")
        s = _exponents(float(s), n)
    s = np.asarray(s, dtype=float)
    n = s.size
    t = tail_sums(s)
    for k in range(1, n + 1):
        if not 2 * t[k - 1] > k - 1:
            raise DomainError(
                f"Gamma_{n} diverges: 2(s_{k}+...+s_{n}) = {2 * t[k - 1]:g} <= {k - 1}"
            )
    return 0.25 * n * (n - 1) * math.log(math.pi) + sum(
        special.gammaln(t[k - 1] - 0.5 * (k - 1)) for k in range(1, n + 1)
    )


def gamma_n(s, n: int | None = None) -> float:
    return math.exp(log_gamma_n(s, n))


def spectral_parameter(s) -> np.ndarray:
    """``r_i = s_i + ... + s_n + (n + 1 - 2i)/4``."""
    s = np.asarray(s, dtype=float)
    n = s.size
    return tail_sums(s) + (n + 1 - 2 * np.arange(1, n + 1)) / 4.0


def laplacian_eigenvalue(s) -> float:
    """Eigenvalue of the invariant Laplacian on ``p_s`` and ``h_s``."""
    s = np.asarray(s, dtype=float)
    n = s.size
    r = spectral_parameter(s)
    return float(np.sum(r * r) + (n - n**3) / 48.0)


def grad_log_power_fn(s, X) -> np.ndarray:
    """``d_X log p_s(X) = sum_k s_k (X^{(k)})^{-1}`` padded with zeros."""
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    s = _exponents(s, n)
    out = np.zeros_like(X)
    for k in range(1, n + 1):
        if s[k - 1] != 0.0:
            out[..., :k, :k] += s[k - 1] * np.linalg.inv(X[..., :k, :k])
    return out


class SphericalFunction:
    """Monte Carlo spherical function ``h_s(X) = int_{O(n)} p_s(X[k]) dk``.

    The Haar sample is drawn once, so the estimator is a smooth function of
    ``X`` (an average of exact eigenfunctions) and can be differentiated.
    """

    def __init__(self, s, n: int, rng=None, n_samples: int = 2000):
        self.s = _exponents(s, n)
        self.n = n
        self.frames = sample_haar_orthogonal(n, _rng(rng if rng is not None else RngStream(0)), n_samples)

    def terms(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Z = np.swapaxes(self.frames, -1, -2) @ X @ self.frames
        logs = np.zeros(len(self.frames))
        for k in range(1, self.n + 1):
            if self.s[k - 1] != 0.0:
                logs += self.s[k - 1] * np.linalg.slogdet(Z[:, :k, :k])[1]
        return np.exp(logs)

    def __call__(self, X) -> float:
        return float(np.mean(self.terms(X)))

    def estimate(self, X) -> tuple[float, float]:
        t = self.terms(X)
        return float(np.mean(t)), float(np.std(t, ddof=1) / math.sqrt(t.size))

    def grad_log(self, X) -> np.ndarray:
        """``d_X log h_s`` (as the weighted mean of the per-frame gradients)."""
        X = np.asarray(X, dtype=float)
        t = self.terms(X)
        K = self.frames
        Z = np.swapaxes(K, -1, -2) @ X @ K
        G = grad_log_power_fn(self.s, Z)
        G = K @ G @ np.swapaxes(K, -1, -2)
        return sym(np.tensordot(t, G, axes=1) / np.sum(t))


def spherical_h(s, X, rng=None, n_samples: int = 4000) -> tuple[float, float]:
    """``h_s(X)`` by Monte Carlo over Haar frames; returns (value, stderr)."""
    X = as_pd(X)
    return SphericalFunction(s, X.shape[0], rng, n_samples).estimate(X)


# -- Cholesky coordinates ------------------------------------------------------


def _n_coords(n: int) -> int:
    return n * (n + 1) // 2


def _chol_from_theta(theta: np.ndarray, n: int) -> np.ndarray:
    """Lower factors ``L`` with ``log diag`` and off-diagonal entries in ``theta``."""
    m = theta.shape[0]
    L = np.zeros((m, n, n))
    idx = np.arange(n)
    L[:, idx, idx] = np.exp(theta[:, :n])
    k = n
    for i in range(n):
        for j in range(i):
            L[:, i, j] = theta[:, k]
            k += 1
    return L


def _chol_log_measure(theta: np.ndarray, n: int) -> np.ndarray:
    """Log density of ``mu`` in the coordinates of :func:`_chol_from_theta`.

    ``Y = L L^T`` gives ``mu(dY) = 2^n prod_i l_ii^{-i} dL``; with
    ``l_ii = exp(t_i)`` this is ``2^n prod_i exp((1-i) t_i) dt dL_offdiag``.
    """
    w = 1.0 - np.arange(1, n + 1)
    return n * math.log(2.0) + theta[:, :n] @ w


def _tri_inv(L: np.ndarray) -> np.ndarray:
    n = L.shape[-1]
    if n == 1:
        return 1.0 / L
    if n == 2:
        out = np.zeros_like(L)
        out[:, 0, 0] = 1.0 / L[:, 0, 0]
        out[:, 1, 1] = 1.0 / L[:, 1, 1]
        out[:, 1, 0] = -L[:, 1, 0] / (L[:, 0, 0] * L[:, 1, 1])
        return out
    return np.linalg.inv(L)


def _theta0(n: int, scale: float = 1.0) -> np.ndarray:
    th = np.zeros(_n_coords(n))
    th[:n] = 0.5 * math.log(scale)
    return th


# -- Bessel functions --------------------------------------------------------


def _bessel_logf(s: np.ndarray, V: np.ndarray, W: np.ndarray):
    n = V.shape[0]
    t = tail_sums(s)

    def logf(theta):
        L = _chol_from_theta(theta, n)
        Li = _tri_inv(L)
        trVY = np.einsum("mij,jk,mki->m", np.swapaxes(L, -1, -2), V, L)
        trWYi = np.einsum("mij,jk,mki->m", Li, W, np.swapaxes(Li, -1, -2))
        logp = 2.0 * theta[:, :n] @ t
        return logp - trVY - trWYi + _chol_log_measure(theta, n)

    return logf


def _bessel_n1(s: float, v: float, w: float, rel_tol: float):
    """Scalar case in the variable ``u`` with ``y = sqrt(w/v) e^u``."""
    c = 2.0 * math.sqrt(v * w)

    def logf(u):
        u = u[:, 0]
        return s * u - c * np.cosh(u)

    res = quadrature.trapezoid(logf, np.array([math.asinh(s / c)]), rel_tol=rel_tol)
    lv = res.log_value + 0.5 * s * math.log(w / v)
    return lv, res.rel_error


def _bessel_eig_n2(s: np.ndarray, V: np.ndarray, W: np.ndarray, n_ang: int = 64, n_w: int = 48):
    """Cross-check route for n = 2 in eigen-coordinates.

    ``Y = k(phi) diag(e^{u+w}, e^{u-w}) k(phi)^T`` with ``w > 0`` and
    ``phi in [0, pi)`` parametrizes each ``Y`` once; there
    ``mu(dY) = |a1 - a2| (a1 a2)^{-3/2} da1 da2 dphi``.
    """
    phi = np.arange(n_ang) * math.pi / n_ang
    c, sn = np.cos(phi), np.sin(phi)
    K = np.stack([np.stack([c, -sn], -1), np.stack([sn, c], -1)], -2)
    # w-grid: Gauss-Legendre on [0, wmax]; u-grid: trapezoid
    xg, wg = np.polynomial.legendre.leggauss(n_w)

    def integrate(wmax, u_lo, u_hi, du):
        wn = 0.5 * wmax * (xg + 1)
        ww = 0.5 * wmax * wg
        u = np.arange(u_lo, u_hi + du / 2, du)
        U, Wn, P = np.meshgrid(u, wn, np.arange(n_ang), indexing="ij")
        a1, a2 = np.exp(U + Wn), np.exp(U - Wn)
        Kp = K[P]
        D = np.zeros(U.shape + (2, 2))
        D[..., 0, 0] = a1
        D[..., 1, 1] = a2
        Y = Kp @ D @ np.swapaxes(Kp, -1, -2)
        Di = np.zeros_like(D)
        Di[..., 0, 0] = 1 / a1
        Di[..., 1, 1] = 1 / a2
        Yi = Kp @ Di @ np.swapaxes(Kp, -1, -2)
        lp = s[0] * np.log(Y[..., 0, 0]) + s[1] * (2 * U)
        lf = lp - np.einsum("...ij,ji->...", Y, V) - np.einsum("...ij,ji->...", Yi, W)
        # |a1-a2| (a1 a2)^{-3/2} da1 da2 = 2 sinh(w) e^u e^{-3u} * 2 e^{2u} du dw
        lf = lf + np.log(4 * np.sinh(Wn))
        top = np.max(lf)
        val = np.exp(lf - top) * ww[None, :, None]
        return math.log(np.sum(val) * du * (math.pi / n_ang)) + top

    e = np.linalg.eigvalsh(W @ np.linalg.inv(V))
    u0 = 0.25 * float(np.sum(np.log(e)))
    spread = 6.0 + abs(float(np.log(e[-1] / e[0])))
    a = integrate(spread, u0 - 2 * spread, u0 + 2 * spread, 0.05)
    b = integrate(spread * 1.2, u0 - 2.4 * spread, u0 + 2.4 * spread, 0.025)
    return b, abs(math.expm1(a - b))


def log_bessel_K(
    s,
    V,
    W,
    method: str | None = None,
    rel_tol: float = 1e-12,
    rng=None,
    n_samples: int = 40000,
) -> tuple[float, float]:
    """``log K_n(s|V,W)`` and its relative error estimate.

    Methods: ``"trapezoid"`` (default for n <= 2) integrates in Cholesky
    coordinates, ``"eig"`` (n = 2 only) in eigen-coordinates, and
    ``"importance"`` (default for n >= 3) uses importance sampling.
    """
    V = as_pd(V, "V")
    W = as_pd(W, "W")
    n = V.shape[0]
    s = _exponents(s, n)
    if method is None:
        method = "trapezoid" if n <= 2 else "importance"
    if n == 1 and method == "trapezoid":
        return _bessel_n1(float(s[0]), float(V[0, 0]), float(W[0, 0]), rel_tol)
    if method == "eig":
        if n != 2:
            raise ParameterError("eig method is implemented for n = 2")
        return _bessel_eig_n2(s, V, W)
    logf = _bessel_logf(s, V, W)
    scale = float(np.exp(np.mean(np.log(np.linalg.eigvalsh(W @ np.linalg.inv(V)))) / 2))
    th0 = _theta0(n, scale)
    if method == "trapezoid":
        r = quadrature.trapezoid(logf, th0, rel_tol=rel_tol)
    elif method == "importance":
        r = quadrature.importance(logf, th0, _rng(rng if rng is not None else RngStream(0)), n_samples)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return r.log_value, r.rel_error


def bessel_K(s, V, W, **kw) -> tuple[float, float]:
    """``K_n(s|V,W)`` with an absolute error estimate."""
    lv, rel = log_bessel_K(s, V, W, **kw)
    v = math.exp(lv)
    return v, v * rel


def bessel_B(nu: float, X, **kw) -> tuple[float, float]:
    """``B_nu(X) = K_n(nu|X,I)``."""
    X = as_pd(X)
    return bessel_K(nu, X, np.eye(X.shape[0]), **kw)


def bessel_B_asymptotic(nu: float, M, z: float) -> float:
    """Leading term of ``B_nu(z^2 M^2 / 4)`` as ``z -> infinity``.

    Laplace's method around the saddle ``Y = (2/z) M^{-1}`` gives

        pi^{n(n+1)/4} (2/z)^{n nu + n(n+1)/4} |M|^{-nu-1/2}
        prod_{i<j} (m_i + m_j)^{-1/2} e^{-z tr M}.
    """
    M = as_pd(M)
    n = M.shape[0]
    m = np.linalg.eigvalsh(M)
    pairs = sum(math.log(m[i] + m[j]) for i in range(n) for j in range(i + 1, n))
    lv = (
        0.25 * n * (n + 1) * math.log(math.pi)
        + (n * nu + 0.25 * n * (n + 1)) * math.log(2.0 / z)
        - (nu + 0.5) * float(np.sum(np.log(m)))
        - 0.5 * pairs
        - z * float(np.sum(m))
    )
    return math.exp(lv)


def macdonald_bessel_n1(s: float, v: float, w: float) -> float:
    """Closed form ``K_1(s|v,w) = 2 (w/v)^{s/2} K_s(2 sqrt(vw))``."""
    z = 2.0 * math.sqrt(v * w)
    return 2.0 * (w / v) ** (0.5 * s) * float(special.kve(s, z)) * math.exp(-z)


# -- the constant c_s ----------------------------------------------------------


def c_s_formula(s) -> float:
    """Closed form ``prod Gamma(2 mu_i) prod_{i<j} B(1/2, mu_i + mu_j)``, ``mu = -r``."""
    r = spectral_parameter(np.asarray(s, dtype=float))
    if not np.max(r) < 0:
        raise DomainError(f"c_s diverges: max spectral parameter {np.max(r):g} >= 0")
    mu = -r
    n = mu.size
    lv = float(np.sum(special.gammaln(2 * mu)))
    for i in range(n):
        for j in range(i + 1, n):
            lv += float(special.betaln(0.5, mu[i] + mu[j]))
    return math.exp(lv)


def c_s_quadrature(s, rel_tol: float = 1e-10) -> tuple[float, float]:
    """``int h_s(A^2) etr(-A^{-1}) mu(dA)`` by quadrature (n <= 2).

    The Haar average inside ``h_s`` is dropped: the rest of the integrand
    is invariant under ``A -> k^T A k``, so ``p_s(A^2)`` integrates to the
    same value.
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    r = spectral_parameter(s)
    if not np.max(r) < 0:
        raise DomainError(f"c_s diverges: max spectral parameter {np.max(r):g} >= 0")

    def logf(theta):
        L = _chol_from_theta(theta, n)
        A = L @ np.swapaxes(L, -1, -2)
        Li = _tri_inv(L)
        Ai = np.swapaxes(Li, -1, -2) @ Li
        A2 = A @ A
        lp = np.zeros(theta.shape[0])
        for k in range(1, n + 1):
            if s[k - 1] != 0:
                lp += s[k - 1] * np.linalg.slogdet(A2[:, :k, :k])[1]
        return lp - np.trace(Ai, axis1=1, axis2=2) + _chol_log_measure(theta, n)

    res = quadrature.trapezoid(logf, _theta0(n), rel_tol=rel_tol)
    return res.value, res.error


# -- Whittaker functions -----------------------------------------------------


def _levels(Y) -> int:
    return len(Y)


def whittaker_energy(Y) -> float:
    """``F(Y) = sum tr[Y^m_i (Y^{m+1}_i)^{-1}] + tr[Y^{m+1}_{i+1} (Y^m_i)^{-1}]``."""
    N = _levels(Y)
    tot = 0.0
    for m in range(1, N):
        for i in range(1, m + 1):
            a = np.asarray(Y[m - 1][i - 1], dtype=float)
            tot += float(np.trace(a @ np.linalg.inv(Y[m][i - 1])))
            tot += float(np.trace(np.asarray(Y[m][i]) @ np.linalg.inv(a)))
    return tot


def log_e_lambda(lam, Y) -> float:
    """``log e_lambda(Y)`` with ``e_lambda = e_{l1}(Y^1) prod_m e_{lm}(Y^m) e_{-lm}(Y^{m-1})``."""
    lam = np.asarray(lam, dtype=float)
    N = _levels(Y)
    if lam.size != N:
        raise ParameterError("lambda must have one entry per level")

    def ld(level):
        return sum(logdet(np.asarray(Z, dtype=float)) for Z in Y[level - 1])

    tot = lam[0] * ld(1)
    for m in range(2, N + 1):
        tot += lam[m - 1] * (ld(m) - ld(m - 1))
    return tot


def _psi_n1_N2_log(lam, x1, x2):
    """Vectorized closed form at n = 1, N = 2 through the Macdonald function."""
    nu = lam[0] - lam[1]
    z = 2.0 * np.sqrt(x2 / x1)
    return (
        lam[1] * np.log(x1 * x2)
        + math.log(2.0)
        + 0.5 * nu * np.log(x1 * x2)
        + np.log(special.kve(nu, z))
        - z
    )


def _whittaker_logf_n1(lam: np.ndarray, x: np.ndarray):
    """Log-integrand of the defining integral at n = 1 in log coordinates.

    The free variables are ``log Y^m_i`` for ``m < N``; ``mu(dy) = du``.
    """
    N = lam.size
    logx = np.log(x)

    def logf(theta):
        cols = []
        k = 0
        rows = []
        for m in range(1, N):
            rows.append(theta[:, k : k + m])
            k += m
        rows.append(np.broadcast_to(logx, (theta.shape[0], N)))
        tot = lam[0] * rows[0][:, 0]
        for m in range(2, N + 1):
            tot = tot + lam[m - 1] * (rows[m - 1].sum(1) - rows[m - 2].sum(1))
        for m in range(1, N):
            lo, hi = rows[m - 1], rows[m]
            for i in range(m):
                tot = tot - np.exp(lo[:, i] - hi[:, i]) - np.exp(hi[:, i + 1] - lo[:, i])
        del cols
        return tot

    return logf


def _triangular_from_flat(theta: np.ndarray, X: Sequence[np.ndarray], n: int):
    """Matrices ``exp(S)`` for the free entries and the top row ``X``."""
    N = len(X)
    d = _n_coords(n)
    m_samples = theta.shape[0]
    rows = []
    logjac = np.zeros(m_samples)
    k = 0
    iu = np.triu_indices(n)
    for m in range(1, N):
        row = []
        for _ in range(m):
            S = np.zeros((m_samples, n, n))
            S[:, iu[0], iu[1]] = theta[:, k : k + d]
            S[:, iu[1], iu[0]] = theta[:, k : k + d]
            w, v = np.linalg.eigh(S)
            Y = (v * np.exp(w)[:, None, :]) @ np.swapaxes(v, -1, -2)
            Yi = (v * np.exp(-w)[:, None, :]) @ np.swapaxes(v, -1, -2)
            lj = np.array([log_exp_jacobian(wi) for wi in w]) - 0.5 * (n + 1) * w.sum(1)
            logjac += lj
            row.append((Y, Yi, w.sum(1)))
            k += d
        rows.append(row)
    top = []
    for Xi in X:
        Xi = np.asarray(Xi, dtype=float)
        top.append((np.broadcast_to(Xi, (m_samples, n, n)), np.broadcast_to(np.linalg.inv(Xi), (m_samples, n, n)), np.full(m_samples, logdet(Xi))))
    rows.append(top)
    return rows, logjac


def _whittaker_logf_matrix(lam: np.ndarray, X: Sequence[np.ndarray], n: int):
    N = lam.size

    def logf(theta):
        rows, logjac = _triangular_from_flat(theta, X, n)
        ld = [sum(e[2] for e in row) for row in rows]
        tot = lam[0] * ld[0]
        for m in range(2, N + 1):
            tot = tot + lam[m - 1] * (ld[m - 1] - ld[m - 2])
        for m in range(1, N):
            for i in range(m):
                lo = rows[m - 1][i]
                tot = tot - np.einsum("mij,mji->m", lo[0], rows[m][i][1])
                tot = tot - np.einsum("mij,mji->m", rows[m][i + 1][0], lo[1])
        return tot + logjac

    return logf


def log_whittaker_psi(
    lam,
    X: Sequence,
    method: str | None = None,
    rel_tol: float = 1e-12,
    rng=None,
    n_samples: int = 40000,
) -> tuple[float, float]:
    """``log psi_lambda(X)`` for ``X = (X_1, ..., X_N)`` and its relative error.

    ``psi_lambda(X) = int_{T(X)} e_lambda(Y) e^{-F(Y)} prod mu(dY^m_i)`` over
    triangular arrays with top row ``X``. Methods: ``"closed"`` (n = 1,
    N = 2, via the Macdonald function), ``"bessel"`` (N = 2, through
    :func:`log_bessel_K`), ``"trapezoid"`` (n = 1) and ``"importance"``.
    """
    lam = np.asarray(lam, dtype=float)
    X = [as_pd(x, f"X_{i + 1}") for i, x in enumerate(X)]
    N = len(X)
    n = X[0].shape[0]
    if lam.size != N:
        raise ParameterError("lambda must have one entry per component of X")
    if N == 1:
        return lam[0] * logdet(X[0]), 0.0
    if method is None:
        if N == 2:
            method = "closed" if n == 1 else "bessel"
        else:
            method = "trapezoid" if n == 1 else "importance"
    if method == "closed":
        if not (n == 1 and N == 2):
            raise ParameterError("closed form is available for n = 1, N = 2")
        return float(_psi_n1_N2_log(lam, X[0][0, 0], X[1][0, 0])), 1e-14
    if method == "bessel":
        if N != 2:
            raise ParameterError("bessel route is available for N = 2")
        lv, rel = log_bessel_K(lam[0] - lam[1], np.linalg.inv(X[0]), X[1], rel_tol=rel_tol)
        return lv + lam[1] * (logdet(X[0]) + logdet(X[1])), rel
    if method == "trapezoid":
        if n != 1:
            raise ParameterError("trapezoid route is available for n = 1")
        x = np.array([float(x[0, 0]) for x in X])
        logf = _whittaker_logf_n1(lam, x)
        th0 = np.concatenate([np.full(m, np.mean(np.log(x))) for m in range(1, N)])
        r = quadrature.trapezoid(logf, th0, rel_tol=rel_tol)
        return r.log_value, r.rel_error
    if method == "importance":
        logf = _whittaker_logf_matrix(lam, X, n)
        d = _n_coords(n)
        base = np.mean([np.linalg.eigvalsh(x) for x in X])
        th0 = np.zeros(d * N * (N - 1) // 2)
        iu = np.triu_indices(n)
        diag_pos = [k for k, (i, j) in enumerate(zip(*iu)) if i == j]
        for b in range(N * (N - 1) // 2):
            th0[b * d + np.array(diag_pos)] = math.log(base)
        r = quadrature.importance(logf, th0, _rng(rng if rng is not None else RngStream(0)), n_samples)
        return r.log_value, r.rel_error
    raise ParameterError(f"unknown method {method!r}")


def whittaker_psi(lam, X, **kw) -> tuple[float, float]:
    lv, rel = log_whittaker_psi(lam, X, **kw)
    v = math.exp(lv)
    return v, v * rel


# -- integrals against Whittaker functions (n = 1) ----------------------------


def _check_pairs(lam, nu, n: int = 1):
    for li in lam:
        for nj in nu:
            if not li + nj > 0.5 * (n - 1):
                raise DomainError(f"requires lambda_i + nu_j > (n-1)/2, got {li + nj:g}")


def stade_integral(s: float, A: float, lam, nu, rel_tol: float = 1e-11) -> tuple[float, float]:
    """``int p_s(X_1) etr(-A^{-1} X_1) psi_lambda psi_nu mu_N(dX)`` at n = 1, N <= 2."""
    lam = np.asarray(lam, float)
    nu = np.asarray(nu, float)
    _check_pairs(lam, nu)
    N = lam.size
    if N == 1:
        a = lam[0] + nu[0] + s
        if a <= 0:
            raise DomainError("integral diverges")
        return math.exp(special.gammaln(a) + a * math.log(A)), 0.0
    if N != 2:
        raise ParameterError("N <= 2 supported")

    def logf(theta):
        x1, x2 = np.exp(theta[:, 0]), np.exp(theta[:, 1])
        return s * theta[:, 0] - x1 / A + _psi_n1_N2_log(lam, x1, x2) + _psi_n1_N2_log(nu, x1, x2)

    r = quadrature.trapezoid(logf, np.array([math.log(A), math.log(A)]), rel_tol=rel_tol)
    return r.value, r.error


def stade_closed_form(s: float, A: float, lam, nu) -> float:
    """``Gamma(s+a)/Gamma(a) A^{s+a} prod Gamma(lambda_i + nu_j)`` with ``a = sum(lambda+nu)``."""
    lam = np.asarray(lam, float)
    nu = np.asarray(nu, float)
    a = float(lam.sum() + nu.sum())
    lv = special.gammaln(s + a) - special.gammaln(a) + (s + a) * math.log(A)
    lv += sum(special.gammaln(li + nj) for li in lam for nj in nu)
    return math.exp(lv)


def whittaker_density_laplace(B: float, lam, nu, rel_tol: float = 1e-11) -> tuple[float, float]:
    """``int e^{-B / x_N} W_{lambda,nu}(dx)`` at n = 1, N <= 2.

    ``W_{lambda,nu} = prod Gamma(lambda_i+nu_j)^{-1} e^{-1/x_N}
    psi_{-lambda} psi_{-nu} mu_N``.
    """
    lam = np.asarray(lam, float)
    nu = np.asarray(nu, float)
    _check_pairs(lam, nu)
    N = lam.size
    norm = -sum(special.gammaln(li + nj) for li in lam for nj in nu)
    if N == 1:
        a = lam[0] + nu[0]
        return float(np.exp(norm + special.gammaln(a) - a * np.log1p(B))), 0.0
    if N != 2:
        raise ParameterError("N <= 2 supported")

    def logf(theta):
        x1, x2 = np.exp(theta[:, 0]), np.exp(theta[:, 1])
        return (
            norm
            - (1.0 + B) / x2
            + _psi_n1_N2_log(-lam, x1, x2)
            + _psi_n1_N2_log(-nu, x1, x2)
        )

    r = quadrature.trapezoid(logf, np.zeros(2), rel_tol=rel_tol)
    return r.value, r.error


# -- export ------------------------------------------------------------------


def write_results_csv(fh, rows, schema: str = "pdflow-specfun v1") -> None:
    """Write ``(function, inputs, value, error)`` rows to the text stream ``fh``.

    Inputs are flattened row-major.
    """
    fh.write(f"# {schema}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["function", "inputs", "value", "error"])
    for name, inputs, value, error in rows:
        flat = " ".join(repr(float(x)) for x in np.ravel(np.asarray(inputs, dtype=float)))
        w.writerow([name, flat, repr(float(value)), repr(float(error))])


def check_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise EvaluationError(f"{what} is not finite")
    return value
