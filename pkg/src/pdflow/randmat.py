"""Random matrices on the PD cone: Wishart family, Haar frames, matrix GIG."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .pdcone import as_pd, expm_sym, logm_pd, solve_quadratic_mean, sqrt_pd, sym


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Distinct stream ids give statistically independent generators, so
    parallel work can be split into fixed chunks without changing results.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id * 1_000_003 + k + 1)

    def __str__(self) -> str:
        return f"seed={self.seed}:stream={self.stream_id}"


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_haar_orthogonal(n: int, rng, size: int | None = None) -> np.ndarray:
    """Haar-distributed orthogonal matrices via sign-corrected QR."""
    g = _rng(rng)
    m = 1 if size is None else size
    z = g.standard_normal((m, n, n))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    q = q * d[:, None, :]
    return q[0] if size is None else q


def _check_wishart(n: int, p: float) -> None:
    if not p > n - 1:
        raise ParameterError(f"Wishart degrees of freedom p={p} must exceed n-1={n - 1}")


def sample_wishart(sigma, p: float, rng, size: int | None = None) -> np.ndarray:
    """Wishart(``sigma``, ``p``) draws with mean ``p * sigma``.

    Integer ``p`` uses the Gaussian construction ``s A^T A s`` with ``A`` a
    ``p x n`` standard Gaussian matrix and ``s = sigma^{1/2}``; other values
    use the Bartlett decomposition.
    """
    sigma = as_pd(sigma, "sigma")
    n = sigma.shape[0]
    _check_wishart(n, p)
    g = _rng(rng)
    m = 1 if size is None else size
    if float(p).is_integer():
        a = g.standard_normal((m, int(p), n))
        core = np.swapaxes(a, -1, -2) @ a
    else:
        L = np.zeros((m, n, n))
        for i in range(n):
            L[:, i, i] = np.sqrt(g.chisquare(p - i, size=m))
            L[:, i, :i] = g.standard_normal((m, i))
        core = L @ np.swapaxes(L, -1, -2)
    s = sqrt_pd(sigma)
    out = sym(s @ core @ s)
    return out[0] if size is None else out


def sample_inverse_wishart(sigma, p: float, rng, size: int | None = None) -> np.ndarray:
    """Law of ``W^{-1}`` for ``W ~ Wishart(sigma, p)``."""
    w = sample_wishart(sigma, p, rng, size)
    return sym(np.linalg.inv(w))


def sample_kernel_pi(a: float, X, rng, size: int | None = None) -> np.ndarray:
    """Draws from ``Gamma_n(a)^{-1} |Y X^{-1}|^a etr(-Y X^{-1}) mu(dY)``.

    Realized as ``X^{1/2} W X^{1/2}`` with ``W ~ Wishart(I/2, 2a)``.
    """
    X = as_pd(X)
    n = X.shape[0]
    if not 2 * a > n - 1:
        raise ParameterError(f"kernel parameter requires 2a > n-1, got a={a}, n={n}")
    w = sample_wishart(0.5 * np.eye(n), 2 * a, rng, size)
    r = sqrt_pd(X)
    return sym(r @ w @ r)


# -- matrix GIG by Metropolis in log coordinates ------------------------------


def _log_sinhc(x: np.ndarray) -> np.ndarray:
    """``log(sinh(x) / x)`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    big = xs + np.log1p(-np.exp(-2 * xs)) - np.log(2 * xs)
    return np.where(small, x * x / 6.0, big)


def log_exp_jacobian(s: np.ndarray) -> float:
    """Log Jacobian of ``S -> exp(S)`` on symmetric matrices at eigenvalues ``s``."""
    s = np.asarray(s, dtype=float)
    total = float(np.sum(s))
    n = s.size
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(s[i] - s[j])
            total += 0.5 * (s[i] + s[j]) + float(_log_sinhc(0.5 * d))
    return total


def gig_log_target(S: np.ndarray, nu: float, A: np.ndarray, B: np.ndarray) -> float:
    """Log density in ``S = log X`` of ``|X|^nu etr(-A X - B X^{-1}) mu(dX)``."""
    n = S.shape[0]
    w, v = np.linalg.eigh(S)
    X = (v * np.exp(w)) @ v.T
    Xi = (v * np.exp(-w)) @ v.T
    return (
        (nu - 0.5 * (n + 1)) * float(np.sum(w))
        - float(np.sum(A * X))
        - float(np.sum(B * Xi))
        + log_exp_jacobian(w)
    )


@dataclass
class GigChain:
    samples: np.ndarray
    acceptance_rate: float
    ess: float
    scale: float
    warning: bool


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from Geyer's initial positive sequence of autocorrelations."""
    x = np.asarray(x, dtype=float)
    m = x.size
    if m < 4:
        return float(m)
    y = x - x.mean()
    var = float(y @ y) / m
    if var == 0.0:
        return float(m)
    f = np.fft.rfft(y, n=2 * m)
    acf = np.fft.irfft(f * np.conj(f))[:m] / (m * var)
    tau = -1.0
    for k in range(0, m - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    return float(m / max(tau, 1e-12))


def sample_matrix_gig(
    nu: float,
    A,
    B,
    rng,
    n_samples: int,
    burn_in: int = 2000,
    thin: int = 10,
    target_accept: float = 0.3,
    init=None,
) -> GigChain:
    """Random-walk Metropolis for ``K_n(nu|A,B)^{-1} |X|^nu etr(-AX - BX^{-1}) mu(dX)``.

    The walk moves in ``S = log X`` with a symmetric Gaussian proposal. The
    step size adapts during burn-in toward ``target_accept`` and is frozen
    afterwards. ``warning`` is set when the post-burn-in acceptance rate
    leaves [0.1, 0.7].
    """
    A = as_pd(A, "A")
    B = as_pd(B, "B")
    n = A.shape[0]
    g = _rng(rng)
    X0 = solve_quadratic_mean(A, B) if init is None else as_pd(init)
    S = logm_pd(X0)
    lp = gig_log_target(S, nu, A, B)
    # curvature of the exponent at the start point sets the initial width
    log_scale = -0.5 * math.log(1.0 + float(np.trace(A @ X0) + np.trace(B @ np.linalg.inv(X0))) / n)

    def propose(S, scale):
        z = g.standard_normal((n, n))
        return S + scale * 0.5 * (z + z.T)

    for k in range(burn_in):
        S1 = propose(S, math.exp(log_scale))
        lp1 = gig_log_target(S1, nu, A, B)
        alpha = math.exp(min(0.0, lp1 - lp))
        if g.random() < alpha:
            S, lp = S1, lp1
        log_scale += (alpha - target_accept) / (k + 1) ** 0.6
    scale = math.exp(log_scale)
    out = np.empty((n_samples, n, n))
    accepted = 0
    total = n_samples * thin
    for k in range(total):
        S1 = propose(S, scale)
        lp1 = gig_log_target(S1, nu, A, B)
        if math.log(g.random() + 1e-300) < lp1 - lp:
            S, lp = S1, lp1
            accepted += 1
        if (k + 1) % thin == 0:
            out[(k + 1) // thin - 1] = expm_sym(S)
    rate = accepted / total
    ess = effective_sample_size(np.trace(out, axis1=1, axis2=2))
    warn = not (0.1 <= rate <= 0.7)
    if warn:
        warnings.warn(f"matrix GIG acceptance rate {rate:.3f} outside [0.1, 0.7]", RuntimeWarning)
    return GigChain(out, rate, ess, scale, warn)
