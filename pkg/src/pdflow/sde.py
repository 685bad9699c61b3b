"""Diffusions of interacting particles in the PD cone.

A system is described by a :class:`SystemSpec`. Every particle carries an
invariant second-order part (the Laplacian ``Delta``, the ``G G^T``
generator ``Omega``, or nothing for pure-drift coordinates) plus a
first-order drift ``tr(a_i d_{X_i})``; :func:`drift_field` returns the
``a_i``.

The default scheme splits each step into

1. a multiplicative noise step that is exact in law for the driftless
   part and keeps every state strictly inside the cone, and
2. an explicit Euler drift step, refined by halving whenever it would
   push an eigenvalue below ``eig_floor``.

States of a batch of paths are stored as arrays of shape
``(paths, particles, n, n)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import EvaluationError, ParameterError, StiffDriftError
from .pdcone import (
    chol_batch,
    factor_batch,
    expm_batch,
    inv_batch,
    laplacian_partial_fd,
    min_eig_batch,
    omega_partial_fd,
    partial_fd,
    spectral_apply,
    sym,
)
from .randmat import RngStream, _rng


class SystemKind(str, Enum):
    DOOB_BM = "DOOB_BM"
    BURKE_PAIR = "BURKE_PAIR"
    CHAIN = "CHAIN"
    CHAIN_INV = "CHAIN_INV"
    BESSEL_TRIPLE = "BESSEL_TRIPLE"
    MY_PAIR = "MY_PAIR"
    WALL_PAIR = "WALL_PAIR"
    TRIANGULAR = "TRIANGULAR"
    NRW = "NRW"
    NRW_BURKE_PAIR = "NRW_BURKE_PAIR"


class Scheme(str, Enum):
    SPLIT_MULTIPLICATIVE = "SPLIT_MULTIPLICATIVE"
    EULER_PROJECTED = "EULER_PROJECTED"


# -- Doob transforms ---------------------------------------------------------


class DetPower:
    """``phi(X) = |X|^nu``; the transformed Laplacian is ``Delta + 2 nu tr theta``."""

    n_particles = 1

    def __init__(self, nu: float):
        self.nu = float(nu)

    def grad_log(self, states):
        return [self.nu * inv_batch(states[0])]

    def drift(self, states):
        # 2 X (nu X^{-1}) X without forming the inverse of an ill-conditioned state
        return [2.0 * self.nu * states[0]]

    def __repr__(self):
        return f"DetPower({self.nu})"


class ProductDetPower:
    """``phi(X_1, ..., X_r) = prod_i |X_i|^{nu_i}``: independent Brownian motions with drifts ``nu_i``."""

    def __init__(self, nus):
        self.nus = tuple(float(v) for v in nus)
        self.n_particles = len(self.nus)

    def grad_log(self, states):
        return [v * inv_batch(X) for v, X in zip(self.nus, states)]

    def drift(self, states):
        return [2.0 * v * X for v, X in zip(self.nus, states)]

    def __repr__(self):
        return f"ProductDetPower({list(self.nus)})"


class PowerFunction:
    """``phi = p_s`` (leading-minor power function)."""

    n_particles = 1

    def __init__(self, s):
        self.s = np.asarray(s, dtype=float)

    def grad_log(self, states):
        from .specfun import grad_log_power_fn

        return [grad_log_power_fn(self.s, states[0])]

    def __repr__(self):
        return f"PowerFunction({self.s.tolist()})"


class SphericalDoob:
    """``phi = h_s`` estimated on a fixed Haar sample."""

    n_particles = 1

    def __init__(self, s, n: int, seed: int = 0, n_frames: int = 500):
        from .specfun import SphericalFunction

        self.h = SphericalFunction(s, n, RngStream(seed), n_frames)

    def grad_log(self, states):
        X = states[0]
        return [np.stack([self.h.grad_log(x) for x in X])]


def _log_kv_ratio(nu: float, z: np.ndarray) -> np.ndarray:
    """``K_nu'(z) / K_nu(z)`` using exponentially scaled Bessel functions."""
    return -0.5 * (special.kve(nu - 1, z) + special.kve(nu + 1, z)) / special.kve(nu, z)


class BesselBeta:
    """``phi = |x|^{nu/2} B_nu(x) = 2 K_nu(2 sqrt x)`` for n = 1."""

    n_particles = 1

    def __init__(self, nu: float):
        self.nu = float(nu)

    def grad_log(self, states):
        x = states[0][..., 0, 0]
        r = np.sqrt(x)
        g = _log_kv_ratio(self.nu, 2 * r) / r
        return [g[..., None, None]]

    def __repr__(self):
        return f"BesselBeta({self.nu})"


class WhittakerN2:
    """``phi = psi_lambda`` on ``P_1^2`` (closed form through ``K_nu``)."""

    n_particles = 2

    def __init__(self, lam):
        self.lam = np.asarray(lam, dtype=float)

    def grad_log(self, states):
        x1 = states[0][..., 0, 0]
        x2 = states[1][..., 0, 0]
        l1, l2 = self.lam
        nu = l1 - l2
        z = 2 * np.sqrt(x2 / x1)
        c = l2 + 0.5 * nu
        k = _log_kv_ratio(nu, z)
        g1 = c / x1 - k * z / (2 * x1)
        g2 = c / x2 + k * z / (2 * x2)
        return [g1[..., None, None], g2[..., None, None]]

    def __repr__(self):
        return f"WhittakerN2({self.lam.tolist()})"


# -- system description --------------------------------------------------------


@dataclass(frozen=True)
class SystemSpec:
    """Particle system.

    ``nu`` and ``lam`` are the drift parameters of the given kind; ``nus``
    holds per-particle drifts for chains; ``phi`` optionally overrides the
    Doob transform of the lead particle.
    """

    kind: SystemKind
    n: int
    nu: float = 0.0
    lam: tuple = ()
    nus: tuple = ()
    phi: object = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SystemKind(self.kind))
        n = self.n
        if n < 1:
            raise ParameterError("n must be positive")
        k = self.kind
        if k is SystemKind.BURKE_PAIR:
            lam = self._lam1()
            if not 2 * (lam - self.nu) > n - 1:
                raise ParameterError("BURKE_PAIR requires 2(λ−ν)>n−1")
        if k is SystemKind.NRW_BURKE_PAIR:
            if not 2 * self._lam1() > n - 1:
                raise ParameterError("NRW_BURKE_PAIR requires 2λ>n−1")
        if k in (SystemKind.CHAIN, SystemKind.CHAIN_INV) and len(self.nus) < 1:
            raise ParameterError("chains need per-particle drifts in nus")
        if k is SystemKind.TRIANGULAR and len(self.lam) < 1:
            raise ParameterError("TRIANGULAR needs lam")

    def _lam1(self) -> float:
        if len(self.lam) != 1:
            raise ParameterError(f"{self.kind.value} needs a single λ")
        return float(self.lam[0])

    @property
    def lead_phi(self):
        if self.phi is not None:
            return self.phi
        if self.kind is SystemKind.MY_PAIR:
            return DetPower(0.5 * self.nu)
        if self.kind in (SystemKind.CHAIN, SystemKind.CHAIN_INV):
            return DetPower(self.nus[0])
        return DetPower(self.nu)

    @property
    def n_particles(self) -> int:
        k = self.kind
        if k is SystemKind.DOOB_BM:
            return getattr(self.lead_phi, "n_particles", 1)
        if k in (SystemKind.NRW,):
            return 1
        if k in (SystemKind.CHAIN, SystemKind.CHAIN_INV):
            return len(self.nus)
        if k is SystemKind.BESSEL_TRIPLE:
            return 3
        if k is SystemKind.TRIANGULAR:
            N = len(self.lam)
            return N * (N + 1) // 2
        return 2

    @property
    def noise_kinds(self) -> list[str]:
        k = self.kind
        r = self.n_particles
        if k is SystemKind.MY_PAIR:
            return ["delta", "none"]
        if k in (SystemKind.NRW, SystemKind.NRW_BURKE_PAIR):
            return ["omega"] * r
        return ["delta"] * r


def triangular_index(m: int, i: int) -> int:
    """Position of ``Y^m_i`` (1-based) in the flattened particle list."""
    return m * (m - 1) // 2 + (i - 1)


def _doob(phi, states):
    if hasattr(phi, "drift"):
        return phi.drift(states)
    g = phi.grad_log(states)
    return [2.0 * X @ G @ X for X, G in zip(states, g)]


def drift_field(spec: SystemSpec, states: Sequence[np.ndarray]) -> list[np.ndarray]:
    """First-order coefficients ``a_i`` so that the generator is
    ``sum_i [L_i + tr(a_i d_{X_i})]`` with ``L_i`` the particle's
    second-order part. ``states`` holds one ``(..., n, n)`` array per particle.
    """
    k = spec.kind
    X = list(states)
    if k is SystemKind.DOOB_BM:
        return _doob(spec.lead_phi, X)
    if k is SystemKind.NRW:
        return [2.0 * spec.nu * X[0]]
    if k is SystemKind.BURKE_PAIR:
        lam = spec._lam1()
        Xp, Y = X
        return [2.0 * Y + 2.0 * spec.nu * Xp, 2.0 * lam * Y]
    if k is SystemKind.NRW_BURKE_PAIR:
        lam = spec._lam1()
        Xp, Y = X
        Xi = inv_batch(Xp)
        return [sym(Xp @ Y @ Xi + Xi @ Y @ Xp), 2.0 * lam * Y]
    if k in (SystemKind.CHAIN, SystemKind.CHAIN_INV):
        out = _doob(spec.lead_phi, X[:1])
        for i in range(1, len(X)):
            a = 2.0 * spec.nus[i] * X[i]
            if k is SystemKind.CHAIN:
                a = a + 2.0 * X[i - 1]
            else:
                a = a - 2.0 * X[i] @ inv_batch(X[i - 1]) @ X[i]
            out.append(a)
        return out
    if k is SystemKind.BESSEL_TRIPLE:
        X1, X2, Y = X
        aY = _doob(spec.lead_phi, [Y])[0]
        return [2.0 * Y, -2.0 * X2 @ inv_batch(Y) @ X2, aY]
    if k is SystemKind.MY_PAIR:
        Y, A = X
        return [_doob(spec.lead_phi, [Y])[0], Y.copy()]
    if k is SystemKind.WALL_PAIR:
        Q, Xp = X
        eye = np.broadcast_to(np.eye(spec.n), Q.shape)
        return [spec.nu * Q + eye, -spec.nu * Xp + 2.0 * Q]
    if k is SystemKind.TRIANGULAR:
        N = len(spec.lam)
        out = []
        for m in range(1, N + 1):
            lm = spec.lam[m - 1]
            for i in range(1, m + 1):
                Y = X[triangular_index(m, i)]
                a = 2.0 * lm * Y
                if i <= m - 1:
                    a = a + 2.0 * X[triangular_index(m - 1, i)]
                if i >= 2:
                    a = a - 2.0 * Y @ inv_batch(X[triangular_index(m - 1, i - 1)]) @ Y
                out.append(a)
        return out
    raise ParameterError(f"unsupported system kind {k}")


# -- stepping ----------------------------------------------------------------


@dataclass(frozen=True)
class StepperConfig:
    """``max_substeps`` bounds the number of halvings of a rejected drift step."""

    h: float = 1e-3
    scheme: Scheme = Scheme.SPLIT_MULTIPLICATIVE
    eig_floor: float = 1e-10
    max_substeps: int = 20

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.h > 0:
            raise ParameterError("step h must be positive")
        if not self.eig_floor > 0:
            raise ParameterError("eig_floor must be positive")


class FunctionalKind(str, Enum):
    INT_TRACE = "INT_TRACE"
    INT_CROSS = "INT_CROSS"
    LOG_EIG = "LOG_EIG"
    TERMINAL_LOGDET = "TERMINAL_LOGDET"
    INT_STATE = "INT_STATE"


@dataclass(frozen=True)
class Functional:
    """Scalar path functional.

    ``INT_TRACE(i)``: ``int_0^T tr X_i dt``; ``INT_CROSS(i)``:
    ``int_0^T tr(X_i^{-1} X_{i+1}) dt``; ``LOG_EIG(i, j)``: terminal
    ``log lambda_j(X_i)`` (eigenvalues non-increasing, ``j`` 0-based);
    ``TERMINAL_LOGDET(i)``: terminal ``log |X_i|``; ``INT_STATE(i)``: the
    matrix ``int_0^T X_i dt`` (one ``n x n`` value per path).
    """

    kind: FunctionalKind
    i: int = 0
    j: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", FunctionalKind(self.kind))

    @property
    def integral(self) -> bool:
        return self.kind in (FunctionalKind.INT_TRACE, FunctionalKind.INT_CROSS, FunctionalKind.INT_STATE)

    def integrand(self, S: np.ndarray) -> np.ndarray:
        if self.kind is FunctionalKind.INT_TRACE:
            return np.trace(S[:, self.i], axis1=-2, axis2=-1)
        if self.kind is FunctionalKind.INT_CROSS:
            return np.trace(inv_batch(S[:, self.i]) @ S[:, self.i + 1], axis1=-2, axis2=-1)
        if self.kind is FunctionalKind.INT_STATE:
            return S[:, self.i]
        if self.kind is FunctionalKind.LOG_EIG:
            return np.log(np.linalg.eigvalsh(S[:, self.i])[:, ::-1][:, self.j])
        return np.linalg.slogdet(S[:, self.i])[1]


@dataclass
class PathSample:
    """Simulation output.

    ``states`` has shape ``(times, paths, particles, n, n)`` when recorded,
    else only ``terminal`` ``(paths, particles, n, n)`` is kept.
    """

    times: np.ndarray
    states: np.ndarray | None
    terminal: np.ndarray
    functionals: dict = field(default_factory=dict)
    rng_provenance: str = ""
    substep_events: int = 0


def _noise_step(S: np.ndarray, kinds, h: float, g: np.random.Generator) -> np.ndarray:
    P, r, n, _ = S.shape
    out = S.copy()
    eps = math.sqrt(0.5 * h)
    for i, kind in enumerate(kinds):
        if kind == "none":
            continue
        b = g.standard_normal((P, n, n))
        E = expm_batch(eps * b)
        X = S[:, i]
        if kind == "delta":
            # L E^T E L^T has the law of X^{1/2} E^T E X^{1/2} (orthogonal invariance)
            F = E @ np.swapaxes(factor_batch(X), -1, -2)
            out[:, i] = np.swapaxes(F, -1, -2) @ F
        else:
            out[:, i] = E @ X @ np.swapaxes(E, -1, -2)
        out[:, i] = sym(out[:, i])
    return out


def _drift_increment(spec, S, dt):
    a = drift_field(spec, [S[:, i] for i in range(S.shape[1])])
    return dt * sym(np.stack(a, axis=1))


def _bad_paths(inc, ref, floor):
    """Paths whose update ``ref + inc`` leaves the cone, measured relative to ``ref``.

    The test uses ``min eig(I + L^{-1} inc L^{-T}) >= floor`` with
    ``ref = L L^T``, which is invariant under congruence, so decaying or
    ill-conditioned states are not flagged merely for being small.
    """
    P, r, n, _ = inc.shape
    Li = inv_batch(factor_batch(ref.reshape(P * r, n, n)))
    W = np.eye(n) + Li @ inc.reshape(P * r, n, n) @ np.swapaxes(Li, -1, -2)
    lam = min_eig_batch(sym(W)).reshape(P, r)
    bad = ~(lam >= floor)
    return np.any(bad, axis=1), bad


def _drift_step(spec, S, h, cfg: StepperConfig, t: float):
    inc = _drift_increment(spec, S, h)
    bad, _ = _bad_paths(inc, S, cfg.eig_floor)
    new = S + inc
    events = 0
    if not np.any(bad):
        return new, events
    idx = np.flatnonzero(bad)
    k = 2
    first = None
    while k <= 2 ** cfg.max_substeps:
        events += 1
        trial = S[idx]
        ok = np.ones(idx.size, dtype=bool)
        for _ in range(k):
            inc = _drift_increment(spec, trial, h / k)
            b, bp = _bad_paths(inc, trial, cfg.eig_floor)
            ok &= ~b
            if first is None and np.any(b):
                first = bp[np.flatnonzero(b)[0]]
            if not np.any(ok):
                break
            trial = np.where(ok[:, None, None, None], trial + inc, trial)
        new[idx[ok]] = trial[ok]
        idx = idx[~ok]
        if idx.size == 0:
            return new, events
        k *= 2
    part = int(np.flatnonzero(first)[0]) if first is not None else 0
    raise StiffDriftError(f"stiff drift; reduce h (t={t:.6g}, particle {part})")


def _ito_correction(S, kinds):
    out = np.zeros_like(S)
    n = S.shape[-1]
    for i, kind in enumerate(kinds):
        X = S[:, i]
        if kind == "delta":
            out[:, i] = 0.5 * (n + 1) * X
        elif kind == "omega":
            tr = np.trace(X, axis1=-2, axis2=-1)
            out[:, i] = 0.5 * X + 0.5 * tr[:, None, None] * np.eye(n)
    return out


def _euler_projected_step(spec, S, kinds, h, cfg, g):
    P, r, n, _ = S.shape
    a = np.stack(drift_field(spec, [S[:, i] for i in range(r)]), axis=1)
    new = S + h * (sym(a) + _ito_correction(S, kinds))
    for i, kind in enumerate(kinds):
        if kind == "none":
            continue
        X = S[:, i]
        b = g.standard_normal((P, n, n)) * math.sqrt(h)
        if kind == "delta":
            L = chol_batch(X)
            dS = (b + np.swapaxes(b, -1, -2)) / math.sqrt(2.0)
            new[:, i] += L @ dS @ np.swapaxes(L, -1, -2)
        else:
            db = b / math.sqrt(2.0)
            new[:, i] += db @ X + X @ np.swapaxes(db, -1, -2)
    new = sym(new)
    flat = new.reshape(P * r, n, n)
    floor = cfg.eig_floor
    new = spectral_apply(flat, lambda w: np.maximum(w, floor)).reshape(P, r, n, n)
    return new


def _as_batch(spec: SystemSpec, X0, n_paths: int) -> np.ndarray:
    X0 = np.asarray(X0, dtype=float)
    r, n = spec.n_particles, spec.n
    if X0.shape == (r, n, n):
        return np.broadcast_to(X0, (n_paths, r, n, n)).copy()
    if X0.shape == (n, n) and r == 1:
        return np.broadcast_to(X0, (n_paths, 1, n, n)).copy()
    if X0.shape == (n_paths, r, n, n):
        return X0.copy()
    raise ParameterError(f"initial state has shape {X0.shape}; expected ({r},{n},{n}) or ({n_paths},{r},{n},{n})")


def simulate(
    spec: SystemSpec,
    X0,
    T: float,
    rng,
    config: StepperConfig = StepperConfig(),
    n_paths: int = 1,
    record_every: int | None = 1,
    functionals: Sequence[Functional] = (),
) -> PathSample:
    """Simulate ``n_paths`` independent paths of ``spec`` on ``[0, T]``.

    Parameters
    ----------
    X0 : array_like
        Common initial state ``(particles, n, n)`` or per-path states
        ``(n_paths, particles, n, n)``.
    rng : RngStream or numpy Generator
    record_every : int or None
        Store every k-th state; ``None`` keeps only the terminal state.
    functionals : sequence of Functional
        Accumulated on the fly (trapezoidal rule for integrals).
    """
    g = _rng(rng)
    S = _as_batch(spec, X0, n_paths)
    h = config.h
    if T < 0:
        raise ParameterError("T must be non-negative")
    steps = int(round(T / h))
    if steps:
        h = T / steps
    kinds = spec.noise_kinds
    rec_t, rec_s = [0.0], [S.copy()] if record_every else []
    prev = {f: f.integrand(S) for f in functionals if f.integral}
    acc = {f: np.zeros_like(v) for f, v in prev.items()}
    events = 0
    for k in range(1, steps + 1):
        t = k * h
        if config.scheme is Scheme.SPLIT_MULTIPLICATIVE:
            S = _noise_step(S, kinds, h, g)
            S, ev = _drift_step(spec, S, h, config, t)
            events += ev
        else:
            S = _euler_projected_step(spec, S, kinds, h, config, g)
        for f in acc:
            cur = f.integrand(S)
            acc[f] += 0.5 * h * (prev[f] + cur)
            prev[f] = cur
        if record_every and k % record_every == 0:
            rec_t.append(t)
            rec_s.append(S.copy())
    out = {f: acc[f] for f in acc}
    for f, v in out.items():
        if not np.all(np.isfinite(v)):
            raise EvaluationError(f"non-finite {f.kind.value} accumulation")
    for f in functionals:
        if not f.integral:
            out[f] = f.integrand(S)
    prov = str(rng) if isinstance(rng, RngStream) else "generator"
    states = np.stack(rec_s) if record_every else None
    return PathSample(np.array(rec_t) if record_every else np.array([0.0, T]), states, S, out, prov, events)


def path_functional(sample: PathSample, f: Functional) -> np.ndarray:
    """Evaluate ``f`` on a recorded path (one value per path)."""
    if sample.states is None:
        raise ParameterError("path_functional needs a recorded path")
    if not f.integral:
        return f.integrand(sample.states[-1])
    vals = np.stack([f.integrand(s) for s in sample.states])
    dt = np.diff(sample.times).reshape((-1,) + (1,) * (vals.ndim - 1))
    out = np.sum(0.5 * dt * (vals[1:] + vals[:-1]), axis=0)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite {f.kind.value} accumulation")
    return out


# -- group-valued paths ------------------------------------------------------


def gl_bm_path(n: int, nu: float, T: float, h: float, rng, n_paths: int = 1, record_every: int = 1):
    """Right-invariant Brownian motion ``G`` in GL(n) with drift ``nu``.

    ``G <- exp(sqrt(h/2) b + nu h I) G``; ``G^T G`` is then a Brownian motion
    on the cone with generator ``Delta + 2 nu tr theta`` started at ``I``
    and ``G G^T`` one with generator ``Omega + 2 nu tr theta``.
    Returns ``(times, G)`` with ``G`` of shape ``(times, paths, n, n)``.
    """
    g = _rng(rng)
    steps = max(1, int(round(T / h)))
    h = T / steps
    G = np.broadcast_to(np.eye(n), (n_paths, n, n)).copy()
    times, out = [0.0], [G.copy()]
    grow = math.exp(nu * h)
    for k in range(1, steps + 1):
        E = expm_batch(math.sqrt(0.5 * h) * g.standard_normal((n_paths, n, n))) * grow
        G = E @ G
        if k % record_every == 0:
            times.append(k * h)
            out.append(G.copy())
    return np.array(times), np.stack(out)


def gl_log_singular_growth(n: int, nu: float, T: float, h: float, rng, n_paths: int = 1, checkpoints: Sequence[float] = ()):
    """Accumulated ``log |R_ii|`` of the QR iteration for the product of GL steps.

    ``R_k`` come from ``E_k Q_{k-1} = Q_k R_k``. The running sums track the
    logarithms of the singular values of ``G_t`` up to bounded terms and
    stay well conditioned over long horizons. Returns an array of shape
    ``(len(checkpoints) + 1, paths, n)`` with the sums at each checkpoint
    and at ``T``; ``2 x`` these estimate ``log lambda_i(G^T G)``.
    """
    g = _rng(rng)
    steps = max(1, int(round(T / h)))
    h = T / steps
    marks = {int(round(c / h)) for c in checkpoints}
    Q = np.broadcast_to(np.eye(n), (n_paths, n, n)).copy()
    acc = np.zeros((n_paths, n))
    snaps = []
    for k in range(1, steps + 1):
        E = expm_batch(math.sqrt(0.5 * h) * g.standard_normal((n_paths, n, n)))
        Q, R = np.linalg.qr(E @ Q)
        d = np.diagonal(R, axis1=-2, axis2=-1)
        acc += np.log(np.abs(d)) + nu * h
        if k in marks:
            snaps.append(acc.copy())
    snaps.append(acc.copy())
    return np.stack(snaps)


def nrw_path(n: int, nu: float, T: float, h: float, rng, n_paths: int = 1, record_every: int = 1):
    """Eigenvalues of ``G G^T`` and ``G^T G`` along one GL path: ``(times, ev_GGt, ev_GtG)``."""
    times, G = gl_bm_path(n, nu, T, h, rng, n_paths, record_every)
    Gt = np.swapaxes(G, -1, -2)
    ev1 = np.linalg.eigvalsh(sym(G @ Gt))
    ev2 = np.linalg.eigvalsh(sym(Gt @ G))
    return times, ev1, ev2


# -- generators --------------------------------------------------------------


def apply_generator_fd(
    f: Callable[[list], float],
    state: Sequence,
    noise_kinds: Sequence[str],
    drifts: Sequence[np.ndarray | None],
    h: float = 1e-4,
) -> float:
    """``sum_i [L_i f + tr(a_i d_{X_i} f)]`` with ``L_i`` given by ``noise_kinds``
    (``"delta"``, ``"omega"`` or ``"none"``) and ``a_i = drifts[i]`` (``None`` for no drift)."""
    state = [np.asarray(x, dtype=float) for x in state]
    total = 0.0
    for i, kind in enumerate(noise_kinds):
        if kind == "delta":
            total += laplacian_partial_fd(f, state, i, h)
        elif kind == "omega":
            total += omega_partial_fd(f, state, i, h)
        if drifts[i] is not None:
            G = partial_fd(f, state, i, min(h, 1e-5))
            total += float(np.sum(sym(np.asarray(drifts[i])) * G))
    return total


def generator_apply_fd(spec: SystemSpec, f: Callable[[list], float], state: Sequence, h: float = 1e-4) -> float:
    """Apply the generator of ``spec`` to ``f`` at ``state`` by finite differences."""
    state = [np.asarray(x, dtype=float) for x in state]
    if len(state) != spec.n_particles or any(x.shape != (spec.n, spec.n) for x in state):
        raise ParameterError(f"state does not match {spec.kind.value} with n={spec.n}")
    a = drift_field(spec, [x[None] for x in state])
    return apply_generator_fd(f, state, spec.noise_kinds, [ai[0] for ai in a], h)


# -- export ------------------------------------------------------------------

PATH_SCHEMA = "pdflow-path v1"


def write_path_csv(fh, sample: PathSample, path_index: int = 0) -> None:
    """Write one recorded path with columns ``time, particle, row, col, value``."""
    if sample.states is None:
        raise ParameterError("no recorded states to export")
    fh.write(f"# {PATH_SCHEMA}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time", "particle", "row", "col", "value"])
    S = sample.states[:, path_index]
    for t, st in zip(sample.times, S):
        for p, X in enumerate(st):
            n = X.shape[0]
            for r in range(n):
                for c in range(n):
                    w.writerow([repr(float(t)), p, r, c, repr(float(X[r, c]))])
