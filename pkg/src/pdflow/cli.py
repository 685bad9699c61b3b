"""Configuration-driven command-line front end.

Configuration files are INI-style with the sections ``[system]``,
``[stepper]``, ``[experiment]`` and ``[output]``. Every key is typed and
checked; errors carry the 1-based line number of the offending entry.
All artifacts of a run are computed in memory first and then written with
a temp-then-rename step, so a failed run leaves no partial files.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
import traceback
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import sde, specfun, toda, verify
from .errors import ConfigError, ParameterError, PDFlowError
from .pdcone import random_pd, sym
from .randmat import RngStream

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

SECTIONS = ("system", "stepper", "experiment", "output")
SIMULATE_SCHEMA = "pdflow-simulate v1"


# -- INI parsing ---------------------------------------------------------------


@dataclass(frozen=True)
class Entry:
    value: str
    lineno: int


def parse_ini(text: str) -> dict[str, dict[str, Entry]]:
    """Split ``text`` into sections of ``key = value`` entries.

    Comments start with ``#`` or ``;`` at the beginning of a line. Keys are
    case-sensitive (``n`` and ``N`` are different keys).
    """
    out: dict[str, dict[str, Entry]] = {}
    seen_sections: dict[str, int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]; expected one of {', '.join(SECTIONS)}", lineno)
            if name in seen_sections:
                raise ConfigError(f"duplicate section [{name}] (lines {seen_sections[name]} and {lineno})", lineno)
            seen_sections[name] = lineno
            current = out.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("entry before any section header", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in current:
            raise ConfigError(f"duplicate key '{key}' (lines {current[key].lineno} and {lineno})", lineno)
        current[key] = Entry(value, lineno)
    return out


def _int(s: str) -> int:
    v = float(s)
    if not v.is_integer():
        raise ValueError("not an integer")
    return int(v)


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _bool(s: str) -> bool:
    t = s.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _floats(s: str) -> tuple:
    parts = s.replace(",", " ").split()
    if not parts:
        raise ValueError("empty list")
    return tuple(_float(p) for p in parts)


def _matrices(s: str) -> list[np.ndarray]:
    """``'2 0; 0 1 | 1'``: matrices separated by ``|``, rows by ``;``."""
    mats = []
    for block in s.split("|"):
        rows = [_floats(r) for r in block.split(";")]
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged matrix rows")
        M = np.array(rows, dtype=float)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"matrix of shape {M.shape} is not square")
        mats.append(M)
    return mats


_TYPE_NAMES = {_int: "integer", _float: "number", _bool: "boolean", _floats: "list of numbers", _matrices: "matrix list", str: "string"}

# section -> key -> value parser
SCHEMA: dict[str, dict[str, Callable]] = {
    "system": {"kind": str, "n": _int, "N": _int, "nu": _float, "lambda": _floats, "nus": _floats, "x0": _floats},
    "stepper": {"h": _float, "scheme": str, "eig_floor": _float, "max_substeps": _int},
    "experiment": {
        "kind": str, "seed": _int, "paths": _int, "T": _float, "quick": _bool,
        "z_threshold": _float, "ks_floor": _float, "nu_vec": _floats, "y": _floats, "alpha": _float,
        "functionals": str, "function": str, "s": _floats, "X": _matrices, "V": _matrices, "W": _matrices,
        "A": _float, "B": _float, "init": str,
    },
    "output": {"dir": str, "record_every": _int, "path_csvs": _int},
}

# keys each command accepts (anything else in a known section is rejected)
COMMAND_KEYS: dict[str, dict[str, set]] = {
    "simulate": {
        "system": {"kind", "n", "nu", "lambda", "nus", "x0"},
        "stepper": {"h", "scheme", "eig_floor", "max_substeps"},
        "experiment": {"seed", "paths", "T", "functionals"},
        "output": {"dir", "record_every", "path_csvs"},
    },
    "verify": {
        "system": {"n", "N", "nu", "lambda"},
        "stepper": {"h"},
        "experiment": {"kind", "seed", "paths", "T", "quick", "z_threshold", "ks_floor", "nu_vec", "y", "alpha"},
        "output": {"dir"},
    },
    "specfun-eval": {
        "system": {"n", "nu", "lambda"},
        "stepper": set(),
        "experiment": {"function", "s", "X", "V", "W", "A", "B", "nu_vec", "y", "seed", "paths"},
        "output": {"dir"},
    },
    "toda": {
        "system": {"n", "N", "lambda"},
        "stepper": {"h"},
        "experiment": {"seed", "T", "init"},
        "output": {"dir", "record_every"},
    },
    "verify-all": {"system": set(), "stepper": set(), "experiment": {"seed", "quick"}, "output": {"dir"}},
}


class Typed(dict):
    """Typed values of one section; ``lines`` maps keys to line numbers."""

    def __init__(self, values=(), lines=None):
        super().__init__(values)
        self.lines = dict(lines or {})

    def line(self, key):
        return self.lines.get(key)


def _typed_sections(raw, command: str) -> dict[str, Typed]:
    allowed = COMMAND_KEYS[command]
    out = {}
    for sec in SECTIONS:
        entries = raw.get(sec, {})
        typed = Typed()
        for key, e in entries.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]", e.lineno)
            if key not in allowed[sec]:
                raise ConfigError(f"key '{key}' in [{sec}] is not used by the '{command}' command", e.lineno)
            conv = SCHEMA[sec][key]
            try:
                typed[key] = conv(e.value) if conv is not str else e.value
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: expected {_TYPE_NAMES[conv]}, got {e.value!r} ({exc})", e.lineno) from None
            typed.lines[key] = e.lineno
        out[sec] = typed
    return out


def infer_command(raw) -> str:
    exp = raw.get("experiment", {})
    if "function" in exp:
        return "specfun-eval"
    if "kind" in exp:
        return "verify"
    if "init" in exp or ("N" in raw.get("system", {}) and "kind" not in raw.get("system", {})):
        return "toda"
    return "simulate"


# -- typed configurations ------------------------------------------------------


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "pdflow_output"
    record_every: int = 10
    path_csvs: int = 1


@dataclass(frozen=True)
class SimulateConfig:
    spec: sde.SystemSpec
    stepper: sde.StepperConfig
    T: float
    paths: int
    seed: int
    x0: np.ndarray
    functionals: tuple
    output: OutputConfig


@dataclass(frozen=True)
class VerifyConfig:
    experiment: verify.ExperimentConfig
    output: OutputConfig


@dataclass(frozen=True)
class SpecfunConfig:
    function: str
    args: dict
    output: OutputConfig


@dataclass(frozen=True)
class TodaConfig:
    n: int
    N: int
    lam: tuple | None
    T: float
    h: float
    seed: int
    init: str
    output: OutputConfig


@dataclass(frozen=True)
class VerifyAllConfig:
    quick: bool
    seed: int | None
    output: OutputConfig


def _output(sec: Typed, command: str) -> OutputConfig:
    kw = {k: sec[k] for k in ("dir", "record_every", "path_csvs") if k in sec}
    for k in ("record_every",):
        if k in kw and kw[k] < 1:
            raise ConfigError(f"[output] {k} must be positive", sec.line(k))
    if "path_csvs" in kw and kw["path_csvs"] < 0:
        raise ConfigError("[output] path_csvs must be non-negative", sec.line("path_csvs"))
    return OutputConfig(**kw)


def _constraint(exc: Exception, sec: Typed, keys: Sequence[str]) -> ConfigError:
    """Attach the first available line of ``keys`` to a constraint violation."""
    line = next((sec.line(k) for k in keys if sec.line(k) is not None), None)
    return ConfigError(f"constraint violation: {exc}", line)


def _parse_functionals(text: str, lineno) -> tuple:
    out = []
    for item in text.replace(",", " ").split():
        parts = item.split(":")
        try:
            kind = sde.FunctionalKind(parts[0].upper())
            idx = [int(p) for p in parts[1:]]
            if len(idx) > 2:
                raise ValueError
        except ValueError:
            raise ConfigError(f"bad functional {item!r}; use KIND[:i[:j]] with KIND in {[k.value for k in sde.FunctionalKind]}", lineno) from None
        out.append(sde.Functional(kind, *idx))
    return tuple(out)


def _simulate_config(t: dict[str, Typed]) -> SimulateConfig:
    sy, st, ex = t["system"], t["stepper"], t["experiment"]
    if "kind" not in sy:
        raise ConfigError("[system] kind is required for 'simulate'")
    try:
        kind = sde.SystemKind(sy["kind"].upper())
    except ValueError:
        raise ConfigError(f"unknown system kind {sy['kind']!r}; expected one of {[k.value for k in sde.SystemKind]}", sy.line("kind")) from None
    n = sy.get("n", 1)
    try:
        spec = sde.SystemSpec(kind, n, nu=sy.get("nu", 0.0), lam=tuple(sy.get("lambda", ())), nus=tuple(sy.get("nus", ())))
    except (ParameterError, ValueError) as exc:
        raise _constraint(exc, sy, ("lambda", "nu", "nus", "n", "kind")) from None
    try:
        stepper = sde.StepperConfig(**{k: (v.upper() if k == "scheme" else v) for k, v in st.items()})
    except (ParameterError, ValueError) as exc:
        raise _constraint(exc, st, ("scheme", "h", "eig_floor", "max_substeps")) from None
    T = ex.get("T", 1.0)
    if T < 0:
        raise ConfigError("[experiment] T must be non-negative", ex.line("T"))
    paths = ex.get("paths", 4000)
    if paths < 1:
        raise ConfigError("[experiment] paths must be positive", ex.line("paths"))
    r = spec.n_particles
    x0 = np.asarray(sy.get("x0", (1.0,)), dtype=float)
    if x0.size == 1:
        X0 = np.broadcast_to(x0[0] * np.eye(n), (r, n, n)).copy()
    elif x0.size == r * n * n:
        X0 = x0.reshape(r, n, n)
    else:
        raise ConfigError(f"[system] x0 needs 1 or {r * n * n} values (particles x n x n), got {x0.size}", sy.line("x0"))
    for i, X in enumerate(X0):
        if not np.allclose(X, X.T) or np.linalg.eigvalsh(0.5 * (X + X.T))[0] <= 0:
            raise ConfigError(f"[system] x0 particle {i} is not symmetric positive definite", sy.line("x0"))
    fns = _parse_functionals(ex["functionals"], ex.line("functionals")) if "functionals" in ex else ()
    for f in fns:
        top = f.i + (1 if f.kind is sde.FunctionalKind.INT_CROSS else 0)
        if not 0 <= top < r or (f.kind is sde.FunctionalKind.LOG_EIG and not 0 <= f.j < n):
            raise ConfigError(f"functional {f.kind.value}:{f.i}:{f.j} indexes outside {r} particles of size {n}", ex.line("functionals"))
    return SimulateConfig(spec, stepper, T, paths, ex.get("seed", 0), X0, fns, _output(t["output"], "simulate"))


def _verify_config(t: dict[str, Typed]) -> VerifyConfig:
    sy, st, ex = t["system"], t["stepper"], t["experiment"]
    if "kind" not in ex:
        raise ConfigError("[experiment] kind is required for 'verify'")
    try:
        kind = verify.ExperimentKind(ex["kind"].upper())
    except ValueError:
        raise ConfigError(f"unknown experiment kind {ex['kind']!r}", ex.line("kind")) from None
    kw = {}
    for key, name in (("n", "n"), ("N", "N"), ("nu", "nu"), ("lambda", "lam")):
        if key in sy:
            kw[name] = sy[key]
    if "h" in st:
        kw["h"] = st["h"]
    for key in ("seed", "paths", "T", "quick", "z_threshold", "ks_floor"):
        if key in ex:
            kw[key] = ex[key]
    params = {k: ex[k] for k in ("nu_vec", "y", "alpha") if k in ex}
    try:
        cfg = verify.ExperimentConfig(kind, params=params, **kw)
    except (ParameterError, ValueError) as exc:
        merged = Typed({**sy, **st, **ex}, {**sy.lines, **st.lines, **ex.lines})
        raise _constraint(exc, merged, ("lambda", "nu", "n", "N", "paths", "T", "h", "nu_vec", "y", "alpha", "kind")) from None
    return VerifyConfig(cfg, _output(t["output"], "verify"))


SPECFUN_FUNCTIONS = (
    "gamma_n", "power_fn", "laplacian_eigenvalue", "spherical_h", "bessel_K", "bessel_B",
    "macdonald", "c_s", "whittaker_psi", "stade", "whittaker_laplace", "dyson_max_cdf",
)


def _specfun_config(t: dict[str, Typed]) -> SpecfunConfig:
    sy, ex = t["system"], t["experiment"]
    name = {f.lower(): f for f in SPECFUN_FUNCTIONS}.get(ex["function"].lower(), ex["function"])
    if name not in SPECFUN_FUNCTIONS:
        raise ConfigError(f"unknown function {name!r}; expected one of {', '.join(SPECFUN_FUNCTIONS)}", ex.line("function"))
    need = {
        "gamma_n": ("s",), "power_fn": ("s", "X"), "laplacian_eigenvalue": ("s",), "spherical_h": ("s", "X"),
        "bessel_K": ("s", "V", "W"), "bessel_B": ("nu", "X"), "macdonald": ("s", "V", "W"), "c_s": ("s",),
        "whittaker_psi": ("lambda", "X"), "stade": ("s", "A", "lambda", "nu_vec"),
        "whittaker_laplace": ("B", "lambda", "nu_vec"), "dyson_max_cdf": ("nu_vec", "y"),
    }[name]
    args = {}
    for key in need:
        src = sy if key in ("nu", "lambda") else ex
        if key not in src:
            sec = "system" if src is sy else "experiment"
            raise ConfigError(f"function {name} needs [{sec}] {key}", ex.line("function"))
        args[key] = src[key]
    args["n"] = sy.get("n")
    args["seed"] = ex.get("seed", 0)
    args["paths"] = ex.get("paths", 4000)
    return SpecfunConfig(name, args, _output(t["output"], "specfun-eval"))


def _toda_config(t: dict[str, Typed]) -> TodaConfig:
    sy, st, ex = t["system"], t["stepper"], t["experiment"]
    n, N = sy.get("n", 2), sy.get("N", 3)
    if n < 1 or N < 2:
        raise ConfigError("toda needs n >= 1 and N >= 2", sy.line("N") or sy.line("n"))
    init = ex.get("init", "critical" if "lambda" in sy else "random").lower()
    if init not in ("critical", "random"):
        raise ConfigError("[experiment] init must be 'critical' or 'random'", ex.line("init"))
    lam = sy.get("lambda")
    if init == "critical" and (lam is None or len(lam) != N):
        raise ConfigError(f"init=critical needs [system] lambda with N={N} values", sy.line("lambda") or ex.line("init"))
    h = st.get("h", 1e-3)
    T = ex.get("T", 1.0)
    if not h > 0 or T < 0:
        raise ConfigError("toda needs h > 0 and T >= 0", st.line("h") or ex.line("T"))
    return TodaConfig(n, N, lam, T, h, ex.get("seed", 0), init, _output(t["output"], "toda"))


def _verify_all_config(t: dict[str, Typed]) -> VerifyAllConfig:
    ex = t["experiment"]
    return VerifyAllConfig(ex.get("quick", False), ex.get("seed"), _output(t["output"], "verify-all"))


_BUILDERS = {
    "simulate": _simulate_config,
    "verify": _verify_config,
    "specfun-eval": _specfun_config,
    "toda": _toda_config,
    "verify-all": _verify_all_config,
}


def parse_config(text: str, command: str | None = None):
    """Parse and validate configuration text for ``command``.

    When ``command`` is ``None`` it is inferred from the keys present.
    Returns one of the typed ``*Config`` objects with defaults applied.
    """
    raw = parse_ini(text)
    command = command or infer_command(raw)
    if command not in _BUILDERS:
        raise ConfigError(f"unknown command {command!r}")
    return _BUILDERS[command](_typed_sections(raw, command))


# -- commands ------------------------------------------------------------------


@dataclass
class Outcome:
    """Artifacts (file name -> text) and the exit status of a command."""

    files: dict = field(default_factory=dict)
    status: int = EXIT_PASS


def _fmt(v) -> str:
    return repr(float(v))


def run_simulate(cfg: SimulateConfig) -> Outcome:
    rng = RngStream(cfg.seed, 0)
    keep = min(cfg.output.path_csvs, cfg.paths)
    sample = sde.simulate(
        cfg.spec, cfg.x0, cfg.T, rng, cfg.stepper, cfg.paths,
        record_every=cfg.output.record_every if keep else None, functionals=cfg.functionals,
    )
    buf = io.StringIO()
    buf.write(f"# {SIMULATE_SCHEMA}\n")
    buf.write("path,quantity,value\n")
    r = cfg.spec.n_particles
    for p in range(cfg.paths):
        for i in range(r):
            X = sample.terminal[p, i]
            buf.write(f"{p},logdet_{i},{_fmt(np.linalg.slogdet(X)[1])}\n")
            buf.write(f"{p},trace_{i},{_fmt(np.trace(X))}\n")
        for f in cfg.functionals:
            v = np.asarray(sample.functionals[f][p])
            buf.write(f"{p},{_functional_name(f)},{' '.join(_fmt(x) for x in v.ravel())}\n")
    lines = [
        f"{SIMULATE_SCHEMA} summary",
        f"system: {cfg.spec.kind.value} n={cfg.spec.n} particles={r}",
        f"paths={cfg.paths} T={cfg.T!r} h={cfg.stepper.h!r} scheme={cfg.stepper.scheme.value} seed={cfg.seed}",
        f"rng: {sample.rng_provenance}",
        f"substep events: {sample.substep_events}",
    ]
    for i in range(r):
        ld = np.linalg.slogdet(sample.terminal[:, i])[1]
        lines.append(f"terminal log det particle {i}: mean={ld.mean():.6g} sd={ld.std(ddof=1) if ld.size > 1 else 0.0:.6g}")
    for f in cfg.functionals:
        v = np.asarray(sample.functionals[f], dtype=float).reshape(cfg.paths, -1)
        lines.append(f"{_functional_name(f)}: mean={' '.join(f'{x:.6g}' for x in v.mean(axis=0))}")
    files = {"results.csv": buf.getvalue(), "report.txt": "\n".join(lines) + "\n"}
    for p in range(keep):
        fh = io.StringIO()
        sde.write_path_csv(fh, sample, p)
        files[f"path_{p:04d}.csv"] = fh.getvalue()
    return Outcome(files)


def _functional_name(f) -> str:
    return f"{f.kind.value}:{f.i}:{f.j}" if f.kind is sde.FunctionalKind.LOG_EIG else f"{f.kind.value}:{f.i}"


def _sym_from(M, n):
    M = np.asarray(M, dtype=float)
    if n is not None and M.shape != (n, n):
        raise ParameterError(f"matrix of shape {M.shape} does not match n={n}")
    return M


def _specfun_rows(cfg: SpecfunConfig) -> list:
    a = cfg.args
    name = cfg.function
    n = a.get("n")
    rng = RngStream(a["seed"], 0)
    rows = []
    if name == "gamma_n":
        s = np.asarray(a["s"])
        lv = specfun.log_gamma_n(s if s.size > 1 else float(s[0]), n)
        rows.append(("log_gamma_n", s, lv, 0.0))
    elif name == "laplacian_eigenvalue":
        rows.append((name, a["s"], specfun.laplacian_eigenvalue(a["s"]), 0.0))
    elif name == "c_s":
        v, e = specfun.c_s_quadrature(a["s"])
        rows.append(("c_s_quadrature", a["s"], v, e))
        rows.append(("c_s_formula", a["s"], specfun.c_s_formula(a["s"]), 0.0))
    elif name in ("power_fn", "spherical_h", "bessel_B"):
        for X in a["X"]:
            X = _sym_from(X, n)
            if name == "power_fn":
                rows.append((name, np.concatenate([a["s"], X.ravel()]), specfun.power_fn(a["s"], X), 0.0))
            elif name == "spherical_h":
                v, e = specfun.spherical_h(a["s"], X, rng=rng, n_samples=a["paths"])
                rows.append((name, np.concatenate([a["s"], X.ravel()]), v, e))
            else:
                v, e = specfun.bessel_B(a["nu"], X)
                rows.append((name, np.concatenate([[a["nu"]], X.ravel()]), v, e))
    elif name in ("bessel_K", "macdonald"):
        if len(a["V"]) != len(a["W"]):
            raise ParameterError("V and W must list the same number of matrices")
        for V, W in zip(a["V"], a["W"]):
            V, W = _sym_from(V, n), _sym_from(W, n)
            s = a["s"] if len(a["s"]) > 1 else a["s"][0]
            inputs = np.concatenate([np.ravel(s), V.ravel(), W.ravel()])
            if name == "macdonald":
                if V.shape != (1, 1):
                    raise ParameterError("macdonald is the n = 1 oracle")
                rows.append((name, inputs, specfun.macdonald_bessel_n1(float(s), V[0, 0], W[0, 0]), 0.0))
            else:
                v, e = specfun.bessel_K(s, V, W)
                rows.append((name, inputs, v, e))
    elif name == "whittaker_psi":
        X = [_sym_from(x, n) for x in a["X"]]
        v, e = specfun.whittaker_psi(a["lambda"], X)
        rows.append((name, np.concatenate([a["lambda"]] + [x.ravel() for x in X]), v, e))
    elif name == "stade":
        s = a["s"][0]
        v, e = specfun.stade_integral(s, a["A"], a["lambda"], a["nu_vec"])
        inputs = np.concatenate([[s, a["A"]], a["lambda"], a["nu_vec"]])
        rows.append(("stade_integral", inputs, v, e))
        rows.append(("stade_closed_form", inputs, specfun.stade_closed_form(s, a["A"], a["lambda"], a["nu_vec"]), 0.0))
    elif name == "whittaker_laplace":
        v, e = specfun.whittaker_density_laplace(a["B"], a["lambda"], a["nu_vec"])
        rows.append((name, np.concatenate([[a["B"]], a["lambda"], a["nu_vec"]]), v, e))
    elif name == "dyson_max_cdf":
        rows.append((name, np.concatenate([a["nu_vec"], a["y"]]), verify.dyson_max_cdf(a["nu_vec"], a["y"]), 0.0))
    for r in rows:
        specfun.check_finite(float(r[2]), r[0])
    return rows


def run_specfun(cfg: SpecfunConfig) -> Outcome:
    rows = _specfun_rows(cfg)
    buf = io.StringIO()
    specfun.write_results_csv(buf, rows)
    lines = ["pdflow-specfun v1 summary"] + [f"{name}: value={float(v)!r} error={float(e)!r}" for name, _, v, e in rows]
    return Outcome({"results.csv": buf.getvalue(), "report.txt": "\n".join(lines) + "\n"})


def run_toda(cfg: TodaConfig) -> Outcome:
    g = RngStream(cfg.seed, 0).generator()
    X = np.array([random_pd(cfg.n, g, 0.3) for _ in range(cfg.N)])
    if cfg.init == "critical":
        state = toda.top_row_state(toda.critical_point(cfg.lam, X), cfg.lam)
    else:
        state = toda.TodaState(X, np.array([0.3 * sym(g.standard_normal((cfg.n, cfg.n))) for _ in range(cfg.N)]))
    traj = toda.integrate_rk4(state, cfg.T, cfg.h, record_every=cfg.output.record_every)
    buf = io.StringIO()
    toda.write_trajectory_csv(buf, traj)
    C0 = toda.constants_of_motion(traj.state(0), 3)
    C1 = toda.constants_of_motion(traj.state(-1), 3)
    lines = [
        f"{toda.TRAJECTORY_SCHEMA} summary",
        f"N={cfg.N} n={cfg.n} T={cfg.T!r} h={cfg.h!r} init={cfg.init} seed={cfg.seed}",
        "relative change of constants between the first and last recorded state:",
    ]
    for k, (a, b) in enumerate(zip(C0, C1), start=1):
        rel = np.linalg.norm(b - a) / max(np.linalg.norm(a), 1e-300)
        tr = abs(np.trace(b) - np.trace(a)) / max(abs(np.trace(a)), 1e-300)
        lines.append(f"  C_{k}: matrix {rel:.3e}  trace {tr:.3e}")
    return Outcome({"results.csv": buf.getvalue(), "report.txt": "\n".join(lines) + "\n"})


def _verify_outcome(results: dict, quick: bool, acceptance: bool) -> Outcome:
    reports = [r for rs in results.values() for r in rs]
    text = verify.report_text(results, quick=quick)
    ok = all(verify.experiment_passed(rs) for rs in results.values())
    return Outcome({"results.csv": verify.results_csv(reports), "report.txt": text}, EXIT_PASS if ok else EXIT_FAIL)


def run_verify(cfg: VerifyConfig, progress=None) -> Outcome:
    reports = verify.run_experiment(cfg.experiment)
    return _verify_outcome({cfg.experiment.kind: reports}, cfg.experiment.quick, False)


def run_verify_all(cfg: VerifyAllConfig, progress=None) -> Outcome:
    overrides = None
    if cfg.seed is not None:
        overrides = {k: {"seed": cfg.seed + i} for i, k in enumerate(verify.ExperimentKind)}
    results = verify.run_all(quick=cfg.quick, overrides=overrides, progress=progress)
    return _verify_outcome(results, cfg.quick, True)


_RUNNERS = {
    "simulate": run_simulate,
    "specfun-eval": run_specfun,
    "toda": run_toda,
    "verify": run_verify,
    "verify-all": run_verify_all,
}


# -- entry point ---------------------------------------------------------------


def _prepare_dir(path: str) -> str:
    """Create ``path`` (one level only: its parent must exist) and check it is writable."""
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigError(f"output directory {path!r}: parent {parent!r} does not exist")
    try:
        if not os.path.isdir(path):
            os.mkdir(path)
    except OSError as exc:
        raise ConfigError(f"output directory {path!r} cannot be created: {exc.strerror or exc}") from None
    if not os.path.isdir(path) or not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path!r} is not writable")
    return path


def _write_all(outdir: str, files: dict) -> None:
    for name in sorted(files):
        verify.atomic_write(os.path.join(outdir, name), files[name])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdflow", description="Diffusions and integrable flows on the positive definite cone.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, needs_config in (("simulate", True), ("specfun-eval", True), ("toda", True), ("verify", True), ("verify-all", False)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=needs_config, help="INI configuration file")
        sp.add_argument("--output-dir", help="directory for results.csv and report.txt (overrides [output] dir)")
        sp.add_argument("--seed", type=int, help="seed override")
        if name == "verify":
            sp.add_argument("--kind", required=True, help="experiment kind (must match [experiment] kind if given)")
        if name == "verify-all":
            sp.add_argument("--quick", action="store_true", help="reduced sample sizes; not acceptance results")
        sp.add_argument("-q", "--quiet", action="store_true", help="no progress output on stderr")
    return p


def _load(args) -> object:
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc.strerror or exc}") from None
    if args.command == "verify":
        raw = parse_ini(text)
        exp = raw.setdefault("experiment", {})
        if "kind" in exp and exp["kind"].value.upper() != args.kind.upper():
            raise ConfigError(f"--kind {args.kind} does not match [experiment] kind {exp['kind'].value}", exp["kind"].lineno)
        exp.setdefault("kind", Entry(args.kind, None))
        if args.seed is not None:
            exp["seed"] = Entry(str(args.seed), None)
        return _BUILDERS["verify"](_typed_sections(raw, "verify"))
    raw = parse_ini(text)
    if args.seed is not None:
        raw.setdefault("experiment", {})["seed"] = Entry(str(args.seed), None)
    if args.command == "verify-all" and args.quick:
        raw.setdefault("experiment", {})["quick"] = Entry("true", None)
    return _BUILDERS[args.command](_typed_sections(raw, args.command))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    err = sys.stderr
    try:
        cfg = _load(args)
        outdir = _prepare_dir(args.output_dir or cfg.output.dir)
    except (ConfigError, ParameterError) as exc:
        print(f"pdflow: configuration error: {exc}", file=err)
        return EXIT_USAGE
    progress = None if args.quiet else (lambda msg: print(msg, file=err, flush=True))
    try:
        runner = _RUNNERS[args.command]
        outcome = runner(cfg, progress) if args.command.startswith("verify") else runner(cfg)
    except (verify.ExperimentError, PDFlowError, np.linalg.LinAlgError, FloatingPointError) as exc:
        cause = exc.cause if isinstance(exc, verify.ExperimentError) else exc
        usage = isinstance(cause, (ParameterError, ConfigError))
        text = (
            f"pdflow {args.command}: {'parameter' if usage else 'numerical'} failure\n"
            f"{type(exc).__name__}: {exc}\n\n" + "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
        )
        try:
            _write_all(outdir, {"report.txt": text})
        except OSError:
            pass
        print(f"pdflow: {exc}", file=err)
        return EXIT_USAGE if usage else EXIT_NUMERIC
    try:
        _write_all(outdir, outcome.files)
    except OSError as exc:
        print(f"pdflow: cannot write output: {exc}", file=err)
        return EXIT_USAGE
    if progress:
        progress(f"wrote {', '.join(sorted(outcome.files))} to {outdir}")
    return outcome.status
