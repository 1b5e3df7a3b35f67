"""Lebesgue norms with constant and variable exponent, exponent checkers, distribution function.

The variable norm is the Luxemburg norm of the modular::

    I(f/lam) = dx^n * sum_j |f(x_j)/lam|^p(x_j)
    ||f||_{p(.)} = inf { lam > 0 : I(f/lam) <= 1 }

computed by bracketing and bisection.  The exponent checkers sample the
local log-Hoelder condition, the decay condition at infinity, and Nekvinda's
integral condition, and judge each by stability under refinement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConvergenceError, ParameterError
from .grid import GridFunction, GridSpec

__all__ = [
    "ExponentFunction",
    "NormResult",
    "StabilityCheck",
    "NekvindaCheck",
    "exponent",
    "parse_exponent",
    "load_exponent_csv",
    "modular",
    "vlp_norm",
    "constant_norm",
    "conjugate_exponent",
    "check_log_holder_local",
    "check_log_holder_infinity",
    "check_nekvinda",
    "nekvinda_constant",
    "distribution_measure",
]

BISECT_RTOL = 1e-12
MAX_ITER = 200
STABILITY = 1.5


@dataclass(frozen=True, eq=False)
class ExponentFunction:
    """Variable exponent ``p(x)`` with declared bounds ``1 < p_minus <= p <= p_plus < inf``.

    ``evaluate`` maps points of shape ``(..., n)`` to reals.  ``jumps`` lists
    points where ``p`` is discontinuous, so checkers can probe across them.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    p_minus: float
    p_plus: float
    p_infinity: float | None = None
    identifier: str = "custom"
    params: dict = field(default_factory=dict)
    jumps: tuple = ()

    def __post_init__(self):
        if not (1 < self.p_minus <= self.p_plus < math.inf):
            raise ParameterError(
                f"exponent bounds must satisfy 1 < p_minus <= p_plus < inf, "
                f"got ({self.p_minus}, {self.p_plus})"
            )

    def __call__(self, x):
        return np.asarray(self.evaluate(np.asarray(x, dtype=float)), dtype=float)

    def on_grid(self, spec: GridSpec) -> np.ndarray:
        vals = np.broadcast_to(self(spec.nodes()), spec.shape)
        tol = 1e-12 * self.p_plus
        if not np.all(np.isfinite(vals)):
            raise ParameterError(f"exponent {self.identifier} is not finite on the grid")
        if vals.min() < self.p_minus - tol or vals.max() > self.p_plus + tol:
            raise ParameterError(
                f"exponent {self.identifier} leaves [{self.p_minus}, {self.p_plus}] on the grid "
                f"(range [{vals.min()}, {vals.max()}])"
            )
        return vals

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def to_dict(self) -> dict:
        return {"id": self.identifier, "params": self.params, "p_minus": self.p_minus,
                "p_plus": self.p_plus, "p_infinity": self.p_infinity}


def _radius(x):
    return np.sqrt(np.sum(np.asarray(x, float) ** 2, axis=-1))


def exponent(kind: str, **params) -> ExponentFunction:
    """Reference exponents.

    ``constant(p)``, ``log-decay(p_inf, amplitude=1)`` with
    ``p = p_inf + amplitude / log(e + |x|)``, ``step(p1, p2)`` jumping at
    ``x_1 = 0``, ``loglog(p_inf)`` with ``p = p_inf + 1/log(e + log(e + |x|))``,
    and ``plateau(p_inf, height=0.5)`` with ``p = p_inf + height*min(1, |x|)``.
    """
    if kind == "constant":
        p = float(params["p"])
        return ExponentFunction(lambda x: np.full(np.shape(x)[:-1], p), p, p, p, "constant", {"p": p})
    if kind == "log-decay":
        pinf = float(params["p_inf"])
        amp = float(params.get("amplitude", 1.0))
        return ExponentFunction(lambda x: pinf + amp / np.log(np.e + _radius(x)),
                                pinf, pinf + amp, pinf, "log-decay", {"p_inf": pinf, "amplitude": amp})
    if kind == "step":
        p1, p2 = float(params["p1"]), float(params["p2"])
        n = int(params.get("n", 1))
        return ExponentFunction(lambda x: np.where(np.asarray(x)[..., 0] < 0, p1, p2),
                                min(p1, p2), max(p1, p2), None, "step", {"p1": p1, "p2": p2},
                                jumps=(tuple([0.0] * n),))
    if kind == "loglog":
        pinf = float(params["p_inf"])
        return ExponentFunction(lambda x: pinf + 1.0 / np.log(np.e + np.log(np.e + _radius(x))),
                                pinf, pinf + 1.0, pinf, "loglog", {"p_inf": pinf})
    if kind == "plateau":
        pinf = float(params["p_inf"])
        h = float(params.get("height", 0.5))
        return ExponentFunction(lambda x: pinf + h * np.minimum(1.0, _radius(x)),
                                pinf, pinf + h, pinf, "plateau", {"p_inf": pinf, "height": h})
    raise ParameterError(f"unknown exponent kind {kind!r}")


def load_exponent_csv(path, spec: GridSpec, p_infinity: float | None = None) -> ExponentFunction:
    """Tabulated exponent from rows ``node, p`` (flat row-major node index).

    Off-grid points take the value of the nearest node.
    """
    table = np.full(spec.size, np.nan)
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("node", "index", "#"):
                continue
            table[int(row[0])] = float(row[1])
    if np.isnan(table).any():
        raise ParameterError(f"{path}: {int(np.isnan(table).sum())} grid nodes have no exponent")
    table = table.reshape(spec.shape)

    def evaluate(x):
        idx = np.clip(np.rint((np.asarray(x) + spec.L) / spec.dx).astype(int), 0, spec.N - 1)
        return table[tuple(idx[..., a] for a in range(spec.n))]

    return ExponentFunction(evaluate, float(table.min()), float(table.max()), p_infinity,
                            "tabulated", {"path": str(path)})


def parse_exponent(text: str, spec: GridSpec | None = None) -> ExponentFunction:
    """Parse ``constant:p``, ``log-decay:p_inf``, ``step:p1,p2`` or a CSV path."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "constant":
            return exponent("constant", p=float(arg))
        if kind == "log-decay":
            return exponent("log-decay", p_inf=float(arg))
        if kind == "loglog":
            return exponent("loglog", p_inf=float(arg))
        if kind == "step":
            p1, p2 = (float(v) for v in arg.split(","))
            return exponent("step", p1=p1, p2=p2, n=spec.n if spec else 1)
    except ValueError as exc:
        raise ParameterError(f"cannot parse exponent {text!r}: {exc}") from None
    if Path(text).exists():
        if spec is None:
            raise ParameterError("a grid is needed to load a tabulated exponent")
        return load_exponent_csv(text, spec)
    raise ParameterError(f"unknown exponent {text!r}")


# ---------------------------------------------------------------------------
# modular and norms


def _modular_values(absf: np.ndarray, lam: float, pvals: np.ndarray, cell: float) -> float:
    return float(cell * np.sum((absf / lam) ** pvals))


def modular(f: GridFunction, lam: float, p: ExponentFunction) -> float:
    """``dx^n * sum |f/lam|^p(x)``."""
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    return _modular_values(np.abs(f.values), lam, p.on_grid(f.spec), f.spec.cell_volume)


@dataclass(frozen=True)
class NormResult:
    value: float
    iterations: int
    residual: float

    def to_dict(self):
        return {"value": self.value, "iterations": self.iterations, "residual": self.residual}


def vlp_norm(f: GridFunction, p: ExponentFunction, pvals: np.ndarray | None = None) -> NormResult:
    """Luxemburg norm: smallest ``lam`` with modular ``<= 1``.

    Brackets from ``max|f| + eps`` by doubling or halving, then bisects to
    relative width 1e-12 and returns the upper end.
    """
    absf = np.abs(f.values)
    if not np.all(np.isfinite(absf)):
        raise ParameterError("vlp_norm of a non-finite function")
    peak = float(absf.max())
    if peak == 0.0:
        return NormResult(0.0, 0, 0.0)
    pvals = p.on_grid(f.spec) if pvals is None else pvals
    cell = f.spec.cell_volume

    def I(lam):
        return _modular_values(absf, lam, pvals, cell)

    it = 0
    lam = peak + np.finfo(float).eps * peak
    if I(lam) > 1:
        lo, hi = lam, 2 * lam
        while I(hi) > 1:
            lo, hi = hi, 2 * hi
            it += 1
            if it > MAX_ITER:
                raise ConvergenceError("norm bracket did not close while doubling")
    else:
        lo, hi = lam / 2, lam
        while I(lo) <= 1:
            lo, hi = lo / 2, lo
            it += 1
            if it > MAX_ITER:
                raise ConvergenceError("norm bracket did not close while halving")
    while hi - lo > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if I(mid) <= 1:
            hi = mid
        else:
            lo = mid
        it += 1
        if it > MAX_ITER:
            raise ConvergenceError(f"bisection exceeded {MAX_ITER} iterations")
    return NormResult(hi, it, abs(I(hi) - 1.0))


def constant_norm(f: GridFunction, p: float) -> float:
    """``(dx^n * sum |f|^p)^(1/p)``."""
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p!r}")
    return float((f.spec.cell_volume * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def _conj(t):
    return t / (t - 1.0)


def conjugate_exponent(p: ExponentFunction) -> ExponentFunction:
    """``p'(x) = p(x)/(p(x) - 1)``; bounds swap roles."""
    ev = p.evaluate
    pinf = None if p.p_infinity is None else _conj(p.p_infinity)
    return ExponentFunction(lambda x: _conj(np.asarray(ev(x), float)), _conj(p.p_plus),
                            _conj(p.p_minus), pinf, f"conj({p.identifier})", dict(p.params),
                            p.jumps)


# ---------------------------------------------------------------------------
# exponent conditions


@dataclass(frozen=True)
class StabilityCheck:
    c_est: float
    per_level: tuple
    stability: float
    passed: bool

    def to_dict(self):
        return {"c_est": self.c_est, "per_level": list(self.per_level),
                "stability": self.stability, "pass": self.passed}


def _ratio(prev, last):
    if last <= 1e-14:
        return 1.0
    return math.inf if prev <= 1e-14 else last / prev


def _directions(rng, count, n):
    if n == 1:
        return rng.choice([-1.0, 1.0], size=(count, 1))
    t = rng.uniform(0, 2 * np.pi, count)
    return np.stack([np.cos(t), np.sin(t)], axis=-1)


def check_log_holder_local(p: ExponentFunction, spec: GridSpec, pair_samples: int = 1000,
                           seed: int = 0, levels: int = 2, shrink: float = 1e-4,
                           threshold: float = STABILITY) -> StabilityCheck:
    """Sample ``|p(x) - p(y)| log(e + 1/|x - y|)``.

    Level 0 uses pair distances from ``dx`` up to ``2L``; each further level
    doubles the pairs and shrinks the smallest distance by ``shrink``.  Pairs
    straddling every declared jump are always included.
    """
    if pair_samples < 1000:
        raise ParameterError("check_log_holder_local needs at least 1000 pairs")
    per_level = []
    n = spec.n
    for r in range(levels):
        rng = np.random.default_rng(seed)
        count = pair_samples * 2**r
        dmin = spec.dx * shrink**r
        d = np.geomspace(dmin, 2 * spec.L, count)
        x = rng.uniform(-spec.L, spec.L, size=(count, n))
        u = _directions(rng, count, n)
        y = x + d[:, None] * u
        vals = np.abs(p(x) - p(y)) * np.log(np.e + 1.0 / d)
        best = float(vals.max())
        for jump in p.jumps:
            c = np.asarray(jump, float)[None, :]
            xs, ys = c - 0.5 * d[:, None] * u, c + 0.5 * d[:, None] * u
            best = max(best, float((np.abs(p(xs) - p(ys)) * np.log(np.e + 1.0 / d)).max()))
        per_level.append(best)
    stab = _ratio(per_level[-2], per_level[-1]) if levels > 1 else 1.0
    return StabilityCheck(per_level[-1], tuple(per_level), stab, bool(stab <= threshold))


def check_log_holder_infinity(p: ExponentFunction, spec: GridSpec, p_inf: float | None = None,
                              samples: int = 1000, seed: int = 0, levels: int = 2,
                              growth: float = 1e4, threshold: float = STABILITY) -> StabilityCheck:
    """Sample ``|p(x) - p_inf| log(e + |x|)`` on radii up to ``L * growth^r`` at level ``r``."""
    p_inf = p.p_infinity if p_inf is None else p_inf
    if p_inf is None:
        raise ParameterError(f"exponent {p.identifier} declares no p_infinity")
    per_level = []
    for r in range(levels):
        rng = np.random.default_rng(seed)
        count = samples * 2**r
        radii = np.concatenate([[0.0], np.geomspace(1e-3, spec.L * growth**r, count)])
        x = radii[:, None] * _directions(rng, radii.size, spec.n)
        vals = np.abs(p(x) - p_inf) * np.log(np.e + radii)
        per_level.append(float(vals.max()))
    stab = _ratio(per_level[-2], per_level[-1]) if levels > 1 else 1.0
    return StabilityCheck(per_level[-1], tuple(per_level), stab, bool(stab <= threshold))


@dataclass(frozen=True)
class NekvindaCheck:
    integral_est: float
    partials: tuple
    increments: tuple
    passed: bool

    def to_dict(self):
        return {"integral_est": self.integral_est, "partials": list(self.partials),
                "increments": list(self.increments), "pass": self.passed}


def check_nekvinda(p: ExponentFunction, spec: GridSpec, c: float, p_inf: float | None = None,
                   tol: float = 1e-3) -> NekvindaCheck:
    """Grid quadrature of ``|p - p_inf| c^(1/|p - p_inf|)``.

    Partial integrals over ``[-L', L']^n`` for ``L' = L/8, L/4, L/2, L``; the
    box is finite, so only Cauchy behaviour of the partials is reported.
    """
    if not 0 < c < 1:
        raise ParameterError(f"c must lie in (0, 1), got {c!r}")
    p_inf = p.p_infinity if p_inf is None else p_inf
    if p_inf is None:
        raise ParameterError(f"exponent {p.identifier} declares no p_infinity")
    gap = np.abs(p.on_grid(spec) - p_inf)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        integrand = np.where(gap > 0, gap * c ** (1.0 / np.where(gap > 0, gap, 1.0)), 0.0)
    box = np.max(np.abs(spec.nodes()), axis=-1)
    partials = tuple(
        float(spec.cell_volume * integrand[box <= spec.L / 2**j + 1e-12].sum())
        for j in (3, 2, 1, 0)
    )
    inc = tuple(b - a for a, b in zip(partials, partials[1:]))
    return NekvindaCheck(partials[-1], partials, inc, bool(abs(inc[-1]) <= tol))


def nekvinda_constant(c_est: float, n: int, margin: float = 3.0) -> float:
    """A ``c`` for the integral condition from a decay constant ``c_est``.

    ``|p - p_inf| <= C/log(e+|x|)`` gives ``c^(1/|p-p_inf|) <= (e+|x|)^(log(c)/C)``,
    integrable once ``log(c) < -n C``; ``margin`` extra decay keeps the
    partial integrals Cauchy on desk-sized boxes.
    """
    return math.exp(-(n + margin) * max(c_est, 1e-12))


def distribution_measure(f: GridFunction, lam: float) -> float:
    """``dx^n * #{j : |f(x_j)| > lam}``."""
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    return float(f.spec.cell_volume * np.count_nonzero(np.abs(f.values) > lam))
