"""Symbols a(x, xi), a reference catalog, and sampling certifiers for symbol classes.

Two classes are certified:

* Hormander ``S^m_{rho,delta}``: for every tested pair of multi-indices,
  ``|d_xi^alpha d_x^beta a| <= C (1+|xi|)^(m - rho|alpha| + delta|beta|)``.
* Miyachi ``S^m_{rho,delta}(kappa, kappa')``: finitely many derivatives plus
  Hoelder-type first/second differences in x (step h) and xi (step eta).

Membership is *witnessed*, not proved: each constant is a supremum of sampled
ratios, recomputed on nested sample sets of growing frequency range.  The
ratio between the last two levels is the stability factor.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import CapabilityError, CatalogError, NormUndefinedError, ParameterError

__all__ = [
    "MultiIndex",
    "multi_indices",
    "Symbol",
    "HormanderSpec",
    "MiyachiSpec",
    "SamplingPlan",
    "CertificateReport",
    "InclusionResult",
    "CATALOG",
    "catalog_symbol",
    "eval_derivative",
    "certify_hormander",
    "certify_miyachi",
    "miyachi_norm",
    "check_inclusion",
]

MultiIndex = tuple  # tuple of n nonnegative ints

FD_MAX_ORDER = 4
FD_BASE_STEP = 1e-4
# first-order steps per total derivative order, each near the rounding/truncation balance
FD_STEPS = {1: FD_BASE_STEP, 2: 5e-4, 3: 4e-3, 4: 1.2e-2}
DEFAULT_STABILITY = 1.5
DEFAULT_INCLUSION_CONST = 10.0


def multi_indices(n: int, max_order: int, exact: bool = False) -> Iterator[MultiIndex]:
    """All multi-indices in ``n`` variables with order <= max_order (or == if exact)."""
    for alpha in itertools.product(range(max_order + 1), repeat=n):
        s = sum(alpha)
        if s == max_order or (not exact and s <= max_order):
            yield alpha


def _order(alpha) -> int:
    return int(sum(alpha))


def _check_index(alpha, n, name):
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n or any(a < 0 for a in alpha):
        raise ParameterError(f"{name} must be {n} nonnegative integers, got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# exact derivatives for products of monomials and powers of (1 + |v|^2)


class _PowerPoly:
    """Finite sum of ``c * v^e * (1 + |v|^2)^p`` in ``n`` variables."""

    def __init__(self, n: int, terms: dict):
        self.n = n
        self.terms = {k: c for k, c in terms.items() if c != 0}
        self._cache: dict = {}

    def diff(self, i: int) -> "_PowerPoly":
        out: dict = {}
        for (e, p), c in self.terms.items():
            if e[i] > 0:
                e2 = e[:i] + (e[i] - 1,) + e[i + 1:]
                out[(e2, p)] = out.get((e2, p), 0.0) + c * e[i]
            if p != 0:
                e2 = e[:i] + (e[i] + 1,) + e[i + 1:]
                out[(e2, p - 1)] = out.get((e2, p - 1), 0.0) + 2.0 * c * p
        return _PowerPoly(self.n, out)

    def derivative(self, alpha) -> "_PowerPoly":
        alpha = tuple(alpha)
        if alpha not in self._cache:
            poly = self
            for i, a in enumerate(alpha):
                for _ in range(a):
                    poly = poly.diff(i)
            self._cache[alpha] = poly
        return self._cache[alpha]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        s = 1.0 + np.sum(v * v, axis=-1)
        out = np.zeros(v.shape[:-1])
        for (e, p), c in self.terms.items():
            t = c * s**p if p != 0 else np.full(v.shape[:-1], c)
            for i, ei in enumerate(e):
                if ei:
                    t = t * v[..., i] ** ei
            out = out + t
        return out


def _power(n: int, p: float, mono=None) -> _PowerPoly:
    e = tuple(mono) if mono is not None else (0,) * n
    return _PowerPoly(n, {(e, float(p)): 1.0})


# ---------------------------------------------------------------------------
# symbols


@dataclass(frozen=True, eq=False)
class Symbol:
    """A symbol ``a(x, xi)`` on ``R^n x R^n``.

    ``evaluate(x, xi)`` takes arrays of shape ``(..., n)`` (broadcastable) and
    returns complex values of the broadcast shape.  ``derivative(alpha, beta,
    x, xi)`` optionally returns ``d_xi^alpha d_x^beta a`` exactly for
    ``|alpha| <= order_xi`` and ``|beta| <= order_x``.
    """

    n: int
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    identifier: str
    params: dict = field(default_factory=dict)
    derivative: Callable | None = None
    order_xi: int = 0
    order_x: int = 0
    x_independent: bool = False

    def __call__(self, x, xi):
        return self.evaluate(x, xi)

    def has_exact(self, alpha, beta) -> bool:
        return (self.derivative is not None and _order(alpha) <= self.order_xi
                and _order(beta) <= self.order_x)

    def scaled(self, c: complex) -> "Symbol":
        """The symbol ``c * a``."""
        ev, der = self.evaluate, self.derivative
        return Symbol(
            self.n,
            lambda x, xi: c * ev(x, xi),
            f"{c!r}*{self.identifier}",
            {**self.params, "scale": c},
            (lambda al, be, x, xi: c * der(al, be, x, xi)) if der else None,
            self.order_xi,
            self.order_x,
            self.x_independent,
        )

    def __add__(self, other: "Symbol") -> "Symbol":
        if not isinstance(other, Symbol):
            return NotImplemented
        if other.n != self.n:
            raise ParameterError("cannot add symbols of different dimension")
        e1, e2, d1, d2 = self.evaluate, other.evaluate, self.derivative, other.derivative
        both = d1 is not None and d2 is not None
        return Symbol(
            self.n,
            lambda x, xi: e1(x, xi) + e2(x, xi),
            f"({self.identifier}+{other.identifier})",
            {},
            (lambda al, be, x, xi: d1(al, be, x, xi) + d2(al, be, x, xi)) if both else None,
            min(self.order_xi, other.order_xi) if both else 0,
            min(self.order_x, other.order_x) if both else 0,
            self.x_independent and other.x_independent,
        )

    def __mul__(self, c):
        if isinstance(c, (int, float, complex, np.number)):
            return self.scaled(c)
        return NotImplemented

    __rmul__ = __mul__


def _joint(x, xi, values):
    shape = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
    return np.broadcast_to(np.asarray(values, dtype=np.complex128), shape)


def _separable(n, ident, params, xi_part: _PowerPoly, x_part: _PowerPoly | None = None,
               order: int = 4) -> Symbol:
    """``a(x, xi) = X(x) * Xi(xi)`` with exact derivatives from the factors."""

    def evaluate(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        xv = 1.0 if x_part is None else x_part(x)
        return _joint(x, xi, np.multiply(xv, xi_part(xi)))

    def derivative(alpha, beta, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if x_part is None:
            xv = 0.0 if _order(beta) else 1.0
        else:
            xv = x_part.derivative(beta)(x)
        return _joint(x, xi, np.multiply(xv, xi_part.derivative(alpha)(xi)))

    return Symbol(n, evaluate, ident, params, derivative, order, order, x_part is None)


class _AbsSinPower:
    def __init__(self, kappa):
        self.kappa = kappa

    def __call__(self, x):
        return np.abs(np.sin(x[..., 0])) ** self.kappa


def _cat_one(n=1):
    return _separable(n, "one", {"n": n}, _power(n, 0.0))


def _cat_bessel(m, n=1):
    return _separable(n, "bessel_multiplier", {"n": n, "m": m}, _power(n, m / 2.0))


def _cat_smoothed_sign(n=1):
    mono = (1,) + (0,) * (n - 1)
    return _separable(n, "smoothed_sign", {"n": n}, _power(n, -0.5, mono))


def _cat_modulated(m, n=1):
    return _separable(n, "modulated", {"n": n, "m": m}, _power(n, m / 2.0),
                      x_part=_power(n, -1.0))


def _cat_holder_rough(kappa, kappa_pp=0.0, n=1):
    if kappa <= 0 or kappa_pp < 0:
        raise ParameterError("holder_rough needs kappa > 0 and kappa_pp >= 0")
    x_part = _AbsSinPower(kappa)
    xi_part = _power(n, -kappa_pp / 2.0)

    def evaluate(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return _joint(x, xi, x_part(x) * xi_part(xi))

    def derivative(alpha, beta, x, xi):
        if _order(beta):
            raise CapabilityError("holder_rough has no exact x-derivatives")
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return _joint(x, xi, x_part(x) * xi_part.derivative(alpha)(xi))

    return Symbol(n, evaluate, "holder_rough", {"n": n, "kappa": kappa, "kappa_pp": kappa_pp},
                  derivative, 4, 0, False)


def _cat_coordinate(n=1):
    mono = (1,) + (0,) * (n - 1)
    return _separable(n, "frequency_coordinate", {"n": n}, _power(n, 0.0, mono))


CATALOG = {
    "one": _cat_one,
    "bessel_multiplier": _cat_bessel,
    "smoothed_sign": _cat_smoothed_sign,
    "modulated": _cat_modulated,
    "holder_rough": _cat_holder_rough,
    "frequency_coordinate": _cat_coordinate,
}


def catalog_symbol(ident: str, params: dict | None = None) -> Symbol:
    """Build a reference symbol.

    ==========================  =================================================
    ``one``                     ``1``
    ``bessel_multiplier(m)``    ``(1+|xi|^2)^(m/2)``
    ``smoothed_sign``           ``xi_1 (1+|xi|^2)^(-1/2)``
    ``modulated(m)``            ``(1+|x|^2)^(-1) (1+|xi|^2)^(m/2)``
    ``holder_rough(kappa,       ``|sin x_1|^kappa (1+|xi|^2)^(-kappa_pp/2)``
    kappa_pp)``
    ``frequency_coordinate``    ``xi_1`` (order-1 polynomial, for failing checks)
    ==========================  =================================================

    Every entry accepts ``n`` (default 1).
    """
    try:
        factory = CATALOG[ident]
    except KeyError:
        raise CatalogError(f"unknown symbol {ident!r}; known: {sorted(CATALOG)}") from None
    params = dict(params or {})
    try:
        sym = factory(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {ident!r}: {exc}") from None
    if sym.n not in (1, 2):
        raise ParameterError("symbols are defined for n in {1, 2}")
    return sym


# ---------------------------------------------------------------------------
# derivatives with finite-difference fallback

_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def _fd(a: Symbol, alpha, beta, x, xi, hx, hxi):
    orders = tuple(alpha) + tuple(beta)
    n = a.n
    out = 0.0
    for combo in itertools.product(*(_STENCILS[o] for o in orders)):
        w = 1.0
        off = np.zeros(2 * n)
        for j, (o, c) in enumerate(combo):
            off[j] = o
            w *= c
        if w == 0.0:
            continue
        xs = x + off[n:] * hx[..., None]
        xis = xi + off[:n] * hxi[..., None]
        out = out + w * a.evaluate(xs, xis)
    return out / (hxi ** _order(alpha) * hx ** _order(beta))


def eval_derivative(a: Symbol, alpha, beta, x, xi, *, rho: float = 1.0, delta: float = 0.0,
                    allow_fallback: bool = True) -> np.ndarray:
    """``d_xi^alpha d_x^beta a(x, xi)``.

    Exact when the symbol declares it; otherwise central differences (second
    order) with one Richardson step.  The first-order step is
    ``h (1+|xi|)^rho`` in xi and ``h (1+|xi|)^-delta`` in x, where ``h`` is
    ``1e-4`` for first derivatives and grows with the total order ``r`` (see
    ``FD_STEPS``) so that rounding does not swamp the quotient.
    """
    alpha = _check_index(alpha, a.n, "alpha")
    beta = _check_index(beta, a.n, "beta")
    if a.has_exact(alpha, beta):
        return np.asarray(a.derivative(alpha, beta, x, xi))
    if not allow_fallback or max(_order(alpha), _order(beta)) > FD_MAX_ORDER:
        raise CapabilityError(
            f"{a.identifier}: derivative alpha={alpha}, beta={beta} unavailable "
            f"(exact orders xi<={a.order_xi}, x<={a.order_x}; fallback <= {FD_MAX_ORDER})"
        )
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    x, xi = np.broadcast_arrays(x, xi)
    r = _order(alpha) + _order(beta)
    if r == 0:
        return a.evaluate(x, xi)
    scale = FD_STEPS[min(r, FD_MAX_ORDER)]
    weight = 1.0 + np.linalg.norm(xi, axis=-1)
    hxi = scale * weight**rho
    hx = scale * weight ** (-delta)
    coarse = _fd(a, alpha, beta, x, xi, hx, hxi)
    fine = _fd(a, alpha, beta, x, xi, hx / 2, hxi / 2)
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# class specifications and sampling


@dataclass(frozen=True)
class HormanderSpec:
    m: float
    rho: float
    delta: float
    K_xi: int = 2
    K_x: int = 2

    def __post_init__(self):
        if not (0 <= self.rho <= 1 and 0 <= self.delta <= 1):
            raise ParameterError(f"need 0 <= rho, delta <= 1, got rho={self.rho}, delta={self.delta}")
        if not (0 <= self.K_xi <= FD_MAX_ORDER and 0 <= self.K_x <= FD_MAX_ORDER):
            raise ParameterError(f"tested orders must lie in [0, {FD_MAX_ORDER}]")

    def to_dict(self):
        return {"class": "hormander", **asdict(self)}


@dataclass(frozen=True)
class MiyachiSpec:
    m: float
    rho: float
    delta: float
    kappa: float
    kappa_prime: float

    def __post_init__(self):
        if not (0 <= self.rho <= 1 and 0 <= self.delta <= 1):
            raise ParameterError(f"need 0 <= rho, delta <= 1, got rho={self.rho}, delta={self.delta}")
        if not (self.kappa > 0 and self.kappa_prime > 0):
            raise ParameterError("need kappa > 0 and kappa' > 0")
        if max(self.k, self.k_prime) > FD_MAX_ORDER:
            raise ParameterError(f"kappa, kappa' above {FD_MAX_ORDER + 1} are not supported")

    @property
    def k(self) -> int:
        return math.ceil(self.kappa) - 1

    @property
    def k_prime(self) -> int:
        return math.ceil(self.kappa_prime) - 1

    def to_dict(self):
        return {"class": "miyachi", **asdict(self), "k": self.k, "k_prime": self.k_prime}


@dataclass(frozen=True)
class SamplingPlan:
    """Nested sample sets for the certifiers.

    Level ``r`` multiplies the frequency range by ``2^r``, doubles every
    sample count and shrinks the smallest difference step by ``step_shrink``;
    each level's set contains the previous one, so constants are
    non-decreasing in ``r``.
    """

    xi_max: float = 1000.0
    xi_count: int = 32
    xi_min: float = 1e-2
    directions: int = 16
    x_samples: tuple | None = None
    x_radius: float = 8.0
    x_min: float = 0.125
    x_count: int = 17
    x_count_2d: int = 11
    step_count: int = 8
    step_min: float = 1e-3
    step_shrink: float = 0.1
    direction_seed: int = 0
    refinement_levels: int = 2

    def __post_init__(self):
        if self.xi_count < 32 or self.step_count < 8 or self.refinement_levels < 2:
            raise ParameterError("plan needs xi_count >= 32, step_count >= 8, refinement_levels >= 2")
        if self.directions < 8 or self.xi_max <= self.xi_min:
            raise ParameterError("plan needs directions >= 8 and xi_max > xi_min")
        if min(self.x_count, self.x_count_2d) < 5 or not 0 < self.x_min < self.x_radius:
            raise ParameterError("plan needs x counts >= 5 and 0 < x_min < x_radius")
        if not 0 < self.step_shrink <= 1 or not 0 < self.step_min < 1:
            raise ParameterError("plan needs 0 < step_min < 1 and 0 < step_shrink <= 1")
        if self.x_samples is not None and len(self.x_samples) == 0:
            raise ParameterError("empty x sample set")

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def magnitudes(self, level: int) -> np.ndarray:
        parts = [np.zeros(1)]
        for j in range(level + 1):
            parts.append(np.geomspace(self.xi_min, self.xi_max * 2**j, self.xi_count * 2**j))
        return np.unique(np.concatenate(parts))

    def unit_directions(self, n: int, level: int) -> np.ndarray:
        if n == 1:
            return np.array([[-1.0], [1.0]])
        base = self.directions
        offset = np.random.default_rng(self.direction_seed).uniform(0, 2 * np.pi / base)
        theta = offset + 2 * np.pi * np.arange(base * 2**level) / (base * 2**level)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def frequencies(self, n: int, level: int) -> np.ndarray:
        mags = self.magnitudes(level)
        dirs = self.unit_directions(n, level)
        pts = (mags[:, None, None] * dirs[None]).reshape(-1, n)
        return np.unique(pts, axis=0)

    def axis_points(self, n: int, level: int) -> np.ndarray:
        """Per-axis x samples: 0 and +-log-spaced magnitudes in [x_min, x_radius].

        Level ``r`` inserts log-midpoints ``r`` times, so the sets are nested
        and resolve unit-scale features near the origin as well as the tails.
        """
        count = self.x_count if n == 1 else self.x_count_2d
        side = (count - 1) // 2
        mags = np.geomspace(self.x_min, self.x_radius, (side - 1) * 2**level + 1)
        return np.concatenate([-mags[::-1], [0.0], mags])

    def points(self, n: int, level: int) -> np.ndarray:
        if self.x_samples is not None:
            pts = np.asarray(self.x_samples, dtype=float).reshape(-1, n)
            return pts
        axis = self.axis_points(n, level)
        if n == 1:
            return axis[:, None]
        g = np.meshgrid(axis, axis, indexing="ij")
        return np.stack(g, axis=-1).reshape(-1, 2)

    def step_fractions(self, level: int) -> np.ndarray:
        # the smallest step shrinks per level so that Hölder excess shows up as growth
        parts = [np.geomspace(self.step_min * self.step_shrink**j, 1.0, self.step_count * 2**j)
                 for j in range(level + 1)]
        return np.unique(np.concatenate(parts))

    def step_directions(self, n: int) -> np.ndarray:
        eye = np.eye(n)
        return np.concatenate([eye, -eye])

    def to_dict(self):
        d = asdict(self)
        if d["x_samples"] is not None:
            d["x_samples"] = np.asarray(d["x_samples"], float).tolist()
        return d


@dataclass
class CertificateReport:
    """Sampled class constants per refinement level plus the verdict."""

    symbol: str
    spec: dict
    plan_digest: str
    constants: dict          # condition name -> per-level list
    sample_counts: list
    stability_factor: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def final(self) -> dict:
        return {k: v[-1] for k, v in self.constants.items()}

    def to_dict(self) -> dict:
        return {
            "symbol": self.symbol,
            "spec": self.spec,
            "plan_digest": self.plan_digest,
            "constants": self.constants,
            "sample_counts": self.sample_counts,
            "stability_factor": self.stability_factor,
            "threshold": self.threshold,
            "pass": self.passed,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _stability(constants: dict) -> float:
    finals = [v[-1] for v in constants.values()]
    floor = 1e-12 * max([1.0] + [c for c in finals if np.isfinite(c)])
    worst = 1.0
    for levels in constants.values():
        prev, last = levels[-2], levels[-1]
        if last <= floor:
            continue
        ratio = math.inf if prev <= floor else last / prev
        worst = max(worst, ratio)
    return worst


def _finalize(a, spec_dict, plan, constants, counts, threshold, details=None):
    if not constants:
        raise ParameterError("no conditions were sampled")
    finite = all(np.isfinite(c) for levels in constants.values() for c in levels)
    stab = _stability(constants) if finite else math.inf
    return CertificateReport(
        symbol=a.identifier,
        spec=spec_dict,
        plan_digest=plan.digest(),
        constants={k: [float(c) for c in v] for k, v in constants.items()},
        sample_counts=counts,
        stability_factor=float(stab),
        threshold=threshold,
        passed=bool(finite and stab <= threshold),
        details=details or {},
    )


def _x_samples(a: Symbol, plan: SamplingPlan, level: int) -> np.ndarray:
    # an x-independent symbol has the same sup at every x; one point suffices
    if a.x_independent:
        return np.zeros((1, a.n))
    return plan.points(a.n, level)


def _weight(xi):
    return 1.0 + np.linalg.norm(xi, axis=-1)


def _supratio(num, den):
    with np.errstate(all="ignore"):
        r = np.abs(num) / den
    if np.isnan(r).any():
        return math.inf
    return float(np.max(r)) if r.size else 0.0


def certify_hormander(a: Symbol, spec: HormanderSpec, plan: SamplingPlan | None = None,
                      threshold: float = DEFAULT_STABILITY) -> CertificateReport:
    """Sampled ``C_{alpha,beta}`` for ``|alpha| <= K_xi``, ``|beta| <= K_x``."""
    plan = plan or SamplingPlan()
    n = a.n
    pairs = [(al, be) for al in multi_indices(n, spec.K_xi) for be in multi_indices(n, spec.K_x)]
    constants = {f"alpha={al},beta={be}": [] for al, be in pairs}
    counts = []
    for level in range(plan.refinement_levels):
        x = _x_samples(a, plan, level)
        xi = plan.frequencies(n, level)
        if x.size == 0 or xi.size == 0:
            raise ParameterError("empty sampling plan")
        X, XI = x[:, None, :], xi[None, :, :]
        w = _weight(XI)
        counts.append(int(x.shape[0] * xi.shape[0]))
        for al, be in pairs:
            d = eval_derivative(a, al, be, X, XI, rho=spec.rho, delta=spec.delta)
            env = w ** (spec.m - spec.rho * _order(al) + spec.delta * _order(be))
            constants[f"alpha={al},beta={be}"].append(_supratio(d, env))
    return _finalize(a, spec.to_dict(), plan, constants, counts, threshold)


_D1 = ((0, -1.0), (1, 1.0))
_D2 = ((0, 1.0), (1, -2.0), (2, 1.0))


def _miyachi_level(a: Symbol, spec: MiyachiSpec, plan: SamplingPlan, level: int):
    n = a.n
    k, kp = spec.k, spec.k_prime
    dx_stencil = _D1 if float(spec.kappa) != int(spec.kappa) else _D2
    dxi_stencil = _D1 if float(spec.kappa_prime) != int(spec.kappa_prime) else _D2
    x = _x_samples(a, plan, level)
    xi = plan.frequencies(n, level)
    fr = plan.step_fractions(level)
    dirs = plan.step_directions(n)
    w = _weight(xi)                                         # (nxi,)
    steps = fr[:, None, None] * dirs[None, :, :]            # (nf, nd, n)
    steps = steps.reshape(-1, n)                            # unit-scale steps
    step_len = np.linalg.norm(steps, axis=-1)               # (ns,)
    h = steps[None, :, :] * (w ** (-spec.delta))[:, None, None]      # (nxi, ns, n)
    eta = steps[None, :, :] * (w**spec.rho / 4.0)[:, None, None]     # (nxi, ns, n)
    hlen = step_len[None, :] * w[:, None] ** (-spec.delta)
    etalen = step_len[None, :] * w[:, None] ** spec.rho / 4.0

    def der(al, be, xs, xis):
        return eval_derivative(a, al, be, xs, xis, rho=spec.rho, delta=spec.delta)

    best = {"i": 0.0, "ii": 0.0, "iii": 0.0, "iv": 0.0}
    count = 0
    for xp in x:
        X = xp[None, :]
        for al in multi_indices(n, kp):
            for be in multi_indices(n, k):
                ka, kb = _order(al), _order(be)
                d0 = der(al, be, X, xi)                     # (nxi,)
                env = w ** (spec.m + spec.delta * kb - spec.rho * ka)
                best["i"] = max(best["i"], _supratio(d0, env))
                count += xi.shape[0]
                XI = xi[:, None, :]
                if kb == k:
                    diff = sum(c * der(al, be, X[None] + o * h, XI) for o, c in dx_stencil)
                    env2 = (w ** (spec.m + spec.delta * spec.kappa - spec.rho * ka))[:, None] \
                        * hlen ** (spec.kappa - k)
                    best["ii"] = max(best["ii"], _supratio(diff, env2))
                    count += diff.size
                if ka == kp:
                    diff = sum(c * der(al, be, X[None], XI + o * eta) for o, c in dxi_stencil)
                    env3 = (w ** (spec.m + spec.delta * kb - spec.rho * spec.kappa_prime))[:, None] \
                        * etalen ** (spec.kappa_prime - kp)
                    best["iii"] = max(best["iii"], _supratio(diff, env3))
                    count += diff.size
                if kb == k and ka == kp:
                    # h and eta share the fraction index, directions vary independently
                    ih, ie = _same_fraction(fr.size, dirs.shape[0])
                    H, E = h[:, ih, :], eta[:, ie, :]
                    # nested so that an x- or xi-independent factor cancels exactly
                    diff = sum(
                        cx * sum(ce * der(al, be, X[None] + ox * H, XI + oe * E)
                                 for oe, ce in dxi_stencil)
                        for ox, cx in dx_stencil
                    )
                    env4 = (w ** (spec.m + spec.delta * spec.kappa - spec.rho * spec.kappa_prime))[:, None] \
                        * hlen[:, ih] ** (spec.kappa - k) * etalen[:, ie] ** (spec.kappa_prime - kp)
                    best["iv"] = max(best["iv"], _supratio(diff, env4))
                    count += diff.size
    return best, count


def _same_fraction(nf: int, nd: int):
    """Index pairs (h, eta) into the flattened (fraction, direction) step list."""
    f = np.repeat(np.arange(nf), nd * nd)
    d1 = np.tile(np.repeat(np.arange(nd), nd), nf)
    d2 = np.tile(np.arange(nd), nf * nd)
    return f * nd + d1, f * nd + d2


def certify_miyachi(a: Symbol, spec: MiyachiSpec, plan: SamplingPlan | None = None,
                    threshold: float = DEFAULT_STABILITY) -> CertificateReport:
    """Sampled constants for the four Miyachi conditions (i)-(iv).

    Second differences are used, replaced by first differences in x (resp. xi)
    when kappa (resp. kappa') is not an integer.  Steps obey
    ``|h| <= (1+|xi|)^-delta`` and ``|eta| <= (1+|xi|)^rho / 4``.
    """
    plan = plan or SamplingPlan()
    constants = {c: [] for c in ("i", "ii", "iii", "iv")}
    counts = []
    for level in range(plan.refinement_levels):
        best, count = _miyachi_level(a, spec, plan, level)
        if count == 0:
            raise ParameterError("empty sampling plan")
        for c in constants:
            constants[c].append(best[c])
        counts.append(count)
    return _finalize(a, spec.to_dict(), plan, constants, counts, threshold)


def miyachi_norm(report: CertificateReport) -> float:
    """Upper estimate of the class norm on the sampled set: max over the conditions."""
    if not report.passed:
        raise NormUndefinedError(
            f"certificate for {report.symbol} failed (stability {report.stability_factor:.3g})"
        )
    return float(max(report.final.values()))


@dataclass
class InclusionResult:
    holds: bool
    report_large: CertificateReport
    report_small: CertificateReport
    norm_large: float | None
    norm_small: float | None
    ratio: float | None
    const: float

    def __bool__(self):
        return self.holds


def check_inclusion(a: Symbol, spec1: MiyachiSpec, spec2: MiyachiSpec,
                    plan: SamplingPlan | None = None,
                    const: float = DEFAULT_INCLUSION_CONST) -> InclusionResult:
    """Check ``S(kappa1, kappa1') -> S(kappa2, kappa2')`` on one symbol.

    Needs ``kappa2 <= kappa1`` and ``kappa2' <= kappa1'`` with shared
    ``(m, rho, delta)``.  Holds iff passing under ``spec1`` implies passing
    under ``spec2`` with ``norm2 <= const * norm1``.
    """
    if (spec1.m, spec1.rho, spec1.delta) != (spec2.m, spec2.rho, spec2.delta):
        raise ParameterError("inclusion specs must share (m, rho, delta)")
    if spec2.kappa > spec1.kappa or spec2.kappa_prime > spec1.kappa_prime:
        raise ParameterError(
            f"need kappa2 <= kappa1 and kappa2' <= kappa1', got "
            f"({spec2.kappa}, {spec2.kappa_prime}) vs ({spec1.kappa}, {spec1.kappa_prime})"
        )
    r1 = certify_miyachi(a, spec1, plan)
    r2 = certify_miyachi(a, spec2, plan)
    if not r1.passed:
        return InclusionResult(True, r1, r2, None, None, None, const)
    if not r2.passed:
        return InclusionResult(False, r1, r2, miyachi_norm(r1), None, None, const)
    n1, n2 = miyachi_norm(r1), miyachi_norm(r2)
    ratio = n2 / n1 if n1 > 0 else (0.0 if n2 == 0 else math.inf)
    return InclusionResult(bool(ratio <= const), r1, r2, n1, n2, ratio, const)
