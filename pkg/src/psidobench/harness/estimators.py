"""Empirical constants for the inequalities behind the boundedness theorem.

Each estimator returns a :class:`RatioReport`: the largest observed ratio,
the function and node achieving it, the per-level maxima over successively
refined grids, and the growth factor between the last two levels.  A finite
experiment cannot bound a supremum, so "bounded" is read as "does not grow
by more than ``threshold`` under refinement".

A family argument is either a list of grid functions (one level) or a list
of such lists (one per refinement level, coarsest first).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import DegenerateFamilyError, ParameterError, PreconditionError
from ..grid import GridFunction, GridSpec, TestFamilySpec, generate_family, make_grid
from ..maximal import CubeFamilySpec, q_maximal, sharp_maximal
from ..psido import ApplyOptions, apply_op
from ..spaces import (ExponentFunction, check_log_holder_infinity, check_log_holder_local,
                      conjugate_exponent, constant_norm, distribution_measure, exponent,
                      vlp_norm)
from ..symbols import (CertificateReport, HormanderSpec, MiyachiSpec, SamplingPlan, Symbol,
                       certify_hormander, certify_miyachi)

__all__ = [
    "RatioReport",
    "Sample",
    "Workspace",
    "refine_families",
    "theorem_gate",
    "certify_for_theorem",
    "class_norm",
    "estimate_pointwise_constant",
    "estimate_operator_bound",
    "verify_fefferman_stein",
    "estimate_maximal_bound",
    "diening_probe",
    "ChainCheck",
    "check_chain",
    "check_decay",
    "admissible_exponent",
]

DEFAULT_GUARD = 1e-8
DEFAULT_THRESHOLD = 2.0
CHAIN_RTOL = 1e-9


@dataclass(frozen=True)
class Sample:
    """One recorded ratio: refinement level, function index, node (flat index or None)."""

    level: int
    function: int
    label: str | None
    node: int | None
    ratio: float


@dataclass
class RatioReport:
    name: str
    constant_estimate: float
    witness: dict | None
    per_level: list
    stability_factor: float | None
    threshold: float
    skipped: int
    samples: list = field(default_factory=list, repr=False)
    details: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.constant_estimate))

    @property
    def passed(self) -> bool:
        if not self.finite:
            return False
        return self.stability_factor is None or self.stability_factor <= self.threshold

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "constant_estimate": self.constant_estimate,
            "witness": self.witness,
            "per_level": self.per_level,
            "stability_factor": self.stability_factor,
            "threshold": self.threshold,
            "skipped": self.skipped,
            "pass": self.passed,
            "details": self.details,
        }


def _report(name, per_level_samples, skipped, threshold, details=None) -> RatioReport:
    """Reduce samples to per-level maxima; ties go to the lowest function, then node."""
    per_level, best, all_samples = [], None, []
    for samples in per_level_samples:
        all_samples.extend(samples)
        lvl_best = -math.inf
        for s in samples:
            lvl_best = max(lvl_best, s.ratio)
            if best is None or s.ratio > best.ratio:
                best = s
        per_level.append(lvl_best if samples else math.nan)
    if best is None:
        raise DegenerateFamilyError(f"{name}: every sample was skipped by the guard")
    stab = None
    if len(per_level) >= 2:
        prev, last = per_level[-2], per_level[-1]
        stab = last / prev if prev > 0 else (1.0 if last == 0 else math.inf)
    witness = {"level": best.level, "function": best.function, "label": best.label,
               "node": best.node}
    return RatioReport(name, float(best.ratio), witness, [float(v) for v in per_level],
                       None if stab is None else float(stab), threshold, int(skipped),
                       all_samples, details or {})


# ---------------------------------------------------------------------------
# families and caching


def refine_families(grid: GridSpec, fam: TestFamilySpec, levels: int = 2) -> list[list[GridFunction]]:
    """The same family (same kind, count and seed) on grids with ``N * 2^r`` points."""
    out = []
    for r in range(levels):
        g = make_grid(grid.n, grid.L, grid.N * 2**r)
        out.append(generate_family(g, fam))
    return out


def _as_levels(family) -> list[list[GridFunction]]:
    if isinstance(family, GridFunction):
        raise ParameterError("expected a family, got a single function")
    family = list(family)
    if not family:
        raise ParameterError("empty family")
    if isinstance(family[0], GridFunction):
        return [family]
    levels = [list(level) for level in family]
    if any(not level for level in levels):
        raise ParameterError("empty family level")
    return levels


class Workspace:
    """Memoises ``Op(a) f``, ``f^#``, ``M_q f`` and norms for one run.

    Keys hold object identities, so reuse a workspace only with the same
    family and symbol objects.  Results are computed in family order and
    optionally on a thread pool; order-preserving maps keep them deterministic.
    """

    def __init__(self, fam: CubeFamilySpec | None = None, opts: ApplyOptions | None = None,
                 workers: int = 1):
        self.fam = fam or CubeFamilySpec()
        self.opts = opts or ApplyOptions()
        self.workers = max(1, int(workers))
        self._memo: dict = {}
        self._alive: dict = {}

    def _hold(self, *objs):
        for o in objs:
            self._alive[id(o)] = o

    def _get(self, key, compute):
        if key not in self._memo:
            self._memo[key] = compute()
        return self._memo[key]

    def map(self, fn: Callable, items: Sequence):
        if self.workers == 1 or len(items) < 2:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(self.workers) as pool:
            return list(pool.map(fn, items))

    def op(self, a: Symbol, f: GridFunction) -> GridFunction:
        self._hold(a, f)
        return self._get(("op", id(a), id(f)), lambda: apply_op(a, f, self.opts))

    def sharp(self, g: GridFunction) -> GridFunction:
        self._hold(g)
        return self._get(("sharp", id(g)), lambda: sharp_maximal(g, self.fam))

    def maximal(self, f: GridFunction, q: float) -> GridFunction:
        self._hold(f)
        return self._get(("mq", id(f), float(q)), lambda: q_maximal(f, q, self.fam))

    def norm(self, f: GridFunction, p: ExponentFunction) -> float:
        self._hold(f, p)
        return self._get(("norm", id(f), id(p)), lambda: vlp_norm(f, p).value)


# ---------------------------------------------------------------------------
# hypotheses


def theorem_gate(spec: HormanderSpec | MiyachiSpec, n: int) -> None:
    """Raise :class:`PreconditionError` unless ``spec`` lies in a class the theorem covers."""
    problems = []
    bound = n * (spec.rho - 1.0)
    if isinstance(spec, HormanderSpec):
        if not 0 < spec.rho <= 1:
            problems.append(f"need 0 < ρ ≤ 1 (rho = {spec.rho})")
        if not 0 <= spec.delta < 1:
            problems.append(f"need 0 ≤ δ < 1 (delta = {spec.delta})")
    elif isinstance(spec, MiyachiSpec):
        if not 0 <= spec.delta <= spec.rho <= 1:
            problems.append(f"need 0 ≤ δ ≤ ρ ≤ 1 (rho = {spec.rho}, delta = {spec.delta})")
        if not 0 <= spec.delta < 1:
            problems.append(f"need 0 ≤ δ < 1 (delta = {spec.delta})")
        if spec.kappa_prime < n:
            problems.append(f"need kappa' >= n = {n} (kappa' = {spec.kappa_prime})")
    else:
        raise ParameterError(f"unknown class spec {spec!r}")
    if spec.m > bound + 1e-12:
        problems.append(f"need m <= n(rho - 1) = {bound} (m = {spec.m})")
    if problems:
        raise PreconditionError("class outside the theorem's range: " + "; ".join(problems))


def certify_for_theorem(a: Symbol, spec, plan: SamplingPlan | None = None) -> CertificateReport:
    """Gate the class, certify the symbol, and raise if the certificate fails."""
    theorem_gate(spec, a.n)
    if isinstance(spec, HormanderSpec):
        rep = certify_hormander(a, spec, plan)
    else:
        rep = certify_miyachi(a, spec, plan)
    if not rep.passed:
        levels = rep.constants
        bad = [k for k, v in levels.items()
               if not np.isfinite(v[-1]) or (v[-2] > 0 and v[-1] / v[-2] > rep.threshold)]
        raise PreconditionError(
            f"{a.identifier} failed the {spec.to_dict()['class']} check "
            f"(stability {rep.stability_factor:.4g} > {rep.threshold}); failing: {bad}"
        )
    return rep


def class_norm(rep: CertificateReport) -> float:
    """Largest sampled class constant of a passing certificate."""
    return float(max(rep.final.values()))


def admissible_exponent(p, grid: GridSpec) -> ExponentFunction:
    """Exponent validated for the operator-bound experiments.

    Constant exponents need only ``1 < p < inf``; variable ones must also pass
    both log-Hoelder checks on ``grid``.
    """
    if not isinstance(p, ExponentFunction):
        try:
            p = exponent("constant", p=float(p))
        except ParameterError as exc:
            raise PreconditionError(f"exponent violates 1 < p- <= p+ < inf: {exc}") from None
    try:
        p.on_grid(grid)
    except ParameterError as exc:
        raise PreconditionError(str(exc)) from None
    if not p.is_constant:
        local = check_log_holder_local(p, grid)
        if not local.passed:
            raise PreconditionError(f"{p.identifier} fails the local log-Hoelder check "
                                    f"(stability {local.stability:.3g})")
        if p.p_infinity is None or not check_log_holder_infinity(p, grid).passed:
            raise PreconditionError(f"{p.identifier} fails the log-Hoelder decay check at infinity")
    return p


def _check_certificate(a, spec, certificate, plan):
    if certificate is not None:
        if not certificate.passed:
            raise PreconditionError(f"certificate for {certificate.symbol} did not pass")
        return certificate
    if spec is None:
        spec = HormanderSpec(0.0, 1.0, 0.0)
    return certify_for_theorem(a, spec, plan)


# ---------------------------------------------------------------------------
# estimators


def estimate_pointwise_constant(a: Symbol, q: float, family, fam: CubeFamilySpec | None = None,
                                guard: float = DEFAULT_GUARD, *, spec=None,
                                certificate: CertificateReport | None = None,
                                plan: SamplingPlan | None = None,
                                threshold: float = DEFAULT_THRESHOLD,
                                workspace: Workspace | None = None) -> RatioReport:
    """Largest ``(Op(a) f)^#(x) / (M_q f)(x)`` over the family and the guarded nodes.

    Nodes with ``M_q f < guard * max(M_q f)`` are skipped and counted.  The
    symbol must certify against ``spec`` (default ``S^0_{1,0}``) or a passing
    ``certificate`` must be supplied.
    """
    if not q > 1:
        raise ParameterError(f"q must exceed 1, got {q!r}")
    if not guard > 0:
        raise ParameterError("guard must be positive")
    cert = _check_certificate(a, spec, certificate, plan)
    ws = workspace or Workspace(fam)
    levels = _as_levels(family)
    per_level, skipped = [], 0

    def one(args):
        r, i, f = args
        num = ws.sharp(ws.op(a, f)).values.real.reshape(-1)
        den = ws.maximal(f, q).values.real.reshape(-1)
        keep = den >= guard * den.max() if den.max() > 0 else np.zeros(den.shape, bool)
        if not keep.any():
            return None, int(den.size)
        ratio = np.where(keep, num / np.where(keep, den, 1.0), -np.inf)
        j = int(np.argmax(ratio))
        return Sample(r, i, f.label, j, float(ratio[j])), int(den.size - keep.sum())

    for r, level in enumerate(levels):
        results = ws.map(one, [(r, i, f) for i, f in enumerate(level)])
        per_level.append([s for s, _ in results if s is not None])
        skipped += sum(k for _, k in results)
    return _report(f"pointwise[{a.identifier},q={q}]", per_level, skipped, threshold,
                   {"q": q, "class_norm": class_norm(cert), "certificate": cert.to_dict()})


def _norm_ratio_report(name, levels, num_fn, den_fn, ws, threshold, guard=None, details=None):
    per_level, skipped = [], 0

    def one(args):
        r, i, f = args
        den = den_fn(f)
        num = num_fn(f)
        if guard is not None and den < guard(f):
            return None
        if not den > 0:
            return None
        return Sample(r, i, f.label, None, num / den)

    for r, level in enumerate(levels):
        res = ws.map(one, [(r, i, f) for i, f in enumerate(level)])
        per_level.append([s for s in res if s is not None])
        skipped += sum(s is None for s in res)
    return _report(name, per_level, skipped, threshold, details)


def estimate_operator_bound(a: Symbol, p, family, *, spec=None,
                            certificate: CertificateReport | None = None,
                            plan: SamplingPlan | None = None,
                            threshold: float = DEFAULT_THRESHOLD,
                            workspace: Workspace | None = None) -> RatioReport:
    """Largest ``||Op(a) f||_{p(.)} / ||f||_{p(.)}`` over the family."""
    levels = _as_levels(family)
    p = admissible_exponent(p, levels[-1][0].spec)
    cert = _check_certificate(a, spec, certificate, plan)
    ws = workspace or Workspace()
    return _norm_ratio_report(
        f"operator-bound[{a.identifier},{p.identifier}]", levels,
        lambda f: ws.norm(ws.op(a, f), p), lambda f: ws.norm(f, p), ws, threshold,
        details={"exponent": p.to_dict(), "class_norm": class_norm(cert)})


def verify_fefferman_stein(p, family, fam: CubeFamilySpec | None = None,
                           guard: float = DEFAULT_GUARD, *, threshold: float = DEFAULT_THRESHOLD,
                           workspace: Workspace | None = None) -> RatioReport:
    """Largest ``||f||_{p(.)} / ||f^#||_{p(.)}``.

    Members with ``||f^#|| < guard * ||f||`` (constants and near-constants)
    are skipped; a family with nothing left raises :class:`DegenerateFamilyError`.
    """
    levels = _as_levels(family)
    if not isinstance(p, ExponentFunction):
        p = exponent("constant", p=float(p))
    ws = workspace or Workspace(fam)
    return _norm_ratio_report(
        f"fefferman-stein[{p.identifier}]", levels,
        lambda f: ws.norm(f, p), lambda f: ws.norm(ws.sharp(f), p), ws, threshold,
        guard=lambda f: guard * ws.norm(f, p), details={"exponent": p.to_dict()})


def estimate_maximal_bound(p, q: float, family, fam: CubeFamilySpec | None = None, *,
                           threshold: float = DEFAULT_THRESHOLD,
                           workspace: Workspace | None = None) -> RatioReport:
    """Largest ``||M_q f||_{p(.)} / ||f||_{p(.)}``."""
    if not q >= 1:
        raise ParameterError(f"q must be >= 1, got {q!r}")
    levels = _as_levels(family)
    if not isinstance(p, ExponentFunction):
        p = exponent("constant", p=float(p))
    p.on_grid(levels[-1][0].spec)
    ws = workspace or Workspace(fam)
    return _norm_ratio_report(
        f"maximal-bound[{p.identifier},q={q}]", levels,
        lambda f: ws.norm(ws.maximal(f, q), p), lambda f: ws.norm(f, p), ws, threshold,
        details={"exponent": p.to_dict(), "q": q})


def diening_probe(p: ExponentFunction, q: float, family, fam: CubeFamilySpec | None = None, *,
                  threshold: float = DEFAULT_THRESHOLD,
                  workspace: Workspace | None = None) -> tuple[RatioReport, RatioReport]:
    """The maximal-bound estimate under ``p`` and under its conjugate ``p'``."""
    if not isinstance(p, ExponentFunction):
        p = exponent("constant", p=float(p))
    ws = workspace or Workspace(fam)
    rp = estimate_maximal_bound(p, q, family, fam, threshold=threshold, workspace=ws)
    rc = estimate_maximal_bound(conjugate_exponent(p), q, family, fam, threshold=threshold,
                                workspace=ws)
    return rp, rc


# ---------------------------------------------------------------------------
# chain and decay


@dataclass
class ChainCheck:
    """``C_op <= C_sharp * C_q * C_M`` evaluated on one set of samples."""

    operator: float
    sharp: float
    pointwise: float
    maximal: float
    product: float
    holds: bool
    per_level: list

    def to_dict(self):
        return {"operator": self.operator, "sharp": self.sharp, "pointwise": self.pointwise,
                "maximal": self.maximal, "product": self.product, "pass": self.holds,
                "per_level": self.per_level}


def check_chain(op: RatioReport, sharp: RatioReport, pointwise: RatioReport,
                maximal: RatioReport, rtol: float = CHAIN_RTOL) -> ChainCheck:
    """Compare the operator estimate with the product of the three link constants.

    Also checked level by level, since each level's links share their samples.
    """
    per_level, ok = [], True
    for r in range(len(op.per_level)):
        prod = sharp.per_level[r] * pointwise.per_level[r] * maximal.per_level[r]
        hold = bool(op.per_level[r] <= prod * (1 + rtol))
        ok &= hold
        per_level.append({"operator": op.per_level[r], "product": prod, "pass": hold})
    product = sharp.constant_estimate * pointwise.constant_estimate * maximal.constant_estimate
    ok &= bool(op.constant_estimate <= product * (1 + rtol))
    return ChainCheck(op.constant_estimate, sharp.constant_estimate,
                      pointwise.constant_estimate, maximal.constant_estimate, product, ok,
                      per_level)


def check_decay(a: Symbol, family, lambdas: Sequence[float] = tuple(10.0**k for k in range(-3, 4)),
                workspace: Workspace | None = None) -> dict:
    """Distribution function of ``Op(a) f`` must fall to 0 monotonically; L^2, L^4 finite."""
    ws = workspace or Workspace()
    levels = _as_levels(family)
    rows, ok = [], True
    for r, level in enumerate(levels):
        for i, f in enumerate(level):
            g = ws.op(a, f)
            meas = [distribution_measure(g, lam) for lam in lambdas]
            monotone = all(b <= c for b, c in zip(meas[1:], meas[:-1]))
            norms = [constant_norm(g, 2.0), constant_norm(g, 4.0)]
            good = monotone and meas[-1] == 0.0 and all(np.isfinite(norms))
            ok &= good
            rows.append({"level": r, "function": i, "measures": meas, "L2": norms[0],
                         "L4": norms[1], "pass": good})
    return {"lambdas": list(lambdas), "rows": rows, "pass": bool(ok)}
