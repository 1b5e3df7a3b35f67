"""Run a configured experiment and write ``report.json``, ``ratios.csv`` and histograms."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, PsidoError
from ..grid import GridFunction, TestFamilySpec, make_grid
from ..maximal import CubeFamilySpec
from ..spaces import ExponentFunction, exponent, load_exponent_csv
from ..symbols import HormanderSpec, MiyachiSpec, SamplingPlan, catalog_symbol
from .config import ExperimentConfig, load_config
from .estimators import (RatioReport, Workspace, certify_for_theorem, check_chain, check_decay,
                         diening_probe, estimate_maximal_bound, estimate_operator_bound,
                         estimate_pointwise_constant, refine_families, verify_fefferman_stein)

__all__ = ["RunResult", "run_experiment", "build_class_spec", "build_exponent"]

log = logging.getLogger(__name__)

REPORT_SCHEMA = "psido-bench-report/1"
EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2
HIST_BINS = 20


@dataclass
class RunResult:
    exit_code: int
    report: dict
    ratio_reports: list = field(default_factory=list)
    out_dir: Path | None = None

    @property
    def passed(self) -> bool:
        return self.exit_code == EXIT_OK

    def estimates(self) -> dict:
        """``name -> constant_estimate`` for every ratio report."""
        return {r.name: r.constant_estimate for r in self.ratio_reports}


def build_class_spec(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "hormander":
            return HormanderSpec(**d)
        if kind == "miyachi":
            return MiyachiSpec(**d)
    except TypeError as exc:
        raise ConfigError(f"bad class spec {d}: {exc}") from None
    raise ConfigError(f"class kind must be 'hormander' or 'miyachi', got {kind!r}")


def build_exponent(d: dict | None, grid) -> ExponentFunction | None:
    if d is None:
        return None
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "csv":
        return load_exponent_csv(d["path"], grid, d.get("p_inf"))
    if kind is None:
        raise ConfigError("exponent needs a 'kind'")
    if kind == "step":
        d.setdefault("n", grid.n)
    try:
        return exponent(kind, **d)
    except KeyError as exc:
        raise ConfigError(f"exponent {kind!r} is missing {exc}") from None


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Run:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        g = cfg.grid
        self.grid = make_grid(int(g["n"]), float(g["L"]), int(g["N"]))
        fam = dict(cfg.family)
        try:
            self.family_spec = TestFamilySpec(fam.pop("kind"), int(fam.pop("count")),
                                              int(fam.pop("seed", 0)), fam.pop("params", {}))
        except KeyError as exc:
            raise ConfigError(f"family is missing {exc}") from None
        self.cubes = CubeFamilySpec(**cfg.cube_family)
        self.plan = SamplingPlan(**cfg.plan) if cfg.plan else None
        self.symbols = []
        for s in cfg.symbols:
            params = dict(s.get("params", {}))
            params.setdefault("n", self.grid.n)
            self.symbols.append((catalog_symbol(s["id"], params), build_class_spec(s["class"])))
        self.exponent = build_exponent(cfg.exponent, self.grid)
        self.ws = Workspace(self.cubes, workers=cfg.workers)
        self.levels: list = []
        self.reports: list[RatioReport] = []
        self.out: dict = {"certificates": [], "reports": [], "chains": [], "decay": [],
                          "wall_times": {}}
        self.ok = True

    def _need_exponent(self, what):
        if self.exponent is None:
            raise ConfigError(f"experiment {what!r} needs an exponent")
        return self.exponent

    def _add(self, rep: RatioReport):
        self.reports.append(rep)
        self.out["reports"].append(rep.to_dict())
        self.ok &= rep.passed

    def _timed(self, name, fn):
        t0 = time.perf_counter()
        fn()
        self.out["wall_times"][name] = time.perf_counter() - t0

    def execute(self):
        cfg, ex = self.cfg, self.cfg.experiments
        self._timed("families", lambda: self.levels.extend(
            refine_families(self.grid, self.family_spec, cfg.refinement_levels)))
        self.out["grid_levels"] = [lvl[0].spec.to_dict() for lvl in self.levels]
        thr = cfg.stability_threshold
        certs = {}

        def certify():
            for a, spec in self.symbols:
                rep = certify_for_theorem(a, spec, self.plan)
                certs[id(a)] = rep
                self.out["certificates"].append(rep.to_dict())

        if self.symbols:
            self._timed("certify", certify)
        qs = [float(q) for q in cfg.q_values]
        cache: dict = {}

        def pointwise(a, q):
            key = ("pw", id(a), q)
            if key not in cache:
                cache[key] = estimate_pointwise_constant(
                    a, q, self.levels, self.cubes, cfg.guard_epsilon, certificate=certs[id(a)],
                    threshold=thr, workspace=self.ws)
                self._add(cache[key])
            return cache[key]

        def operator(a):
            key = ("op", id(a))
            if key not in cache:
                cache[key] = estimate_operator_bound(
                    a, self._need_exponent("operator-bound"), self.levels,
                    certificate=certs[id(a)], threshold=thr, workspace=self.ws)
                self._add(cache[key])
            return cache[key]

        def images(a):
            return [[self.ws.op(a, f) for f in lvl] for lvl in self.levels]

        def sharp(a):
            key = ("fs", id(a))
            if key not in cache:
                fam = self.levels if a is None else images(a)
                rep = verify_fefferman_stein(self._need_exponent("fefferman-stein"), fam,
                                             self.cubes, cfg.guard_epsilon, threshold=thr,
                                             workspace=self.ws)
                if a is not None:
                    rep.name = f"fefferman-stein[Op({a.identifier}) f,{rep.details['exponent']['id']}]"
                cache[key] = rep
                self._add(rep)
            return cache[key]

        def maximal(q):
            key = ("mb", q)
            if key not in cache:
                cache[key] = estimate_maximal_bound(self._need_exponent("maximal-bound"), q,
                                                    self.levels, self.cubes, threshold=thr,
                                                    workspace=self.ws)
                self._add(cache[key])
            return cache[key]

        for a, _ in self.symbols:
            if "pointwise" in ex:
                self._timed(f"pointwise[{a.identifier}]",
                            lambda: [pointwise(a, q) for q in qs if q > 1])
            if "operator-bound" in ex:
                self._timed(f"operator-bound[{a.identifier}]", lambda: operator(a))
            if "fefferman-stein" in ex:
                self._timed(f"fefferman-stein[{a.identifier}]", lambda: sharp(a))
            if "decay" in ex:
                def decay():
                    d = check_decay(a, self.levels, workspace=self.ws)
                    self.out["decay"].append({"symbol": a.identifier, **d})
                    self.ok &= d["pass"]
                self._timed(f"decay[{a.identifier}]", decay)
            if "chain" in ex:
                def chain():
                    for q in (q for q in qs if q > 1):
                        c = check_chain(operator(a), sharp(a), pointwise(a, q), maximal(q))
                        self.out["chains"].append({"symbol": a.identifier, "q": q, **c.to_dict()})
                        self.ok &= c.holds
                self._timed(f"chain[{a.identifier}]", chain)
        if "fefferman-stein" in ex and not self.symbols:
            self._timed("fefferman-stein", lambda: sharp(None))
        if "maximal-bound" in ex:
            self._timed("maximal-bound", lambda: [maximal(q) for q in qs])
        if "diening" in ex:
            def diening():
                for q in qs:
                    rp, rc = diening_probe(self._need_exponent("diening"), q, self.levels,
                                           self.cubes, threshold=thr, workspace=self.ws)
                    for rep in (rp, rc):
                        self._add(rep)
            self._timed("diening", diening)
        self.ok &= all(c["pass"] for c in self.out["certificates"])


def _write_outputs(out_dir: Path, report: dict, reports: list[RatioReport], histograms: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(_clean(report), indent=2, allow_nan=False))
    with open(out_dir / "ratios.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "level", "function", "label", "node", "ratio"])
        for rep in reports:
            for s in rep.samples:
                w.writerow([rep.name, s.level, s.function, s.label,
                            "" if s.node is None else s.node, repr(s.ratio)])
    if histograms:
        for k, rep in enumerate(reports):
            vals = np.array([s.ratio for s in rep.samples if math.isfinite(s.ratio)])
            if vals.size == 0:
                continue
            counts, edges = np.histogram(vals, bins=HIST_BINS)
            lines = [f"# {rep.name}", "# bin_lo bin_hi count"]
            lines += [f"{lo!r} {hi!r} {c}" for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
            (out_dir / f"hist_{k:02d}.dat").write_text("\n".join(lines) + "\n")


def run_experiment(config, out_dir=None) -> RunResult:
    """Run ``config`` (an :class:`ExperimentConfig`, a dict, or a JSON path).

    Exit codes: 0 when every configured pass criterion holds, 1 on a failed
    criterion or any library error (recorded under ``"error"``), 2 when the
    configuration cannot be parsed.
    """
    t0 = time.perf_counter()
    try:
        if isinstance(config, ExperimentConfig):
            cfg = config
        elif isinstance(config, dict):
            cfg = ExperimentConfig.from_dict(config)
        else:
            cfg = load_config(config)
    except ConfigError as exc:
        report = {"schema": REPORT_SCHEMA, "pass": False,
                  "error": {"type": "ConfigError", "message": str(exc)}}
        if out_dir is not None:
            _write_outputs(Path(out_dir), report, [], False)
        return RunResult(EXIT_PARSE, report, [], None if out_dir is None else Path(out_dir))

    out_dir = out_dir if out_dir is not None else cfg.output
    report = {"schema": REPORT_SCHEMA, "config": cfg.to_dict(), "error": None}
    run = None
    code = EXIT_OK
    try:
        run = _Run(cfg)
        run.execute()
        code = EXIT_OK if run.ok else EXIT_FAIL
    except ConfigError as exc:
        report["error"] = {"type": "ConfigError", "message": str(exc)}
        code = EXIT_PARSE
    except (PsidoError, ValueError, KeyError) as exc:
        log.error("experiment failed: %s", exc)
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = EXIT_FAIL
    reports = run.reports if run is not None else []
    if run is not None:
        report.update(run.out)
    report["pass"] = code == EXIT_OK
    report["wall_time_total"] = time.perf_counter() - t0
    if out_dir is not None:
        _write_outputs(Path(out_dir), report, reports, cfg.histograms)
    return RunResult(code, _clean(report), reports, None if out_dir is None else Path(out_dir))
