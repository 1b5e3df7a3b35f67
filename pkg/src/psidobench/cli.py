"""``psido-bench``: run presets, certify symbols, apply operators, maximal functions and norms."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, PsidoError
from .grid import GridFunction, export_csv, load_psbf, save_psbf
from .harness.config import PRESETS, ExperimentConfig, load_config
from .harness.runner import build_class_spec, run_experiment
from .maximal import CubeFamilySpec, hardy_littlewood, q_maximal, sharp_maximal
from .psido import ApplyOptions, apply_op
from .spaces import parse_exponent, vlp_norm
from .symbols import SamplingPlan, catalog_symbol, certify_hormander, certify_miyachi

__all__ = ["main", "build_parser"]


def _json_arg(text: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return value


def _grid_arg(text: str) -> tuple:
    try:
        n, L, N = text.split(",")
        return int(n), float(L), int(N)
    except ValueError:
        raise argparse.ArgumentTypeError("expected n,L,N") from None


def _write(path: str, f: GridFunction):
    if Path(path).suffix.lower() == ".csv":
        export_csv(path, f)
    else:
        save_psbf(path, f)


def _load(path: str, grid: tuple | None = None) -> GridFunction:
    f = load_psbf(path)
    if grid is not None:
        n, L, N = grid
        if (f.spec.n, f.spec.N) != (n, N) or abs(f.spec.L - L) > 1e-12 * L:
            raise ConfigError(f"{path} holds grid {f.spec.to_dict()}, not n={n}, L={L}, N={N}")
    return f


def _cmd_run(args) -> int:
    try:
        if args.config:
            cfg = load_config(args.config, preset=args.preset)
        elif args.preset:
            cfg = ExperimentConfig.from_preset(args.preset)
        else:
            raise ConfigError("give --preset or --config")
        if args.histograms:
            cfg.histograms = True
        if args.workers:
            cfg.workers = args.workers
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(cfg, args.out)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} exit={result.exit_code} report={Path(args.out) / 'report.json'}")
    if result.report.get("error"):
        print(f"error: {result.report['error']['message']}", file=sys.stderr)
    return result.exit_code


def _parse_class(kind: str, text: str) -> dict:
    if text.lstrip().startswith("{"):
        d = _json_arg(text)
    else:
        names = ["m", "rho", "delta"] + (["kappa", "kappa_prime"] if kind == "miyachi" else [])
        vals = [float(v) for v in text.split(",")]
        if len(vals) != len(names):
            raise ConfigError(f"--spec for {kind} needs {','.join(names)}")
        d = dict(zip(names, vals))
    return {"kind": kind, **d}


def _cmd_certify(args) -> int:
    a = catalog_symbol(args.symbol, {"n": args.n, **args.params})
    spec = build_class_spec(_parse_class(args.cls, args.spec))
    plan = SamplingPlan(**args.plan) if args.plan else None
    fn = certify_hormander if args.cls == "hormander" else certify_miyachi
    rep = fn(a, spec, plan)
    print(rep.to_json(indent=2))
    return 0 if rep.passed else 1


def _cmd_apply(args) -> int:
    f = _load(args.input, args.grid)
    a = catalog_symbol(args.symbol, {"n": f.spec.n, **args.params})
    _write(args.output, apply_op(a, f, ApplyOptions(path=args.path)))
    return 0


def _cmd_maximal(args) -> int:
    f = _load(args.input)
    fam = CubeFamilySpec(args.window, args.placement, args.dyadic == "on")
    if args.op == "m":
        g = hardy_littlewood(f, fam)
    elif args.op == "mq":
        g = q_maximal(f, args.q, fam)
    else:
        g = sharp_maximal(f, fam)
    _write(args.output, g)
    return 0


def _cmd_norm(args) -> int:
    f = _load(args.input)
    res = vlp_norm(f, parse_exponent(args.exponent, f.spec))
    print(json.dumps(res.to_dict()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="psido-bench", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a preset or configured experiment")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", help="JSON config (schema psido-bench-config/1)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--histograms", action="store_true", help="also write gnuplot .dat files")
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("certify", help="certify a catalog symbol against a class")
    p.add_argument("--symbol", required=True)
    p.add_argument("--params", type=_json_arg, default={})
    p.add_argument("--class", dest="cls", choices=["hormander", "miyachi"], required=True)
    p.add_argument("--spec", required=True,
                   help="m,rho,delta (hormander) or m,rho,delta,kappa,kappa_prime, or JSON; "
                        "write --spec=-1,1,0 when m is negative")
    p.add_argument("--plan", type=_json_arg, default=None)
    p.add_argument("--n", type=int, default=1)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("apply", help="apply Op(a) to a PSBF1 grid function")
    p.add_argument("--symbol", required=True)
    p.add_argument("--params", type=_json_arg, default={})
    p.add_argument("--grid", type=_grid_arg, help="expected n,L,N of the input")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help=".csv for CSV, anything else for PSBF1")
    p.add_argument("--path", choices=["auto", "multiplier", "full"], default="auto")
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("maximal", help="maximal functions of a PSBF1 grid function")
    p.add_argument("--op", choices=["m", "mq", "sharp"], required=True)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--placement", choices=["all-containing", "centered-only"],
                   default="all-containing")
    p.add_argument("--dyadic", choices=["on", "off"], default="on")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_maximal)

    p = sub.add_parser("norm", help="variable-exponent norm of a PSBF1 grid function")
    p.add_argument("--exponent", required=True,
                   help="constant:p, log-decay:p_inf, step:p1,p2, or a CSV of node,p")
    p.add_argument("--input", required=True)
    p.set_defaults(func=_cmd_norm)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PsidoError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
