"""Certify catalog symbols, then estimate the pointwise and operator constants.

Run with ``python demos/certify_and_estimate.py [out_dir]``.
"""

import sys

from psidobench.harness import ExperimentConfig, run_experiment
from psidobench.symbols import (HormanderSpec, MiyachiSpec, catalog_symbol, certify_hormander,
                                certify_miyachi)


def main(out_dir=None):
    print("Hoermander certificates")
    for ident, params, m in [("bessel_multiplier", {"m": -1.0}, -1.0), ("smoothed_sign", {}, 0.0),
                             ("modulated", {"m": 0.0}, 0.0), ("frequency_coordinate", {}, 0.0)]:
        rep = certify_hormander(catalog_symbol(ident, params), HormanderSpec(m, 1, 0))
        print(f"  {ident:22s} m={m:5.1f} pass={rep.passed!s:5} stability={rep.stability_factor:.3f}")
    rep = certify_miyachi(catalog_symbol("holder_rough", {"kappa": 0.5}), MiyachiSpec(0, 0, 0, 0.5, 1))
    print(f"Miyachi certificate for holder_rough(1/2): pass={rep.passed}, constants={rep.final}")

    for preset in ("estimate-2", "theorem-3.2a"):
        res = run_experiment(ExperimentConfig.from_preset(preset), out_dir and f"{out_dir}/{preset}")
        print(f"\npreset {preset}: exit {res.exit_code}")
        for r in res.ratio_reports:
            print(f"  {r.name:48s} {r.constant_estimate:.5f}  levels={[round(v, 5) for v in r.per_level]}")
        for c in res.report.get("chains", []):
            print(f"  chain: operator {c['operator']:.4f} <= product {c['product']:.4f}: {c['pass']}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
