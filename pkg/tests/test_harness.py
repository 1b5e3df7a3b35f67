import json
import math

import numpy as np
import pytest

from psidobench.errors import DegenerateFamilyError, ParameterError, PreconditionError
from psidobench.grid import GridFunction, TestFamilySpec, make_grid, sample
from psidobench.harness import config as config_mod
from psidobench.harness.config import ExperimentConfig
from psidobench.harness.estimators import (RatioReport, Sample, Workspace, check_chain,
                                           check_decay, diening_probe, estimate_maximal_bound,
                                           estimate_operator_bound, estimate_pointwise_constant,
                                           refine_families, theorem_gate, verify_fefferman_stein)
from psidobench.harness.runner import run_experiment
from psidobench.maximal import CubeFamilySpec, q_maximal, sharp_maximal
from psidobench.psido import apply_op
from psidobench.spaces import exponent
from psidobench.symbols import HormanderSpec, MiyachiSpec, catalog_symbol

from .oracles import brute_sharp

GRID = make_grid(1, 16.0, 128)
LOG_DECAY = exponent("log-decay", p_inf=2.0)
TWO = exponent("constant", p=2.0)


def _levels(kind="gaussian-pack", count=6, seed=1, grid=GRID):
    return refine_families(grid, TestFamilySpec(kind, count, seed=seed))


def _scaled(levels, c):
    return [[f * c for f in level] for level in levels]


def _small_config(**overrides):
    base = {"grid": {"n": 1, "L": 16.0, "N": 128},
            "symbols": [{"id": "smoothed_sign", "class": {"kind": "hormander", "m": 0.0,
                                                          "rho": 1.0, "delta": 0.0}}],
            "exponent": {"kind": "log-decay", "p_inf": 2.0},
            "family": {"kind": "gaussian-pack", "count": 4, "seed": 3},
            "q_values": [1.5],
            "experiments": ["certify", "pointwise", "operator-bound", "fefferman-stein",
                            "maximal-bound", "chain", "decay"]}
    base.update(overrides)
    return base


# -- gate -----------------------------------------------------------------------------------


def test_theorem_gate():
    theorem_gate(HormanderSpec(0.0, 1.0, 0.0), 1)
    theorem_gate(HormanderSpec(-1.0, 0.5, 0.0), 2)
    theorem_gate(MiyachiSpec(0.0, 1.0, 0.5, 0.5, 1.0), 1)
    with pytest.raises(PreconditionError, match="0 ≤ δ < 1"):
        theorem_gate(HormanderSpec(0.0, 1.0, 1.0), 1)
    with pytest.raises(PreconditionError, match=r"m <= n\(rho - 1\)"):
        theorem_gate(HormanderSpec(0.0, 0.5, 0.0), 1)
    with pytest.raises(PreconditionError, match="kappa'"):
        theorem_gate(MiyachiSpec(0.0, 1.0, 0.0, 0.5, 1.0), 2)


# -- pointwise constant -----------------------------------------------------------------------


def test_pointwise_identity_bound():
    rep = estimate_pointwise_constant(catalog_symbol("one"), 2.0, _levels())
    assert all(s.ratio <= 2 + 1e-9 for s in rep.samples)
    assert rep.constant_estimate == max(s.ratio for s in rep.samples)
    assert rep.details["class_norm"] == 1.0


@pytest.mark.parametrize("c", [0.5, 3.0, -2.0])
def test_pointwise_symbol_scaling(c):
    levels = _levels()
    base = estimate_pointwise_constant(catalog_symbol("one"), 2.0, levels)
    scaled = estimate_pointwise_constant(catalog_symbol("one").scaled(c), 2.0, levels)
    assert scaled.constant_estimate == pytest.approx(abs(c) * base.constant_estimate, rel=1e-12)
    assert scaled.witness == base.witness


def test_pointwise_requires_certificate():
    with pytest.raises(PreconditionError, match="frequency_coordinate"):
        estimate_pointwise_constant(catalog_symbol("frequency_coordinate"), 2.0, _levels())
    with pytest.raises(PreconditionError, match="0 ≤ δ < 1"):
        estimate_pointwise_constant(catalog_symbol("one"), 2.0, _levels(),
                                    spec=HormanderSpec(0.0, 1.0, 1.0))
    with pytest.raises(ParameterError):
        estimate_pointwise_constant(catalog_symbol("one"), 1.0, _levels())
    with pytest.raises(ParameterError):
        estimate_pointwise_constant(catalog_symbol("one"), 2.0, [])


def test_guard_soundness():
    levels = _levels(count=4)
    guard = 0.3
    rep = estimate_pointwise_constant(catalog_symbol("smoothed_sign"), 2.0, levels, guard=guard)
    assert rep.skipped > 0
    for s in rep.samples:
        den = q_maximal(levels[s.level][s.function], 2.0).values.real.reshape(-1)
        assert den[s.node] >= guard * den.max()
    assert rep.constant_estimate == max(s.ratio for s in rep.samples)
    loose = estimate_pointwise_constant(catalog_symbol("smoothed_sign"), 2.0, levels, guard=1e-8)
    assert loose.skipped < rep.skipped


def test_witness_is_reproducible():
    levels = _levels()
    a = catalog_symbol("smoothed_sign")
    rep = estimate_pointwise_constant(a, 1.5, levels)
    w = rep.witness
    f = levels[w["level"]][w["function"]]
    num = sharp_maximal(apply_op(a, f)).values.reshape(-1)[w["node"]]
    den = q_maximal(f, 1.5).values.reshape(-1)[w["node"]]
    assert num / den == rep.constant_estimate
    assert len(rep.per_level) == 2
    assert rep.stability_factor == rep.per_level[1] / rep.per_level[0]


# -- operator bound ---------------------------------------------------------------------------


@pytest.mark.parametrize("p", [2.0, 3.0, LOG_DECAY], ids=["2", "3", "log-decay"])
def test_operator_bound_identity(p):
    rep = estimate_operator_bound(catalog_symbol("one"), p, _levels())
    assert rep.constant_estimate == pytest.approx(1.0, abs=1e-9)


def test_operator_bound_parseval():
    rep = estimate_operator_bound(catalog_symbol("smoothed_sign"), 2.0, _levels(count=10))
    assert rep.constant_estimate <= 1 + 1e-6


def test_operator_bound_rejects_bad_exponents():
    with pytest.raises(PreconditionError):
        estimate_operator_bound(catalog_symbol("one"), 1.0, _levels())
    with pytest.raises(PreconditionError, match="log-Hoelder"):
        estimate_operator_bound(catalog_symbol("one"), exponent("step", p1=2.0, p2=3.0), _levels())


# -- Fefferman-Stein ------------------------------------------------------------------------


def test_fefferman_stein_skips_constants():
    levels = _levels("smooth-bump", 5)
    const = [GridFunction(lvl[0].spec, np.ones(lvl[0].spec.shape), label="const") for lvl in levels]
    with_const = [[c] + lvl for c, lvl in zip(const, levels)]
    rep = verify_fefferman_stein(LOG_DECAY, with_const)
    ref = verify_fefferman_stein(LOG_DECAY, levels)
    assert rep.skipped == 2
    assert rep.constant_estimate == ref.constant_estimate
    with pytest.raises(DegenerateFamilyError):
        verify_fefferman_stein(LOG_DECAY, [const[:1]])


def test_fefferman_stein_odd_bump_matches_brute_force():
    g = make_grid(1, 8.0, 128)
    f = sample(g, lambda x: x[..., 0] * np.exp(-x[..., 0] ** 2))
    rep = verify_fefferman_stein(TWO, [f])
    assert math.isfinite(rep.constant_estimate) and rep.constant_estimate > 0
    fam = CubeFamilySpec()
    fast = sharp_maximal(f, fam).values
    sides = fam.sides(g, dyadic=True)
    for j in range(0, 128, 7):
        assert fast[j] == pytest.approx(brute_sharp(f.values, (j,), sides), rel=1e-12)


# -- maximal bound and duality -------------------------------------------------------------


def test_maximal_bound_is_at_least_one():
    rep = estimate_maximal_bound(TWO, 1.0, _levels("smooth-bump", 5))
    assert rep.constant_estimate >= 1 - GRID.dx
    with pytest.raises(ParameterError):
        estimate_maximal_bound(TWO, 0.5, _levels())


def test_diening_self_dual_pair_agrees():
    rp, rc = diening_probe(TWO, 1.0, _levels("smooth-bump", 5))
    assert rc.constant_estimate == pytest.approx(rp.constant_estimate, rel=1e-9)


def test_diening_log_decay_pair_is_finite():
    rp, rc = diening_probe(LOG_DECAY, 1.5, _levels("smooth-bump", 5))
    for rep in (rp, rc):
        assert rep.finite and rep.passed
    assert rp.details["exponent"] != rc.details["exponent"]


# -- scaling covariance and concurrency -----------------------------------------------------------


@pytest.mark.parametrize("c", [1e-3, 7.0, 1e4])
def test_family_scaling_covariance(c):
    levels = _levels(count=4)
    scaled = _scaled(levels, c)
    a = catalog_symbol("smoothed_sign")
    pairs = [
        (lambda fam: estimate_pointwise_constant(a, 1.5, fam)),
        (lambda fam: estimate_operator_bound(a, LOG_DECAY, fam)),
        (lambda fam: verify_fefferman_stein(LOG_DECAY, fam)),
        (lambda fam: estimate_maximal_bound(LOG_DECAY, 1.5, fam)),
    ]
    for fn in pairs:
        base, other = fn(levels), fn(scaled)
        assert other.constant_estimate == pytest.approx(base.constant_estimate, rel=1e-12)
        np.testing.assert_allclose(other.per_level, base.per_level, rtol=1e-12)


def test_thread_pool_gives_identical_estimates():
    levels = _levels(count=6)
    a = catalog_symbol("smoothed_sign")
    seq = estimate_pointwise_constant(a, 2.0, levels, workspace=Workspace())
    par = estimate_pointwise_constant(a, 2.0, levels, workspace=Workspace(workers=4))
    assert (seq.constant_estimate, seq.witness, seq.per_level) == \
        (par.constant_estimate, par.witness, par.per_level)


# -- chain and decay ------------------------------------------------------------------------


def _fake(name, levels):
    return RatioReport(name, max(levels), None, list(levels), levels[-1] / levels[0], 2.0, 0,
                       [Sample(0, 0, None, None, levels[0])])


def test_chain_check():
    ok = check_chain(_fake("op", [1.0, 1.2]), _fake("s", [2.0, 2.0]), _fake("q", [1.0, 1.0]),
                     _fake("m", [1.0, 1.0]))
    assert ok.holds and ok.product == 2.0
    bad = check_chain(_fake("op", [3.0, 1.0]), _fake("s", [2.0, 2.0]), _fake("q", [1.0, 1.0]),
                      _fake("m", [1.0, 1.0]))
    assert not bad.holds and not bad.per_level[0]["pass"] and bad.per_level[1]["pass"]


def test_decay_check():
    res = check_decay(catalog_symbol("smoothed_sign"), _levels(count=3))
    assert res["pass"] and len(res["rows"]) == 6
    for row in res["rows"]:
        assert row["measures"][-1] == 0 and math.isfinite(row["L4"])


# -- runner -------------------------------------------------------------------------------


def test_run_writes_reports(tmp_path):
    res = run_experiment(_small_config(histograms=True), tmp_path)
    assert res.exit_code == 0, res.report["error"]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema"] == "psido-bench-report/1" and report["pass"]
    assert report["config"]["grid"]["N"] == 128
    assert report["certificates"][0]["symbol"] == "smoothed_sign"
    assert all(c["pass"] for c in report["chains"])
    assert {"certify", "families"} <= set(report["wall_times"])
    rows = (tmp_path / "ratios.csv").read_text().splitlines()
    assert rows[0] == "experiment,level,function,label,node,ratio"
    assert len(rows) - 1 == sum(len(r.samples) for r in res.ratio_reports)
    assert sorted(p.name for p in tmp_path.glob("hist_*.dat"))
    names = [r["name"] for r in report["reports"]]
    assert any(n.startswith("pointwise[") for n in names)
    assert any(n.startswith("operator-bound[") for n in names)


def test_run_is_deterministic(tmp_path):
    first = run_experiment(_small_config()).estimates()
    second = run_experiment(_small_config()).estimates()
    assert first == second and first


def test_run_reports_precondition_errors(tmp_path):
    cfg = _small_config()
    cfg["symbols"][0]["class"]["delta"] = 1.0
    res = run_experiment(cfg, tmp_path)
    assert res.exit_code == 1
    assert res.report["error"]["type"] == "PreconditionError"
    assert "0 ≤ δ < 1" in res.report["error"]["message"]
    assert json.loads((tmp_path / "report.json").read_text())["pass"] is False


@pytest.mark.parametrize("text", [
    "{not json",
    json.dumps({"schema": "other/9", "experiments": ["certify"]}),
    json.dumps({"experiments": ["certify"], "colour": "blue"}),
    json.dumps({"experiments": ["teleport"]}),
    json.dumps({"preset": "no-such-preset"}),
    json.dumps({"experiments": ["decay"], "guard_epsilon": 0}),
    json.dumps({"experiments": ["decay"], "refinement_levels": 1}),
    json.dumps({"experiments": ["decay"], "grid": {"n": 1}}),
    json.dumps([1, 2]),
])
def test_malformed_configs_exit_two(tmp_path, text):
    path = tmp_path / "cfg.json"
    path.write_text(text)
    res = run_experiment(str(path), tmp_path / "out")
    assert res.exit_code == 2
    assert res.report["error"]["type"] == "ConfigError"


def test_missing_exponent_is_a_config_error():
    res = run_experiment(_small_config(exponent=None))
    assert res.exit_code == 2 and "exponent" in res.report["error"]["message"]


def test_presets_are_valid_configs():
    for name in config_mod.PRESETS:
        cfg = ExperimentConfig.from_preset(name)
        assert cfg.refinement_levels >= 2 and cfg.guard_epsilon > 0
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
