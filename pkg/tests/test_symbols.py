import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psidobench.errors import CapabilityError, CatalogError, NormUndefinedError, ParameterError
from psidobench.symbols import (HormanderSpec, MiyachiSpec, SamplingPlan, Symbol, catalog_symbol,
                                certify_hormander, certify_miyachi, check_inclusion,
                                eval_derivative, miyachi_norm, multi_indices)

SMOOTH = [
    ("one", {}, 0.0),
    ("bessel_multiplier", {"m": -1.0}, -1.0),
    ("bessel_multiplier", {"m": 1.5}, 1.5),
    ("smoothed_sign", {}, 0.0),
    ("modulated", {"m": 0.0}, 0.0),
    ("modulated", {"m": -0.5}, -0.5),
    ("frequency_coordinate", {}, 1.0),
]


def _fallback(a):
    """The same evaluator with no exact derivatives declared."""
    return Symbol(a.n, a.evaluate, a.identifier + "/fd", a.params)


# -- multi-indices and catalog ------------------------------------------------


def test_multi_indices():
    assert list(multi_indices(1, 2)) == [(0,), (1,), (2,)]
    assert sorted(multi_indices(2, 1)) == [(0, 0), (0, 1), (1, 0)]
    assert sorted(multi_indices(2, 2, exact=True)) == [(0, 2), (1, 1), (2, 0)]
    assert all(sum(a) <= 3 and min(a) >= 0 for a in multi_indices(2, 3))


def test_catalog_one():
    a = catalog_symbol("one")
    x, xi = np.zeros((5, 1)), np.linspace(-10, 10, 5)[:, None]
    assert np.all(a(x, xi) == 1)
    for al in multi_indices(1, 4):
        for be in multi_indices(1, 4):
            if sum(al) + sum(be):
                assert np.all(eval_derivative(a, al, be, x, xi) == 0)


def test_bessel_order_zero_is_one():
    a = catalog_symbol("bessel_multiplier", {"m": 0})
    rng = np.random.default_rng(0)
    xi = rng.uniform(-100, 100, (50, 2))
    assert np.all(catalog_symbol("bessel_multiplier", {"m": 0, "n": 2})(xi, xi) == 1)
    assert np.all(a(np.zeros((1, 1)), xi[:, :1]) == 1)


def test_smoothed_sign_closed_form_checks():
    a = catalog_symbol("smoothed_sign")
    xi = np.concatenate([np.linspace(-1e4, 1e4, 2001), [0.0]])[:, None]
    v = a(np.zeros((1, 1)), xi)
    assert np.max(np.abs(v)) <= 1
    assert v[-1] == 0
    big = a(np.zeros((1, 1)), np.array([[-1e8], [1e8]]))
    np.testing.assert_allclose(big.real, [-1, 1], atol=1e-12)


def test_catalog_errors():
    with pytest.raises(CatalogError):
        catalog_symbol("no_such_symbol")
    with pytest.raises(ParameterError):
        catalog_symbol("bessel_multiplier", {"order": 2})
    with pytest.raises(ParameterError):
        catalog_symbol("one", {"n": 3})
    with pytest.raises(ParameterError):
        catalog_symbol("holder_rough", {"kappa": 0})


@pytest.mark.parametrize("ident,params,m", SMOOTH)
@pytest.mark.parametrize("n", [1, 2])
def test_exact_derivative_of_order_zero_matches_evaluate(ident, params, m, n):
    a = catalog_symbol(ident, {**params, "n": n})
    rng = np.random.default_rng(1)
    x, xi = rng.uniform(-5, 5, (100, n)), rng.uniform(-50, 50, (100, n))
    ev = a(x, xi)
    d0 = a.derivative((0,) * n, (0,) * n, x, xi)
    mask = np.abs(ev) >= 1e-8
    assert np.all(np.abs(d0 - ev)[mask] <= 1e-12 * np.abs(ev[mask]))


# -- eval_derivative ----------------------------------------------------------


def test_eval_derivative_examples():
    one = catalog_symbol("one")
    assert eval_derivative(one, (0,), (0,), np.zeros(1), np.array([3.0])) == 1
    b = catalog_symbol("bessel_multiplier", {"m": -1})
    assert eval_derivative(b, (1,), (0,), np.zeros(1), np.zeros(1)) == 0
    s = catalog_symbol("smoothed_sign")
    x, xi = np.zeros((1, 1)), np.array([[2.0]])
    exact = eval_derivative(s, (1,), (0,), x, xi)
    assert exact.real[0] == pytest.approx(5 ** -1.5, rel=1e-14)
    assert exact.real[0] == pytest.approx(0.0894427, abs=1e-7)
    fd = eval_derivative(_fallback(s), (1,), (0,), x, xi)
    assert abs(fd[0] - exact[0]) <= 1e-7


def test_eval_derivative_capability():
    s = catalog_symbol("smoothed_sign")
    x, xi = np.zeros(1), np.ones(1)
    with pytest.raises(CapabilityError):
        eval_derivative(s, (5,), (0,), x, xi)
    with pytest.raises(CapabilityError):
        eval_derivative(_fallback(s), (1,), (0,), x, xi, allow_fallback=False)
    rough = catalog_symbol("holder_rough", {"kappa": 0.5})
    with pytest.raises(CapabilityError):
        eval_derivative(rough, (0,), (5,), x, xi)
    # x-derivatives of the rough symbol come from the fallback away from its kinks
    d = eval_derivative(rough, (0,), (1,), np.array([1.0]), xi)
    assert d.real == pytest.approx(0.5 * math.cos(1.0) / math.sqrt(math.sin(1.0)), rel=1e-8)


def test_eval_derivative_rejects_bad_indices():
    s = catalog_symbol("smoothed_sign", {"n": 2})
    with pytest.raises(ParameterError):
        eval_derivative(s, (1,), (0, 0), np.zeros(2), np.ones(2))
    with pytest.raises(ParameterError):
        eval_derivative(s, (-1, 0), (0, 0), np.zeros(2), np.ones(2))


@pytest.mark.parametrize("ident,params,m", SMOOTH + [("holder_rough", {"kappa": 0.5, "kappa_pp": 1.0}, -1.0)])
@pytest.mark.parametrize("n", [1, 2])
def test_exact_and_fallback_derivatives_agree(ident, params, m, n):
    a = catalog_symbol(ident, {**params, "n": n})
    fd = _fallback(a)
    rng = np.random.default_rng(2)
    x = rng.uniform(-5, 5, (100, n))
    xi = rng.uniform(-50, 50, (100, n))
    xi *= np.minimum(1.0, 50 / np.linalg.norm(xi, axis=-1))[:, None]
    w = 1 + np.linalg.norm(xi, axis=-1)
    for al in multi_indices(n, 4):
        for be in multi_indices(n, 4):
            r = sum(al) + sum(be)
            if r == 0 or r > 4 or not a.has_exact(al, be):
                continue
            exact = eval_derivative(a, al, be, x, xi)
            approx = eval_derivative(fd, al, be, x, xi)
            scale = np.maximum(np.abs(exact), w ** (m - sum(al)))
            tol = 1e-6 if r <= 3 else 1e-5
            err = np.max(np.abs(exact - approx) / scale)
            assert err <= tol, (al, be, err)


# -- Hörmander certification ---------------------------------------------------


def test_hormander_one():
    rep = certify_hormander(catalog_symbol("one"), HormanderSpec(0, 1, 0))
    assert rep.passed
    for key, levels in rep.constants.items():
        expect = 1.0 if key == "alpha=(0,),beta=(0,)" else 0.0
        assert levels == [expect] * len(levels)


def test_hormander_bessel_own_order():
    rep = certify_hormander(catalog_symbol("bessel_multiplier", {"m": -1}), HormanderSpec(-1, 1, 0))
    assert rep.passed
    assert rep.final["alpha=(0,),beta=(0,)"] <= math.sqrt(2)
    assert rep.stability_factor <= 1.05


@pytest.mark.parametrize("m", [-2.0, -1.0, 0.0, 0.5, 2.0])
@pytest.mark.parametrize("n", [1, 2])
def test_hormander_bessel_orders(m, n):
    rep = certify_hormander(catalog_symbol("bessel_multiplier", {"m": m, "n": n}),
                            HormanderSpec(m, 1, 0))
    assert rep.passed and rep.stability_factor <= 1.1


def test_hormander_polynomial_fails_with_linear_growth():
    a = catalog_symbol("frequency_coordinate")
    rep = certify_hormander(a, HormanderSpec(0, 1, 0), SamplingPlan(refinement_levels=3))
    c00 = rep.constants["alpha=(0,),beta=(0,)"]
    assert not rep.passed
    assert all(b / a_ >= 1.9 for a_, b in zip(c00, c00[1:]))


def test_hormander_rejects_bad_specs():
    with pytest.raises(ParameterError):
        HormanderSpec(0, 1.5, 0)
    with pytest.raises(ParameterError):
        HormanderSpec(0, 1, 0, K_xi=5)
    with pytest.raises(ParameterError):
        SamplingPlan(xi_count=16)
    with pytest.raises(ParameterError):
        SamplingPlan(refinement_levels=1)
    with pytest.raises(ParameterError):
        certify_hormander(catalog_symbol("one"), HormanderSpec(0, 1, 0),
                          SamplingPlan(x_samples=()))


def test_certificate_json_fields():
    rep = certify_hormander(catalog_symbol("smoothed_sign"), HormanderSpec(0, 1, 0))
    d = json.loads(rep.to_json())
    assert set(d) == {"symbol", "spec", "plan_digest", "constants", "sample_counts",
                      "stability_factor", "threshold", "pass"}
    assert d["symbol"] == "smoothed_sign" and d["spec"]["class"] == "hormander"
    assert all(len(v) == 2 for v in d["constants"].values())
    assert d["plan_digest"] == SamplingPlan().digest()


def test_plan_directions_are_deterministic_and_nested():
    p = SamplingPlan(direction_seed=3)
    np.testing.assert_array_equal(p.unit_directions(2, 1), SamplingPlan(direction_seed=3).unit_directions(2, 1))
    assert not np.allclose(p.unit_directions(2, 0), SamplingPlan(direction_seed=4).unit_directions(2, 0))
    for level in range(2):
        coarse = {tuple(v) for v in np.round(p.frequencies(2, level), 9)}
        fine = {tuple(v) for v in np.round(p.frequencies(2, level + 1), 9)}
        assert coarse <= fine
        assert set(np.round(p.axis_points(1, level), 12)) <= set(np.round(p.axis_points(1, level + 1), 12))


# -- Miyachi certification -----------------------------------------------------


def test_miyachi_one():
    rep = certify_miyachi(catalog_symbol("one"), MiyachiSpec(0, 1, 0, 2, 1))
    assert rep.passed
    assert rep.final == {"i": 1.0, "ii": 0.0, "iii": 0.0, "iv": 0.0}
    assert miyachi_norm(rep) == 1.0


def test_miyachi_bessel_order_zero():
    rep = certify_miyachi(catalog_symbol("bessel_multiplier", {"m": 0}), MiyachiSpec(0, 1, 0, 0.5, 1))
    assert rep.passed and rep.stability_factor <= 1.1
    assert math.isfinite(miyachi_norm(rep))


def test_miyachi_holder_rough():
    a = catalog_symbol("holder_rough", {"kappa": 0.5})
    rep = certify_miyachi(a, MiyachiSpec(0, 0, 0, 0.5, 1))
    assert rep.passed
    # |sin|^(1/2) is Hölder-1/2 with constant 1 (attained where sin vanishes)
    assert rep.final["ii"] == pytest.approx(1.0, rel=0.05)


def test_miyachi_holder_rough_in_two_dimensions():
    # the default 2D plan has 361 x points at level 1; a few points across a zero of sin suffice
    a = catalog_symbol("holder_rough", {"kappa": 0.5, "n": 2})
    plan = SamplingPlan(x_samples=((0.0, 0.0), (0.05, 1.0), (-0.4, -2.0), (np.pi, 0.5), (1.3, 3.0)))
    rep = certify_miyachi(a, MiyachiSpec(0, 0, 0, 0.5, 2), plan)
    assert rep.passed
    assert rep.final["ii"] == pytest.approx(1.0, rel=0.05)


def test_miyachi_k_and_k_prime():
    s = MiyachiSpec(0, 1, 0, 0.5, 2)
    assert (s.k, s.k_prime) == (0, 1)
    s = MiyachiSpec(0, 1, 0, 3.0, 2.01)
    assert (s.k, s.k_prime) == (2, 2)
    with pytest.raises(ParameterError):
        MiyachiSpec(0, 1, 0, 0, 1)
    with pytest.raises(ParameterError):
        MiyachiSpec(0, 1, 0, 6, 1)


def test_miyachi_detects_roughness_above_its_order():
    a = catalog_symbol("holder_rough", {"kappa": 0.5})
    assert not certify_miyachi(a, MiyachiSpec(0, 0, 0, 1.0, 1)).passed


def test_miyachi_norm_of_failed_report_raises():
    rep = certify_hormander(catalog_symbol("frequency_coordinate"), HormanderSpec(0, 1, 0))
    with pytest.raises(NormUndefinedError):
        miyachi_norm(rep)


def test_miyachi_norm_golden(golden):
    rep = certify_miyachi(catalog_symbol("bessel_multiplier", {"m": 0}), MiyachiSpec(0, 1, 0, 0.5, 1))
    assert miyachi_norm(rep) == golden["miyachi_norm_bessel_m0"]


# -- inclusion ---------------------------------------------------------------------


def test_inclusion_one():
    res = check_inclusion(catalog_symbol("one"), MiyachiSpec(0, 1, 0, 2, 2), MiyachiSpec(0, 1, 0, 1, 2))
    assert res.holds and res.ratio == 1.0


@pytest.mark.parametrize("ident,params,m", [("bessel_multiplier", {"m": 0}, 0.0),
                                            ("bessel_multiplier", {"m": -1}, -1.0),
                                            ("smoothed_sign", {}, 0.0),
                                            ("modulated", {"m": 0}, 0.0)])
def test_inclusion_catalog(ident, params, m):
    res = check_inclusion(catalog_symbol(ident, params), MiyachiSpec(m, 1, 0, 2, 2),
                          MiyachiSpec(m, 1, 0, 1, 1))
    assert res.holds
    assert res.ratio <= 10


def test_inclusion_rejects_wrong_order():
    a = catalog_symbol("one")
    with pytest.raises(ParameterError):
        check_inclusion(a, MiyachiSpec(0, 1, 0, 1, 1), MiyachiSpec(0, 1, 0, 2, 1))
    with pytest.raises(ParameterError):
        check_inclusion(a, MiyachiSpec(0, 1, 0, 2, 2), MiyachiSpec(-1, 1, 0, 1, 1))


# -- invariants ----------------------------------------------------------------------


@pytest.mark.parametrize("ident,params,m", SMOOTH[:6])
def test_certifier_monotone_in_plan(ident, params, m):
    a = catalog_symbol(ident, params)
    small = certify_hormander(a, HormanderSpec(m, 1, 0), SamplingPlan(refinement_levels=2))
    large = certify_hormander(a, HormanderSpec(m, 1, 0), SamplingPlan(refinement_levels=3))
    for key, levels in large.constants.items():
        assert all(b >= a_ for a_, b in zip(levels, levels[1:]))
        assert levels[:2] == small.constants[key]
    rs = certify_miyachi(a, MiyachiSpec(m, 1, 0, 1.5, 1.5), SamplingPlan(refinement_levels=2))
    rl = certify_miyachi(a, MiyachiSpec(m, 1, 0, 1.5, 1.5), SamplingPlan(refinement_levels=3))
    for key, levels in rl.constants.items():
        assert all(b >= a_ for a_, b in zip(levels, levels[1:]))
        assert levels[:2] == rs.constants[key]


@pytest.mark.parametrize("ident,params,m", SMOOTH[:6])
@pytest.mark.parametrize("kappa,kappa_prime", [(0.5, 1.0), (1.0, 1.0), (2.0, 1.5), (2.0, 2.0)])
def test_hormander_pass_implies_miyachi_pass(ident, params, m, kappa, kappa_prime):
    a = catalog_symbol(ident, params)
    plan = SamplingPlan()
    h = certify_hormander(a, HormanderSpec(m, 1, 0, K_xi=3, K_x=3), plan)
    assert h.passed
    assert certify_miyachi(a, MiyachiSpec(m, 1, 0, kappa, kappa_prime), plan).passed


@settings(max_examples=10, deadline=None)
@given(c=st.floats(-1e3, 1e3, allow_nan=False).filter(lambda v: abs(v) > 1e-3),
       which=st.sampled_from([0, 1, 3, 4]))
def test_certificate_scaling_covariance(c, which):
    ident, params, m = SMOOTH[which]
    a = catalog_symbol(ident, params)
    base_h = certify_hormander(a, HormanderSpec(m, 1, 0))
    scaled_h = certify_hormander(c * a, HormanderSpec(m, 1, 0))
    base_m = certify_miyachi(a, MiyachiSpec(m, 1, 0, 1.0, 1.0))
    scaled_m = certify_miyachi(c * a, MiyachiSpec(m, 1, 0, 1.0, 1.0))
    for base, scaled in ((base_h, scaled_h), (base_m, scaled_m)):
        for key in base.constants:
            np.testing.assert_allclose(scaled.constants[key], abs(c) * np.array(base.constants[key]),
                                       rtol=1e-12, atol=0)
        assert scaled.passed == base.passed


def test_symbol_algebra():
    a = catalog_symbol("bessel_multiplier", {"m": -1})
    b = catalog_symbol("smoothed_sign")
    s = a + 2 * b
    x, xi = np.zeros((3, 1)), np.array([[-2.0], [0.0], [5.0]])
    np.testing.assert_allclose(s(x, xi), a(x, xi) + 2 * b(x, xi), rtol=1e-15)
    np.testing.assert_allclose(eval_derivative(s, (1,), (0,), x, xi),
                               eval_derivative(a, (1,), (0,), x, xi)
                               + 2 * eval_derivative(b, (1,), (0,), x, xi), rtol=1e-14)
    assert s.x_independent
    with pytest.raises(ParameterError):
        a + catalog_symbol("one", {"n": 2})
