from __future__ import annotations

import math
from decimal import Decimal

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cyberquote import data
from cyberquote.erd import parse_org
from cyberquote.errors import CoverageConstraintError, FormatError, ModelValidationError, NumericalError, UninsurableLayerError
from cyberquote.maturity import MuRecord, load_assessment, load_maturity_model
from cyberquote.org import EntityNode, OrgModel, RelationshipEdge
from cyberquote.pricing import (
    LayerEconomics,
    Scenario,
    UtilitySpec,
    bisect_premium,
    breach_probability,
    check_coverage_constraint,
    expected_loss,
    gordon_loeb_sbf,
    indifference_premium,
    insurer_utility,
    layer_loss,
    normalize_weights,
    price_layer,
    quote,
    quote_layers,
    raw_loss,
    risk_aversion_check,
    utility_value,
)

from conftest import retail_economics

LINEAR = UtilitySpec.linear()
CARA = UtilitySpec.cara(1e-5)

# Oracle values computed with mpmath at 50 digits from the worked-example inputs.
ORACLE_PI = {1: 0.0333333333333333, 2: 0.0125, 3: 0.00588235294117647}
ORACLE_LOSS = {1: Decimal("66666.67"), 2: Decimal("125000.00"), 3: Decimal("176470.59")}
ORACLE_PREMIUM = {1: 2222.2223333333, 2: 1562.5, 3: 1038.0622941176}
ORACLE_RATE = {1: 0.0444444466666667, 2: 0.0130208333333333, 3: 0.00494315378151261}
ORACLE_CARA_PREMIUM = {1: 3110.24033498848, 2: 3065.45967542068, 3: 2807.20013514129}
ORACLE_CARA_U = 48658.2898081312


def test_sbf_examples():
    assert gordon_loeb_sbf(0, 0.05, 1, 1) == 0.05
    assert gordon_loeb_sbf(1, 0.05, 1, 1) == pytest.approx(0.025, abs=1e-15)
    with pytest.raises(ValueError):
        gordon_loeb_sbf(-0.1, 0.05, 1, 1)


def test_sbf_beta_zero():
    # beta must be > 0 for LayerEconomics, but the bare function accepts 0.
    for z in (0.0, 0.3, 10.0):
        assert gordon_loeb_sbf(z, 0.05, 1.0, 0.0) == 0.05


@pytest.mark.parametrize("layer", [1, 2, 3])
def test_retail_breach_probability(econ, mus, layer):
    assert breach_probability(econ[layer], mus[layer]) == pytest.approx(ORACLE_PI[layer], abs=1e-9)


def test_breach_probability_at_zero_objective(econ):
    assert breach_probability(econ[1], MuRecord(1, 0.5, 0.0, 0.5)) == 0.05


@pytest.mark.parametrize("layer", [1, 2, 3])
def test_retail_layer_loss(econ, mus, layer, full_loss):
    assert layer_loss(econ[layer], mus[layer], full_loss[0]) == ORACLE_LOSS[layer]


def test_layer_loss_trivial(econ, mus):
    assert layer_loss(econ[1], mus[1], Scenario(0, 0)) == Decimal("0.00")
    e = LayerEconomics(1, 0.05, 1, 1, 3.5, 1000, 250, 1000)
    assert layer_loss(e, MuRecord(1, 0.0, 0.5, 0.5), Scenario(0.5, 0.2)) == Decimal("550.00")


def test_expected_loss(econ, mus):
    assert expected_loss(econ[1], mus[1], [Scenario(1, 0)]) == Decimal("66666.67")
    two = normalize_weights([Scenario(0, 0), Scenario(1, 0)])
    assert expected_loss(econ[1], mus[1], two) == Decimal("33333.34")
    assert expected_loss(econ[2], mus[2], [Scenario(1, 0)]) == Decimal("125000.00")
    with pytest.raises(ValueError):
        expected_loss(econ[1], mus[1], [])


def test_utility_values():
    assert utility_value(CARA, 0.0) == 0.0
    assert utility_value(LINEAR, 5.0) == 5.0
    assert utility_value(CARA, 66666.67) == pytest.approx(ORACLE_CARA_U, abs=0.01)


def test_cara_taylor_branch_continuous():
    spec = UtilitySpec.cara(1e-5)
    for x in (9.99e-4, 1.001e-3):  # a*x straddles 1e-8
        exact = -math.expm1(-spec.a * x) / spec.a
        assert utility_value(spec, x) == pytest.approx(exact, rel=1e-15)


@pytest.mark.parametrize("a", [1e-5, 1e-3])
def test_risk_aversion_check(a):
    assert risk_aversion_check(UtilitySpec.cara(a)) < 1e-6


def test_risk_aversion_check_linear():
    with pytest.raises(ValueError):
        risk_aversion_check(LINEAR)


@pytest.mark.parametrize("text, spec", [
    ("linear", LINEAR),
    ("kind=linear", LINEAR),
    ("kind=cara,a=1e-5", CARA),
    ("cara, a=0.001", UtilitySpec.cara(1e-3)),
])
def test_utility_parse(text, spec):
    assert UtilitySpec.parse(text) == spec


@pytest.mark.parametrize("text", ["cara", "kind=cara,a=-1", "kind=quadratic", "kind=linear,a=1", "kind=cara,a=x", "kind=linear,b=2"])
def test_utility_parse_errors(text):
    with pytest.raises(FormatError):
        UtilitySpec.parse(text)


def test_insurer_utility_examples(econ, mus, full_loss):
    assert insurer_utility(LINEAR, 0.0, 123.0, full_loss, econ[1], mus[1]) == 123.0
    assert insurer_utility(LINEAR, 1.0, 100.0, full_loss, econ[1], mus[1]) == pytest.approx(100.0 - 66666.67)
    pi = ORACLE_PI[1]
    assert insurer_utility(LINEAR, pi, 2222.22, full_loss, econ[1], mus[1]) == pytest.approx(0.0, abs=0.01)
    with pytest.raises(ValueError):
        insurer_utility(LINEAR, 1.5, 0.0, full_loss, econ[1], mus[1])


@pytest.mark.parametrize("layer", [1, 2, 3])
def test_price_layer_linear(econ, mus, full_loss, layer):
    lp = price_layer(econ[layer], mus[layer], full_loss, LINEAR)
    assert float(lp.premium) == pytest.approx(ORACLE_PREMIUM[layer], abs=0.01)
    assert lp.rate == pytest.approx(ORACLE_RATE[layer], abs=1e-6)
    assert lp.premium_value == pytest.approx(ORACLE_PREMIUM[layer], rel=1e-12)
    assert lp.limit_used == Decimal(str(mus[layer].m * econ[layer].kappa)).quantize(Decimal("0.01"))


@pytest.mark.parametrize("layer", [1, 2, 3])
def test_price_layer_cara(econ, mus, full_loss, layer):
    lp = price_layer(econ[layer], mus[layer], full_loss, CARA)
    assert float(lp.premium) == pytest.approx(ORACLE_CARA_PREMIUM[layer], abs=0.01)


@pytest.mark.parametrize("spec", [LINEAR, CARA, UtilitySpec.cara(1e-3)])
def test_bisection_agrees_with_closed_form(econ, mus, spec):
    scen = normalize_weights([Scenario(1, 0, 2), Scenario(0.3, 0, 1), Scenario(0, 0, 1)])
    e, m = econ[1], mus[1]
    if spec.a and spec.a * 66666.67 > 700:
        with pytest.raises(NumericalError):
            price_layer(e, m, scen, spec)
        return
    closed = price_layer(e, m, scen, spec).premium_value
    bis = price_layer(e, m, scen, spec, method="bisection").premium_value
    assert bis == pytest.approx(closed, rel=1e-9)


def test_bisection_negative_losses():
    # Discount scenarios push the premium below zero; the bracket must extend downward.
    p = bisect_premium(LINEAR, 0.5, [-100.0, -50.0], [0.5, 0.5])
    assert p == pytest.approx(-37.5, rel=1e-9)
    assert indifference_premium(LINEAR, 0.5, [-100.0, -50.0], [0.5, 0.5]) == pytest.approx(-37.5)


def test_cara_overflow_guard():
    with pytest.raises(NumericalError, match="rescale"):
        indifference_premium(UtilitySpec.cara(1e-2), 0.1, [100_000.0], [1.0])


def test_bisection_nonconvergence():
    with pytest.raises(NumericalError):
        bisect_premium(LINEAR, 0.5, [100.0], [1.0], rel_tol=0.0, max_iter=5)


def test_uninsurable_layer(econ, full_loss):
    with pytest.raises(UninsurableLayerError):
        price_layer(econ[1], MuRecord(1, 0.5, 0.5, 0.0), full_loss, LINEAR)


def test_zero_limit_zero_loss(econ):
    lp = price_layer(econ[1], MuRecord(1, 0.5, 0.5, 0.0), [Scenario(0, 0)], LINEAR)
    assert (lp.premium, lp.rate) == (Decimal("0.00"), 0.0)


def test_zero_limit_negative_loss(econ):
    lp = price_layer(econ[1], MuRecord(1, 0.5, 0.5, 0.0), [Scenario(-0.5, 0)], LINEAR)
    assert lp.rate is None
    assert lp.premium < 0
    assert [w.code for w in lp.warnings] == ["rate-undefined"]


def test_coverage_constraint(econ, mus):
    [w] = check_coverage_constraint(econ[1], mus[1])
    assert (w.severity, w.code) == ("warning", "coverage-constraint")
    [e] = check_coverage_constraint(econ[1], mus[1], strict=True)
    assert e.severity == "error"
    boundary = LayerEconomics(1, 0.05, 1, 1, 1, 30_000, 20_000, 100_000)
    assert check_coverage_constraint(boundary, mus[1]) == []
    zero = LayerEconomics(1, 0.05, 1, 1, 1, 0, 0, 100_000)
    assert check_coverage_constraint(zero, mus[1], strict=True) == []


def _retail_quote(utility, scenarios=None, strict=False):
    spec = load_maturity_model(data.read("retail-model.csv"))
    assessments = {l: load_assessment(data.read(f"retail-l{l}.assess")) for l in (1, 2, 3)}
    scen = scenarios or {l: [Scenario(1, 0)] for l in (1, 2, 3)}
    return quote(parse_org(data.read("retail.org")), assessments, spec, retail_economics(), scen, utility, strict=strict)


def test_quote_retail_total():
    q = _retail_quote(LINEAR)
    assert float(q.total_premium) == pytest.approx(4822.78, abs=0.01)
    assert q.total_premium == sum(lp.premium for lp in q.layers)
    assert [int(lp.layer) for lp in q.layers] == [1, 2, 3]
    assert [w.code for w in q.warnings].count("coverage-constraint") == 3


def test_quote_zero_deltas():
    q = _retail_quote(LINEAR, {l: [Scenario(0, 0)] for l in (1, 2, 3)})
    assert q.total_premium == Decimal("0.00")


def test_quote_cara_above_linear():
    assert _retail_quote(CARA).total_premium >= _retail_quote(LINEAR).total_premium


def test_quote_strict_raises():
    with pytest.raises(CoverageConstraintError):
        _retail_quote(LINEAR, strict=True)


def test_quote_rejects_invalid_org():
    bad = OrgModel("x", (EntityNode("A", 1),), (RelationshipEdge("r", "x", ("A", "B")),))
    with pytest.raises(ModelValidationError):
        quote(bad, {}, load_maturity_model(data.read("retail-model.csv")), retail_economics(), {}, LINEAR)


def test_quote_zone_exposure_warning():
    org = OrgModel("flat", (EntityNode("A", 1), EntityNode("B", 2), EntityNode("C", 3)))
    spec = load_maturity_model(data.read("retail-model.csv"))
    assessments = {l: load_assessment(data.read(f"retail-l{l}.assess")) for l in (1, 2, 3)}
    q = quote(org, assessments, spec, retail_economics(), {l: [Scenario(1, 0)] for l in (1, 2, 3)}, LINEAR)
    assert [w.code for w in q.warnings].count("no-critical-entities") == 3


def test_quote_layers_missing_inputs():
    with pytest.raises(FormatError):
        quote_layers(retail_economics(), {}, {}, LINEAR)


def test_quote_report_shapes():
    q = _retail_quote(LINEAR)
    d = q.to_dict()
    assert set(d) == {"layers", "total_premium", "utility", "warnings"}
    assert set(d["layers"][0]) == {"layer", "pi", "expected_loss", "premium", "rate", "limit_used"}
    text = q.to_text()
    assert "4822.78" in text and "2222.22" in text
    assert "coverage-constraint" not in q.to_text(with_warnings=False)


def test_economics_validation():
    with pytest.raises(ValueError):
        LayerEconomics(1, 1.5, 1, 1, 1, 1, 0, 1)
    with pytest.raises(ValueError):
        LayerEconomics(1, 0.5, 0, 1, 1, 1, 0, 1)
    with pytest.raises(ValueError):
        LayerEconomics(1, 0.5, 1, 1, -1, 1, 0, 1)
    with pytest.raises(ValueError):
        Scenario(1.5, 0)
    with pytest.raises(ValueError):
        Scenario(0.5, 0, 0)


def test_mpmath_oracle_agrees():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    pi = mp.mpf(1) / 30
    L = mp.mpf("66666.67")
    a = mp.mpf("1e-5")
    assert float(pi * L) == pytest.approx(ORACLE_PREMIUM[1], rel=1e-12)
    assert float(mp.log(pi * mp.e ** (a * L) + 1 - pi) / a) == pytest.approx(ORACLE_CARA_PREMIUM[1], rel=1e-12)
    assert float((1 - mp.e ** (-a * L)) / a) == pytest.approx(ORACLE_CARA_U, rel=1e-12)


# --- properties -----------------------------------------------------------------

probs = st.floats(0.0, 1.0)
econ_params = st.tuples(
    st.floats(0.001, 1.0),  # v
    st.floats(0.01, 10.0),  # alpha
    st.floats(0.01, 10.0),  # beta
    st.floats(0.0, 5.0),  # gamma
    st.floats(0.0, 1e6),  # lambda_c
    st.floats(0.0, 1e6),  # lambda_s
)


def _econ(params):
    v, al, be, ga, lc, ls = params
    return LayerEconomics(1, v, al, be, ga, lc, ls, max(lc + ls, 1.0))


@settings(max_examples=200)
@given(econ_params, probs, probs, probs)
def test_pi_decreasing_and_bounded(params, o1, o2, p):
    assume(o1 != o2)
    e = _econ(params)
    lo, hi = sorted((o1, o2))
    pi_lo, pi_hi = (breach_probability(e, MuRecord(1, p, o, 0.5)) for o in (lo, hi))
    assert pi_hi < pi_lo or pi_hi == pytest.approx(pi_lo, rel=1e-15)
    v, al, be = params[:3]
    assert v / (al + 1) ** be * (1 - 1e-12) <= pi_hi <= v


@settings(max_examples=200)
@given(econ_params, probs, probs, probs, probs, st.floats(0.1, 10))
def test_loss_monotone_and_homogeneous(params, p1, p2, dc, ds, k):
    e = _econ(params)
    lo, hi = sorted((p1, p2))
    s = Scenario(dc, ds)
    assert layer_loss(e, MuRecord(1, hi, 0.5, 0.5), s) <= layer_loss(e, MuRecord(1, lo, 0.5, 0.5), s)
    m = MuRecord(1, p1, 0.5, 0.5)
    assert layer_loss(e, m, Scenario(min(1.0, dc + 0.1), ds)) >= layer_loss(e, m, s)
    v, al, be, ga, lc, ls = params
    scaled = LayerEconomics(1, v, al, be, ga, lc * k, ls * k, max((lc + ls) * k, 1.0))
    assert raw_loss(scaled, p1, dc, ds) == pytest.approx(k * raw_loss(e, p1, dc, ds), rel=1e-12, abs=1e-9)


scenario_sets = st.lists(
    st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=5
)


@settings(max_examples=200)
@given(econ_params, probs, probs, scenario_sets)
def test_linear_closed_form_matches_bisection(params, p, o, scen):
    e = _econ(params)
    m = MuRecord(1, p, o, 0.5)
    scenarios = normalize_weights([Scenario(*s) for s in scen])
    closed = price_layer(e, m, scenarios, LINEAR).premium_value
    bis = price_layer(e, m, scenarios, LINEAR, method="bisection").premium_value
    assert bis == pytest.approx(closed, rel=1e-9, abs=1e-9)


@settings(max_examples=100)
@given(probs, st.lists(st.floats(0, 1e5), min_size=1, max_size=5))
def test_cara_tends_to_linear(pi, losses):
    w = [1 / len(losses)] * len(losses)
    lin = indifference_premium(LINEAR, pi, losses, w)
    cara = indifference_premium(UtilitySpec.cara(1e-12), pi, losses, w)
    assert cara == pytest.approx(lin, rel=1e-6, abs=1e-9)


def test_negative_premium_representable(econ, mus):
    q = quote_layers({1: econ[1]}, {1: mus[1]}, {1: [Scenario(-0.5, 0)]}, LINEAR)
    assert q.total_premium < 0
