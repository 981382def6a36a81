from __future__ import annotations

import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyberquote import data
from cyberquote.errors import FormatError, NumericalError, UnknownPracticeError
from cyberquote.maturity import load_assessment, load_maturity_model, mu
from cyberquote.org import Layer
from cyberquote.pricing import LayerEconomics, UtilitySpec, breach_probability, price_layer
from cyberquote.sim import (
    GENERATOR_NAME,
    DistributionSpec,
    PortfolioMember,
    PortfolioSpec,
    SimConfig,
    default_seed,
    loss_cents,
    mc_price_layer,
    parse_distribution_block,
    portfolio_accumulation,
    sample_delta_arrays,
    sample_deltas,
    simulate_losses,
    summarize,
)

from conftest import retail_economics

UNIFORM = DistributionSpec.uniform(0, 1)
ZERO = DistributionSpec.point(0.0)
ONE = DistributionSpec.point(1.0)


def test_point_draws():
    scen = sample_deltas(ONE, ZERO, SimConfig(5, 1))
    assert [(s.delta_c, s.delta_s) for s in scen] == [(1.0, 0.0)] * 5
    assert sum(s.weight for s in scen) == pytest.approx(1.0)


@pytest.mark.parametrize("dist", [DistributionSpec.uniform(0, 1), DistributionSpec.beta(2, 2)])
def test_sample_mean_near_half(dist):
    dc, _ = sample_delta_arrays(dist, ZERO, SimConfig(10**6, 20231016))
    assert abs(dc.mean() - 0.5) < 0.002
    assert dc.min() >= 0.0 and dc.max() <= 1.0


def test_uniform_bounds_respected():
    dc, _ = sample_delta_arrays(DistributionSpec.uniform(0.2, 0.3), ZERO, SimConfig(10_000, 3))
    assert dc.min() >= 0.2 and dc.max() <= 0.3


def test_substream_contract():
    # Draw k depends only on (seed, stream, k): a prefix run agrees with the full run.
    full_c, full_s = sample_delta_arrays(UNIFORM, UNIFORM, SimConfig(200_000, 9), stream=4)
    part_c, part_s = sample_delta_arrays(UNIFORM, UNIFORM, SimConfig(70_001, 9), stream=4)
    assert np.array_equal(full_c[:70_001], part_c)
    assert np.array_equal(full_s[:70_001], part_s)
    other_c, _ = sample_delta_arrays(UNIFORM, UNIFORM, SimConfig(10, 9), stream=5)
    assert not np.array_equal(other_c, full_c[:10])


def test_c_and_s_words_differ():
    dc, ds = sample_delta_arrays(UNIFORM, UNIFORM, SimConfig(1000, 1))
    assert not np.array_equal(dc, ds)
    assert abs(np.corrcoef(dc, ds)[0, 1]) < 0.1


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_worker_count_irrelevant(econ, mus, workers):
    cfg = SimConfig(300_001, 77)
    base = loss_cents(econ[1], mus[1], UNIFORM, DistributionSpec.beta(2, 5), cfg)
    par = loss_cents(econ[1], mus[1], UNIFORM, DistributionSpec.beta(2, 5), cfg, workers=workers)
    assert np.array_equal(base, par)


def test_point_simulation(econ, mus):
    r = simulate_losses(econ[1], mus[1], ONE, ZERO, SimConfig(1000, 5))
    assert r.mean == Decimal("66666.67")
    assert r.sd == Decimal("0.00")
    assert set(r.quantiles.values()) == {Decimal("66666.67")}
    assert r.generator == GENERATOR_NAME


def test_single_draw(econ, mus):
    r = simulate_losses(econ[1], mus[1], UNIFORM, ZERO, SimConfig(1, 5))
    cents = loss_cents(econ[1], mus[1], UNIFORM, ZERO, SimConfig(1, 5))
    assert r.mean == Decimal(int(cents[0])).scaleb(-2)
    assert r.sd == Decimal("0.00")


def test_uniform_mean_close(econ, mus):
    r = simulate_losses(econ[1], mus[1], UNIFORM, ZERO, SimConfig(10**6, 20231016))
    assert float(r.mean) == pytest.approx(33333.33, rel=0.01)
    # law-of-large-numbers bound: 3 standard errors
    assert abs(float(r.mean) - 100_000 * 0.5 / 1.5) < 3 * float(r.sd) / math.sqrt(r.n)
    qs = list(r.quantiles.values())
    assert qs == sorted(qs)


def test_summarize_nearest_rank():
    r = summarize(np.arange(1, 101, dtype=np.int64), seed=0)
    assert r.quantiles == {
        0.5: Decimal("0.50"),
        0.9: Decimal("0.90"),
        0.95: Decimal("0.95"),
        0.99: Decimal("0.99"),
    }
    assert r.mean == Decimal("0.50")  # 50.5 cents, half-even


def test_summarize_exact_mean():
    r = summarize(np.array([0, 6666667], dtype=np.int64), seed=0)
    assert r.mean == Decimal("33333.34")


def test_mc_point_equals_closed_form(econ, mus, full_loss):
    for spec in (UtilitySpec.linear(), UtilitySpec.cara(1e-5)):
        mc = mc_price_layer(econ[1], mus[1], ONE, ZERO, SimConfig(17, 3), spec)
        assert mc == price_layer(econ[1], mus[1], full_loss, spec).premium


def test_mc_uniform_linear_near_closed_form(econ, mus):
    mc = mc_price_layer(econ[1], mus[1], UNIFORM, ZERO, SimConfig(10**6, 11), UtilitySpec.linear())
    closed = breach_probability(econ[1], mus[1]) * 100_000 * 0.5 / 1.5
    assert float(mc) == pytest.approx(closed, rel=0.01)


def test_mc_cara_above_linear(econ, mus):
    cfg = SimConfig(50_000, 2)
    lin = mc_price_layer(econ[2], mus[2], UNIFORM, ZERO, cfg, UtilitySpec.linear())
    cara = mc_price_layer(econ[2], mus[2], UNIFORM, ZERO, cfg, UtilitySpec.cara(1e-5))
    assert cara >= lin


def test_mc_overflow_guard(econ, mus):
    with pytest.raises(NumericalError):
        mc_price_layer(econ[1], mus[1], ONE, ZERO, SimConfig(10, 1), UtilitySpec.cara(1.0))


@pytest.mark.parametrize(
    "text", ["normal(0,1)", "uniform(0.5,0.2)", "uniform(0,2)", "beta(0,1)", "point(1,2)", "uniform", "beta(a,b)"]
)
def test_bad_distributions(text):
    with pytest.raises(FormatError):
        DistributionSpec.parse(text)


def test_parse_distribution_block():
    b = parse_distribution_block(data.read("uniform.dist").strip())
    assert (b.dist_c, b.dist_s, b.n, b.seed) == (UNIFORM, ZERO, 100_000, 20231016)
    assert parse_distribution_block("dist_c=beta(2,2);dist_s=point(0);n=5").seed is None
    for bad in ["dist_c=point(1);n=5", "dist_c=point(1);dist_s=point(0);n=0", "dist_c=point(1);dist_s=point(0);n=1;x=2",
                "dist_c=point(1);dist_s=point(0);n=1;seed=-1", "garbage"]:
        with pytest.raises(FormatError):
            parse_distribution_block(bad)


def test_default_seed(monkeypatch):
    monkeypatch.delenv("CYBERQUOTE_SEED", raising=False)
    assert default_seed(None, 3) == 3
    monkeypatch.setenv("CYBERQUOTE_SEED", "42")
    assert default_seed(None) == 42
    assert default_seed(7) == 7
    monkeypatch.setenv("CYBERQUOTE_SEED", "x")
    with pytest.raises(FormatError):
        default_seed(None)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0, 1)
    with pytest.raises(ValueError):
        SimConfig(5, -1)
    SimConfig(1, 2**64 - 1)


def test_large_seeds_are_distinct():
    top, _ = sample_delta_arrays(UNIFORM, ZERO, SimConfig(4, 2**64 - 1))
    below, _ = sample_delta_arrays(UNIFORM, ZERO, SimConfig(4, 2**64 - 2))
    assert not np.array_equal(top, below)


# --- accumulation ----------------------------------------------------------------------


def _member(name: str, layers=(1, 2, 3), dist=UNIFORM) -> PortfolioMember:
    spec = load_maturity_model(data.read("retail-model.csv"))
    econ = retail_economics()
    return PortfolioMember(
        name,
        spec,
        {Layer(l): load_assessment(data.read(f"retail-l{l}.assess")) for l in layers},
        {Layer(l): econ[Layer(l)] for l in layers},
        {Layer(l): (dist, ZERO) for l in layers},
    )


def test_shared_shock_dominates():
    portfolio = PortfolioSpec((_member("a"), _member("b")), {"AC.1": {0, 1}})
    res = portfolio_accumulation(portfolio, "AC.1", SimConfig(20_000, 8))
    assert res.shocked.mean > res.baseline.mean
    for q in res.baseline.quantiles:
        assert res.shocked.quantiles[q] >= res.baseline.quantiles[q]
    assert res.affected_members == ("a", "b")
    assert res.shocked.seed == res.baseline.seed


def test_unshared_shock_identical():
    portfolio = PortfolioSpec((_member("a"), _member("b")), {"AC.1": set()})
    res = portfolio_accumulation(portfolio, "AC.1", SimConfig(5_000, 8))
    assert res.shocked == res.baseline
    assert res.affected_members == ()


def test_single_member_matches_member_result():
    member = _member("solo", layers=(1,))
    res = portfolio_accumulation(PortfolioSpec((member,), {"SC.1": set()}), "SC.1", SimConfig(5_000, 3))
    rec = mu(member.assessments[Layer(1)], member.spec)
    direct = simulate_losses(member.economics[Layer(1)], rec, UNIFORM, ZERO, SimConfig(5_000, 3))
    assert res.baseline == direct


def test_unknown_shock_practice():
    with pytest.raises(UnknownPracticeError):
        portfolio_accumulation(PortfolioSpec((_member("a"),), {}), "AC.1", SimConfig(10, 1))


def test_bad_member_index():
    with pytest.raises(ValueError):
        PortfolioSpec((_member("a"),), {"AC.1": {1}})


def test_accumulation_worker_independent():
    portfolio = PortfolioSpec((_member("a"), _member("b")), {"AC.1": {0}})
    cfg = SimConfig(140_000, 5)
    assert portfolio_accumulation(portfolio, "AC.1", cfg) == portfolio_accumulation(portfolio, "AC.1", cfg, workers=4)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 2**64 - 1))
def test_quantiles_ordered(lo, width, seed):
    hi = min(1.0, lo + width)
    e = LayerEconomics(1, 0.05, 1, 1, 1, 1000, 500, 1000)
    r = simulate_losses(e, mu_from(0.3), DistributionSpec.uniform(lo, hi), UNIFORM, SimConfig(257, seed))
    qs = list(r.quantiles.values())
    assert qs == sorted(qs)
    assert r.quantiles[0.5] >= Decimal(0)


def mu_from(p):
    from cyberquote.maturity import MuRecord

    return MuRecord(1, p, 0.5, 0.5)
