import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from scengen.config import RiskConfig
from scengen.data import FactorLayout
from scengen.errors import InsufficientHistory, InvalidConfig, MaturityOutOfRange, TooFewSamplesWarning
from scengen.risk import (
    FxSpotPosition,
    Portfolio,
    ZeroCouponBond,
    backtest,
    histogram_export,
    kupiec_pof,
    parse_portfolio,
    portfolio_value,
    scenario_pnl,
    var_es,
    zcb_price,
    zcb_weights,
)

GRID = np.array([0.0, 0.5, 1.0, 2.0, 5.0])
LAYOUT = FactorLayout(("EUR", "USD"), tuple(GRID))


def test_zcb_examples():
    assert zcb_price(np.zeros(5), 3.3, GRID) == 1.0
    assert zcb_price(np.full(5, 0.05), 2.0, GRID) == pytest.approx(0.904837418, rel=1e-9)
    assert zcb_price(np.full(5, 0.05), 0.0, GRID) == 1.0


def test_zcb_weights_integrate_piecewise_linear_exactly():
    rng = np.random.default_rng(0)
    curve = rng.normal(size=5)
    fine = np.linspace(0, 3.7, 200_001)
    integrand = np.interp(fine, GRID, curve)
    brute = np.sum((integrand[1:] + integrand[:-1]) / 2 * np.diff(fine))
    assert curve @ zcb_weights(GRID, 3.7) == pytest.approx(brute, rel=1e-9)


def test_zcb_weights_reject_out_of_grid():
    with pytest.raises(MaturityOutOfRange):
        zcb_weights(GRID, 5.5)


def _state(eur, usd, logfx):
    return np.concatenate([np.full(5, eur), np.full(5, usd), [logfx]])


def test_portfolio_value_examples():
    assert portfolio_value(Portfolio([ZeroCouponBond("EUR", 2.0, 100.0)]), _state(0, 0, 0), LAYOUT) == 100.0
    assert portfolio_value(Portfolio([FxSpotPosition("USD", 1.0)]), _state(0, 0, 0), LAYOUT) == 1.0
    v = portfolio_value(Portfolio([ZeroCouponBond("USD", 2.0, 1.0)]), _state(0, 0.05, math.log(2)), LAYOUT)
    assert v == pytest.approx(1.809674837, rel=1e-9)


def test_empty_portfolio_rejected():
    with pytest.raises(InvalidConfig):
        Portfolio([])


def test_parse_portfolio():
    p = parse_portfolio("ZCB:EUR:2:100, FX:USD:1000")
    assert p.instruments == (ZeroCouponBond("EUR", 2.0, 100.0), FxSpotPosition("USD", 1000.0))
    with pytest.raises(InvalidConfig):
        parse_portfolio("BOND:EUR:2")


@settings(max_examples=50)
@given(st.floats(-10, 10), st.floats(-10, 10), hnp.arrays(np.float64, 11, elements=st.floats(-0.05, 0.1)))
def test_portfolio_value_linear_in_notionals(a, b, state):
    p = Portfolio([ZeroCouponBond("EUR", 1.5, 1.0), FxSpotPosition("USD", 2.0)])
    q = Portfolio([ZeroCouponBond("USD", 4.0, 3.0)])
    combined = portfolio_value(p.scaled(a) + q.scaled(b), state, LAYOUT)
    parts = a * portfolio_value(p, state, LAYOUT) + b * portfolio_value(q, state, LAYOUT)
    assert combined == pytest.approx(parts, rel=1e-12, abs=1e-12)


def test_scenario_pnl_examples():
    base = _state(0.01, 0.02, 0.3)
    p = Portfolio([FxSpotPosition("USD", 1.0), ZeroCouponBond("EUR", 1.0, 5.0)])
    assert not scenario_pnl(p, base, np.stack([base, base]), LAYOUT).any()
    up = base.copy()
    up[-1] += math.log(1.01)
    loss = scenario_pnl(Portfolio([FxSpotPosition("USD", 1.0)]), base, up[None], LAYOUT)[0]
    assert loss == pytest.approx(-0.01 * math.exp(0.3), rel=1e-12)


def test_var_es_examples():
    losses = np.arange(1.0, 101.0)
    r = var_es(losses, 0.99)
    assert (r.var, r.es) == (99.0, 99.5)
    r = var_es(losses, 0.95)
    assert (r.var, r.es) == (95.0, 97.5)
    r = var_es(np.full(300, 4.2), 0.99)
    assert r.var == r.es == 4.2


def test_var_es_few_samples_warns():
    with pytest.warns(TooFewSamplesWarning):
        r = var_es([1.0, 2.0, 3.0], 0.99)
    assert r.var == 3.0


@settings(max_examples=100)
@given(
    hnp.arrays(np.float64, st.integers(100, 400), elements=st.floats(-1e3, 1e3)),
    st.sampled_from([0.9, 0.95, 0.975, 0.99]),
    st.floats(0.01, 100),
    st.floats(-100, 100),
)
def test_var_es_coherent_and_affine(losses, conf, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TooFewSamplesWarning)
        base = var_es(losses, conf)
        moved = var_es(a * losses + b, conf)
    assert base.es >= base.var
    tol = 1e-9 * (1 + abs(a) * np.abs(losses).max() + abs(b))
    assert moved.var == pytest.approx(a * base.var + b, abs=tol)
    assert moved.es == pytest.approx(a * base.es + b, abs=tol)


def test_kupiec_values():
    lr, p = kupiec_pof(0, 250, 0.99)
    assert lr == pytest.approx(-2 * 250 * math.log(0.99))
    lr, p = kupiec_pof(3, 300, 0.99)
    assert lr == pytest.approx(0.0, abs=1e-12) and p == pytest.approx(1.0)


def test_histogram_counts():
    rng = np.random.default_rng(0)
    _, counts = histogram_export(rng.uniform(0, 1, 10), 1)
    assert counts.tolist() == [10]
    x = rng.normal(size=1001)
    _, counts = histogram_export(x, 37)
    assert counts.sum() == 1001
    sym = np.array([-3.0, -1.0, -0.5, 0.5, 1.0, 3.0])
    _, counts = histogram_export(sym, 4, edges=np.array([-4.0, -2.0, 0.0, 2.0, 4.0]))
    assert counts.tolist() == counts[::-1].tolist()


def test_histogram_file(tmp_path):
    path = tmp_path / "h.csv"
    histogram_export([0.1, 0.2, 0.9], 2, path, label="historical_filtered", config_echo={"a": 1}, simulated=[0.5, 0.6])
    lines = path.read_text().splitlines()
    assert lines[0] == '# config: {"a": 1}'
    assert lines[1] == "bin_lo,bin_hi,historical_filtered,simulated"
    assert len(lines) == 4


def test_backtest_empty_and_short(hjm_panel):
    p = Portfolio([FxSpotPosition("USD", 100.0)])
    assert backtest(hjm_panel, p, 0).n_days == 0
    with pytest.raises(InsufficientHistory):
        backtest(hjm_panel, p, 250, risk=RiskConfig(history=500))


def test_backtest_small_run(hjm_panel):
    p = Portfolio([ZeroCouponBond("EUR", 2.0, 100.0), FxSpotPosition("USD", 100.0)])
    risk = RiskConfig(history=200, backtest_scenarios=500)
    report = backtest(hjm_panel, p, 5, risk=risk, seed=1)
    assert report.n_days == 5
    assert all(d.es >= d.var for d in report.days)
    assert report.days[-1].date == str(hjm_panel.dates[-1])
    again = backtest(hjm_panel, p, 5, risk=risk, seed=1)
    assert again == report
    buf = io.StringIO()
    report.write_csv(buf, {"seed": 1})
    assert len(buf.getvalue().splitlines()) == 2 + 1 + 5
