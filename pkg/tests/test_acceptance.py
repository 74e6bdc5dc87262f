"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary)
and then asserts the verdict, so a failing criterion fails the suite.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from scengen.cli import main
from scengen.config import FilterConfig, ModelConfig, RiskConfig, SimulationConfig
from scengen.data import FactorLayout, HistoricalPanel, dump_layout, write_panel
from scengen.engine import simulate_paths, simulate_scenarios
from scengen.mixing import JumpSpec, TimeChangeDistribution
from scengen.model import CalibratedModel, DriftSpec, GeometricSigma, sigma_apply, sigma_inverse_apply
from scengen.oracle import (
    SyntheticSpec,
    check_covariance_identity,
    check_time_change_mean,
    covariance_estimator,
    distribution_distance,
    generate_synthetic_panel,
    relative_frobenius,
)
from scengen.pipeline import calibrate
from scengen.risk import backtest, default_portfolio, zcb_price

from conftest import hjm_directions, hjm_initial, two_currency_layout

pytestmark = pytest.mark.slow

DELTA = 1 / 250
RAW = FilterConfig(rescale=False, screen_extremes=False)
NO_JUMPS = ModelConfig(jump_rate=0.0)


def _with_shocks(panel, days, size, seed=0):
    """Add common-direction shocks on the given return indices (the known extreme events)."""
    rng = np.random.default_rng(seed)
    bumps = np.zeros_like(panel.values)
    for i in days:
        bumps[i:] += size * rng.choice([-1.0, 1.0]) * np.abs(panel.values[1:] - panel.values[:-1]).std(axis=0)
    return HistoricalPanel(panel.layout, panel.dates, panel.values + bumps, panel.delta)


# -- 1 --------------------------------------------------------------------


def test_covariance_identity(criterion):
    layout = FactorLayout(("EUR", "USD"), (0.0, 2.0))
    lam = np.array(
        [
            [0.05, 0.05, 0.03, 0.03, 0.05],
            [0.03, 0.01, 0.04, 0.02, -0.04],
            [0.0, 0.0, 0.01, 0.01, 0.08],
        ]
    )
    initial = np.array([0.02, 0.025, 0.03, 0.034, 0.1])
    panel = generate_synthetic_panel(SyntheticSpec("hjm", layout, 500, seed=1, initial=initial, directions=lam))
    model = calibrate(panel).model
    t0 = time.perf_counter()
    res = check_covariance_identity(model, 50_000, seed=0, tol=0.05)
    elapsed = time.perf_counter() - t0
    ok = res.passed and elapsed <= 30
    assert criterion(1, "covariance identity", ok, f"rel. Frobenius {res.statistic:.4f} (<= 0.05), {elapsed:.1f}s (<= 30s), N_d={model.n_drivers}")


# -- 2 --------------------------------------------------------------------

LAM2 = np.array([[0.3, 0.1, 0.0, -0.2, 0.05], [0.0, 0.2, 0.25, 0.1, -0.15]])
FX5 = FactorLayout(("A", "B", "C", "D", "E", "F"), ())


def _recovered_error(K, seed):
    spec = SyntheticSpec("hjm", FX5, K, seed=seed, directions=LAM2, rate_floor=None, no_arbitrage=False, substeps=1)
    panel = generate_synthetic_panel(spec)
    model = calibrate(panel, RAW, NO_JUMPS).model
    recovered = model.scale**2 * model.directions.T @ model.directions
    independent = covariance_estimator(np.diff(panel.values, axis=0), panel.delta)
    np.testing.assert_allclose(recovered, independent, rtol=1e-9, atol=1e-15)
    return relative_frobenius(recovered, LAM2.T @ LAM2), panel, model


def test_convergence_in_distribution(criterion):
    sizes = (250, 1000, 4000)
    errors = np.array([[_recovered_error(K, seed)[0] for K in sizes] for seed in range(20)])
    monotone = int(np.sum((errors[:, 0] > errors[:, 1]) & (errors[:, 1] > errors[:, 2])))

    _, panel, model = _recovered_error(4000, 0)
    rng = np.random.default_rng(12345)
    n = 10_000
    fitted = simulate_scenarios(
        model.replace(drift=DriftSpec.off(), time_change=TimeChangeDistribution.trivial()),
        SimulationConfig(n_scenarios=n, seed=7),
    ).increments
    truth = math.sqrt(DELTA) * rng.standard_normal((n, 2)) @ LAM2
    dist = distribution_distance(fitted, truth, alpha=0.01)
    ks_ok = bool(dist.ks_pass.all())

    ok = monotone >= 19 and ks_ok
    detail = (
        f"monotone in {monotone}/20 seeds (need >= 19); mean errors {np.round(errors.mean(0), 4).tolist()}; "
        f"KS max {dist.ks.max():.4f} vs critical {dist.ks_critical:.4f} at K=4000"
    )
    assert criterion(2, "convergence in distribution", ok, detail)


# -- 3 --------------------------------------------------------------------


def test_extreme_event_monotonicity(criterion):
    layout = FactorLayout(tuple(f"C{k}" for k in range(11)), ())
    counterexamples = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        vol = 0.01 * np.exp(np.cumsum(rng.normal(0, 0.05, size=(300, 1)), axis=0))
        r = vol * rng.standard_t(3, size=(300, layout.J))
        values = np.vstack([np.zeros(layout.J), np.cumsum(r, axis=0)])
        panel = HistoricalPanel(layout, np.datetime64("2020-01-01") + np.arange(301), values)

        def count(eta, m):
            return len(calibrate(panel, FilterConfig(eta=eta, violations=m), NO_JUMPS).extremes)

        by_eta = [count(eta, 1) for eta in (2, 3, 4, 5)]
        by_m = [count(2, m) for m in (1, 2, 4, 8)]
        counterexamples += sum(a < b for a, b in zip(by_eta, by_eta[1:]))
        counterexamples += sum(a < b for a, b in zip(by_m, by_m[1:]))
    assert criterion(3, "extreme-event monotonicity", counterexamples == 0, f"{counterexamples} counterexamples over 100 panels")


# -- 4 --------------------------------------------------------------------


def test_jump_frequency(criterion, hjm_panel):
    shocked = _with_shocks(hjm_panel, [150, 300, 420], 15.0)
    cal = calibrate(shocked)
    model = cal.model
    assert model.jumps.rate == 0.02 and model.jumps.size > 0
    inside = 0
    for seed in range(100):
        total = int(simulate_scenarios(model, SimulationConfig(n_scenarios=5000, seed=seed)).n_jumps.sum())
        inside += 75 <= total <= 127
    assert criterion(4, "jump frequency", inside >= 98, f"{inside}/100 runs in [75, 127] (need >= 98); {model.jumps.size} extreme returns")


# -- 5 --------------------------------------------------------------------


def test_time_change_mean_and_tails(criterion, hjm_panel):
    dist = TimeChangeDistribution()
    mean_res = check_time_change_mean(dist, 1_000_000, seed=0, target=1.0)

    model = calibrate(hjm_panel, mcfg=NO_JUMPS).model.replace(drift=DriftSpec.off())
    j = model.layout.index_of("USD_logfx")
    cfg = SimulationConfig(n_scenarios=50_000, seed=3)

    def kurtosis(tc):
        x = simulate_scenarios(model.replace(time_change=tc), cfg).increments[:, j]
        c = x - x.mean()
        return float(np.mean(c**4) / np.mean(c**2) ** 2)

    k_mixed, k_trivial = kurtosis(dist), kurtosis(TimeChangeDistribution.trivial())
    ok = mean_res.passed and k_mixed > k_trivial
    detail = f"mean {mean_res.statistic:.5f} ({mean_res.threshold}); kurtosis {k_mixed:.3f} vs trivial {k_trivial:.3f}"
    assert criterion(5, "time-change mean and tail fattening", ok, detail)


# -- 6 --------------------------------------------------------------------


def _ho_lee_model(c, curve):
    layout = FactorLayout(("EUR",), (0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0))
    return CalibratedModel(
        layout=layout,
        sigma=GeometricSigma.identity(layout.J),
        directions=np.full((1, layout.J), c),
        scale=1.0,
        drift=DriftSpec(include_hjm=True, include_fx_drift=False),
        jumps=JumpSpec(0.0, np.zeros((0, layout.J)), []),
        time_change=TimeChangeDistribution.trivial(),
        anchor_state=curve,
        delta=DELTA,
    )


def test_hjm_drift_and_bond_martingale(criterion):
    c = 0.02
    x = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0])
    model = _ho_lee_model(c, 0.02 + 0.003 * x)
    drift = model.drift_vector(model.anchor_state[None])[0]
    closed = c**2 * x
    rel = np.abs(drift[1:] - closed[1:]) / closed[1:]
    drift_ok = drift[0] == 0.0 and rel.max() <= 0.005

    days = 10
    paths, _ = simulate_paths(model, SimulationConfig(n_scenarios=20_000, seed=11, horizon_steps=days))
    discount = np.exp(-DELTA * paths[:, :days, 0].sum(axis=1))
    worst = 0.0
    for T in (1.0, 2.0, 5.0, 9.0):
        p0 = float(zcb_price(model.anchor_state, T, x))
        y = discount * zcb_price(paths[:, -1], T - days * DELTA, x)
        worst = max(worst, abs(y.mean() - p0) / (y.std(ddof=1) / math.sqrt(len(y))))
    ok = drift_ok and worst <= 3.0
    detail = f"max drift rel. error {rel.max():.2e} (<= 0.5%); worst bond-martingale gap {worst:.2f} SE (<= 3)"
    assert criterion(6, "HJM drift and bond martingale", ok, detail)


# -- 7 --------------------------------------------------------------------


def test_backtest_coverage(criterion):
    layout = two_currency_layout()
    spec = SyntheticSpec("hjm", layout, 751, seed=0, initial=hjm_initial(layout), directions=hjm_directions(layout))
    panel = generate_synthetic_panel(spec)
    t0 = time.perf_counter()
    report = backtest(panel, default_portfolio(layout), 250, risk=RiskConfig(), seed=0)
    elapsed = time.perf_counter() - t0
    es_ok = all(d.es >= d.var for d in report.days)
    ok = report.violations <= 7 and es_ok and elapsed <= 600 and report.n_days == 250
    detail = f"{report.violations} violations in {report.n_days} days (band 0..7), ES >= VaR every day: {es_ok}, {elapsed:.0f}s (<= 600s)"
    assert criterion(7, "backtest coverage", ok, detail)


# -- 8 --------------------------------------------------------------------


def test_determinism(criterion, tmp_path, hjm_panel):
    write_panel(hjm_panel, tmp_path / "panel.csv")
    (tmp_path / "layout.txt").write_text(dump_layout(hjm_panel.layout, hjm_panel.delta))
    common = ["--panel", str(tmp_path / "panel.csv"), "--layout", str(tmp_path / "layout.txt"), "--seed", "17"]
    assert main(["calibrate", *common, "--out", str(tmp_path)]) == 0
    model = ["--model", str(tmp_path / "model.json")]
    out = tmp_path / "sims"
    outputs = []
    for workers in ("1", "1", "4"):
        cmd = [sys.executable, "-m", "scengen.cli", "simulate", *common, *model, "--out", str(out), "--workers", workers]
        subprocess.run(cmd, check=True, capture_output=True)
        outputs.append((out / "scenarios.csv").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    assert criterion(8, "determinism", ok, f"{len(outputs[0])} bytes; two 1-thread runs and a 4-thread run identical: {ok}")


# -- 9 --------------------------------------------------------------------


def test_sigma_invertibility(criterion):
    layout = two_currency_layout()
    sigma = GeometricSigma.for_layout(layout)
    rng = np.random.default_rng(0)
    states = rng.uniform(-0.02, 0.08, size=(10_000, layout.J))
    states[::3, layout.rate_mask] = rng.uniform(-1e-3, 1e-4, size=(len(states[::3]), layout.rate_mask.sum()))
    v = rng.normal(size=states.shape)
    back = sigma_inverse_apply(sigma, states, sigma_apply(sigma, states, v))
    rel = float(np.max(np.abs(back - v) / np.abs(v)))
    below = int(np.sum(states[:, layout.rate_mask] < 1e-4))
    assert criterion(9, "sigma invertibility", rel <= 1e-12, f"max rel. error {rel:.2e} (<= 1e-12), {below} sub-floor rate entries")
