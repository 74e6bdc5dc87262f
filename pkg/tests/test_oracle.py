import numpy as np
import pytest

from scengen.config import FilterConfig
from scengen.data import FactorLayout
from scengen.errors import InvalidCorrelation
from scengen.oracle import (
    SyntheticSpec,
    binomial_interval,
    binomial_upper_band,
    check_coverage,
    covariance_estimator,
    distribution_distance,
    format_table,
    generate_synthetic_panel,
    ks_critical,
    mardia_skewness,
    psd_sqrt,
    relative_frobenius,
)
from scengen.pipeline import calibrate
from scengen.risk import BacktestDay, BacktestReport

FX1 = FactorLayout(("EUR", "USD"), ())
FX2 = FactorLayout(("EUR", "USD", "GBP"), ())


def test_gbm_zero_vol_is_constant():
    panel = generate_synthetic_panel(SyntheticSpec("gbm", FX2, 50, vols=np.zeros(2), initial=np.array([0.1, 0.2])))
    assert np.all(panel.values == panel.values[0])


def test_gbm_return_std():
    vol, delta, n = 0.2, 1 / 250, 10_000
    panel = generate_synthetic_panel(SyntheticSpec("gbm", FX1, n + 1, delta=delta, seed=4, vols=np.array([vol])))
    sd = np.diff(panel.values[:, 0]).std(ddof=1)
    target = vol * np.sqrt(delta)
    assert abs(sd - target) <= 3 * target / np.sqrt(2 * n)


def test_gbm_perfect_correlation():
    spec = SyntheticSpec("gbm", FX2, 300, vols=np.array([0.1, 0.3]), correlation=np.ones((2, 2)))
    r = np.diff(generate_synthetic_panel(spec).values, axis=0)
    assert np.corrcoef(r.T)[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_invalid_correlation():
    with pytest.raises(InvalidCorrelation):
        psd_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_covariance_estimator_examples():
    v = np.array([0.01, -0.02, 0.03])
    delta = 1 / 250
    np.testing.assert_allclose(covariance_estimator(np.tile(v, (7, 1)), delta), np.outer(v, v) / delta, rtol=1e-13)
    assert not covariance_estimator(np.zeros((5, 3)), delta).any()


def test_covariance_estimator_symmetric_psd():
    rng = np.random.default_rng(0)
    C = covariance_estimator(rng.standard_t(3, size=(40, 6)), 0.01)
    np.testing.assert_array_equal(C, C.T)
    w = np.linalg.eigvalsh(C)
    assert w.min() >= -1e-10 * w.max()


def test_covariance_estimator_recovers_directions():
    lam = np.array([[0.3, 0.1, 0.0, -0.2], [0.0, 0.2, 0.25, 0.1]])
    lay = FactorLayout(("A", "B", "C", "D", "E"), ())
    spec = SyntheticSpec("hjm", lay, 4001, seed=1, directions=lam, rate_floor=None, no_arbitrage=False, substeps=1)
    panel = generate_synthetic_panel(spec)
    err = relative_frobenius(covariance_estimator(np.diff(panel.values, axis=0), panel.delta), lam.T @ lam)
    assert err <= 0.10


def test_ks_critical_constant():
    assert ks_critical(10_000, 10_000) * np.sqrt(5_000) == pytest.approx(1.6276, abs=1e-4)


def test_distance_identical_and_same_law():
    rng = np.random.default_rng(0)
    a = rng.normal(size=10_000)
    assert distribution_distance(a, a).ks[0] == 0.0
    d = distribution_distance(a, rng.normal(size=10_000))
    assert d.ks_pass.all()


def test_distance_detects_mean_shift():
    rng = np.random.default_rng(1)
    d = distribution_distance(rng.normal(size=10_000), rng.normal(1.0, 1.0, size=10_000))
    assert d.mean_gap[0] == pytest.approx(1.0, abs=4 * d.mean_gap_se[0])
    assert not d.ks_pass.any()


def test_mardia_gaussian_vs_skewed():
    rng = np.random.default_rng(2)
    stat, crit = mardia_skewness(rng.normal(size=(3000, 3)))
    assert stat < crit
    stat, crit = mardia_skewness(rng.exponential(size=(3000, 3)))
    assert stat > crit


def test_binomial_bands():
    assert binomial_upper_band(250, 0.01) == 7
    lo, hi = binomial_interval(5000, 0.02)
    assert (lo, hi) == (75, 126)


def test_coverage_check_and_table():
    days = tuple(BacktestDay("2020-01-01", -2.0 if k < 8 else 0.0, 1.0, 1.5) for k in range(250))
    res = check_coverage(BacktestReport(0.99, days))
    assert not res.passed and res.statistic == 8
    assert format_table([res]).splitlines()[1].endswith(",FAIL,es_breaches=8")


def test_end_to_end_ks_two_driver_model():
    lam = np.array([[0.3, 0.1, 0.0, -0.2], [0.0, 0.2, 0.25, 0.1]])
    lay = FactorLayout(("A", "B", "C", "D", "E"), ())
    spec = SyntheticSpec("hjm", lay, 4001, seed=8, directions=lam, rate_floor=None, no_arbitrage=False, substeps=1)
    panel = generate_synthetic_panel(spec)
    model = calibrate(panel, FilterConfig(rescale=False, screen_extremes=False)).model
    rng = np.random.default_rng(9)
    fitted = np.sqrt(panel.delta) * model.scale * rng.standard_normal((10_000, model.n_drivers)) @ model.directions
    truth = np.sqrt(panel.delta) * rng.standard_normal((10_000, 2)) @ lam
    assert distribution_distance(fitted, truth).ks_pass.all()
