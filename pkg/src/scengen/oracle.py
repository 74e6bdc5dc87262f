"""Independent validators: synthetic panels, brute-force estimators, statistical checks.

Nothing numerical here is shared with the engine; interpolation,
integration, sigma multipliers, and covariance sums are reimplemented
so that a bug on one side cannot hide on the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .data import FactorLayout, HistoricalPanel
from .errors import InvalidConfig, InvalidCorrelation

# -- synthetic panels -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    """Known-truth generator for a HistoricalPanel.

    kind ``"gbm"``: correlated geometric Brownian motions, one per log-FX
    factor (the layout must have no curves), simulated exactly.

    kind ``"hjm"``: constant-direction model dY = mu dt + sum_i s(Y).lam_i dB^i,
    with s the sqrt-level rule on rates (``rate_floor``) or the identity
    (``rate_floor=None``), simulated by fine-substep Euler. With
    ``no_arbitrage`` the drift is shift + HJM + quanto + FX carry.
    """

    kind: str
    layout: FactorLayout
    K: int
    delta: float = 1.0 / 250.0
    seed: int = 0
    initial: Optional[np.ndarray] = None
    vols: Optional[np.ndarray] = None
    correlation: Optional[np.ndarray] = None
    directions: Optional[np.ndarray] = None
    rate_floor: Optional[float] = 1e-4
    substeps: int = 10
    no_arbitrage: bool = True


def psd_sqrt(corr) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1] or not np.allclose(corr, corr.T):
        raise InvalidCorrelation("correlation must be a symmetric square matrix")
    w, v = np.linalg.eigh(corr)
    if w.min() < -1e-10 * max(1.0, w.max()):
        raise InvalidCorrelation(f"correlation not positive semidefinite (min eigenvalue {w.min():.3g})")
    return v * np.sqrt(np.clip(w, 0, None))


def _dates(K: int) -> np.ndarray:
    return np.busday_offset(np.datetime64("2000-01-03"), np.arange(K), roll="forward")


def reference_multipliers(state, layout: FactorLayout, rate_floor: Optional[float]) -> np.ndarray:
    """sqrt-level multipliers written independently of ``GeometricSigma``."""
    state = np.asarray(state, dtype=float)
    n_rates = (layout.p + 1) * layout.n
    if rate_floor is None:
        return np.ones_like(state)
    rates = np.where(state[..., :n_rates] > rate_floor, state[..., :n_rates], rate_floor) ** 0.5
    return np.concatenate([rates, np.ones_like(state[..., n_rates:])], axis=-1)


def _reference_drift(y, layout: FactorLayout, lam, rate_floor) -> np.ndarray:
    """Drift excluding the shift: explicit per-driver HJM/quanto loop and FX carry."""
    tenors = layout.tenors
    m = reference_multipliers(y, layout, rate_floor)
    mu = np.zeros_like(y)
    n = layout.n
    for a in range(layout.p + 1 if n else 0):
        sl = slice(a * n, (a + 1) * n)
        for i in range(lam.shape[0]):
            v = m[sl] * lam[i, sl]
            head = v[0] * tenors[0]
            integral = np.concatenate([[head], head + np.cumsum(np.diff(tenors) * (v[1:] + v[:-1]) / 2)])
            mu[sl] += v * integral
            if a >= 1:
                mu[sl] -= v * lam[i, (layout.p + 1) * n + a - 1]
    for a in range(1, layout.p + 1):
        j = (layout.p + 1) * n + a - 1
        short_dom = y[0] if n else 0.0
        short_for = y[a * n] if n else 0.0
        mu[j] = short_dom - short_for - 0.5 * np.sum(lam[:, j] ** 2)
    return mu


def _reference_shift(y, layout: FactorLayout, t: float) -> np.ndarray:
    out = y.copy()
    n = layout.n
    if n > 1:
        for a in range(layout.p + 1):
            sl = slice(a * n, (a + 1) * n)
            out[sl] = np.interp(layout.tenors + t, layout.tenors, y[sl])
    return out


def generate_synthetic_panel(spec: SyntheticSpec) -> HistoricalPanel:
    rng = np.random.default_rng(spec.seed)
    lay = spec.layout
    J = lay.J
    K = spec.K
    if spec.kind == "gbm":
        if lay.n:
            raise InvalidConfig("gbm synthetic panels use an FX-only layout (empty tenor grid)")
        vols = np.asarray(spec.vols if spec.vols is not None else np.full(J, 0.1), dtype=float)
        corr = np.eye(J) if spec.correlation is None else spec.correlation
        root = psd_sqrt(corr)
        y0 = np.zeros(J) if spec.initial is None else np.asarray(spec.initial, float)
        z = rng.standard_normal((K - 1, J)) @ root.T
        steps = -0.5 * vols**2 * spec.delta + vols * math.sqrt(spec.delta) * z
        values = np.vstack([y0, y0 + np.cumsum(steps, axis=0)])
        return HistoricalPanel(lay, _dates(K), values, spec.delta)

    if spec.kind != "hjm":
        raise InvalidConfig(f"unknown synthetic kind {spec.kind!r}")
    lam = np.asarray(spec.directions, dtype=float)
    if lam.ndim != 2 or lam.shape[1] != J:
        raise InvalidConfig(f"directions must be (d, {J})")
    y = np.zeros(J) if spec.initial is None else np.array(spec.initial, dtype=float)
    h = spec.delta / spec.substeps
    values = np.empty((K, J))
    values[0] = y
    for k in range(1, K):
        for _ in range(spec.substeps):
            m = reference_multipliers(y, lay, spec.rate_floor)
            dB = rng.standard_normal(lam.shape[0]) * math.sqrt(h)
            incr = m * (dB @ lam)
            if spec.no_arbitrage:
                y = _reference_shift(y, lay, h) + _reference_drift(y, lay, lam, spec.rate_floor) * h + incr
            else:
                y = y + incr
        values[k] = y
    return HistoricalPanel(lay, _dates(K), values, spec.delta)


# -- estimators and distances -------------------------------------------------


def covariance_estimator(returns, delta: float, states=None, inverse: Optional[Callable] = None) -> np.ndarray:
    """(1/(Δ(K-1))) * sum_i x_i x_i^T with x_i = inverse(states_i, returns_i).

    A plain loop of outer products, deliberately not a matrix product.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 2 or r.shape[0] < 1:
        raise InvalidConfig("need a (K-1, J) return matrix with K >= 2")
    x = r if inverse is None else np.asarray(inverse(np.asarray(states, float), r))
    acc = np.zeros((r.shape[1], r.shape[1]))
    for row in x:
        acc += np.outer(row, row)
    return acc / (delta * r.shape[0])


def relative_frobenius(estimate, truth) -> float:
    return float(np.linalg.norm(np.asarray(estimate) - truth) / np.linalg.norm(truth))


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True, eq=False)
class DistributionDistance:
    ks: np.ndarray
    ks_critical: float
    mean_gap: np.ndarray
    mean_gap_se: np.ndarray
    var_gap: np.ndarray
    var_gap_se: np.ndarray
    skew_gap: np.ndarray
    skew_gap_se: np.ndarray
    kurt_gap: np.ndarray
    kurt_gap_se: np.ndarray

    @property
    def ks_pass(self) -> np.ndarray:
        return self.ks <= self.ks_critical


def distribution_distance(a, b, alpha: float = 0.01) -> DistributionDistance:
    """Per-factor two-sample KS statistics and moment gaps (b minus a) with standard errors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidConfig("samples must be nonempty")
    n, m = a.shape[0], b.shape[0]
    ks = np.array([stats.ks_2samp(a[:, j], b[:, j]).statistic for j in range(a.shape[1])])
    va, vb = a.var(axis=0, ddof=1), b.var(axis=0, ddof=1)
    ka = stats.kurtosis(a, axis=0, fisher=False)
    kb = stats.kurtosis(b, axis=0, fisher=False)
    m4a = np.mean((a - a.mean(0)) ** 4, axis=0)
    m4b = np.mean((b - b.mean(0)) ** 4, axis=0)
    return DistributionDistance(
        ks=ks,
        ks_critical=ks_critical(n, m, alpha),
        mean_gap=b.mean(0) - a.mean(0),
        mean_gap_se=np.sqrt(va / n + vb / m),
        var_gap=vb - va,
        var_gap_se=np.sqrt(np.maximum(m4a - va**2, 0) / n + np.maximum(m4b - vb**2, 0) / m),
        skew_gap=stats.skew(b, axis=0) - stats.skew(a, axis=0),
        skew_gap_se=np.full(a.shape[1], math.sqrt(6 / n + 6 / m)),
        kurt_gap=kb - ka,
        kurt_gap_se=np.full(a.shape[1], math.sqrt(24 / n + 24 / m)),
    )


def mardia_skewness(x, block: int = 1000) -> tuple[float, float]:
    """Mardia's multivariate skewness statistic n*b1/6 and its chi2 99% critical value."""
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    c = x - x.mean(0)
    S = c.T @ c / n
    Sinv = np.linalg.inv(S)
    cs = c @ Sinv
    b1 = 0.0
    for a in range(0, n, block):
        g = cs[a : a + block] @ c.T
        b1 += float(np.sum(g**3))
    b1 /= n * n
    dof = p * (p + 1) * (p + 2) / 6
    return n * b1 / 6, float(stats.chi2.ppf(0.99, dof))


def binomial_interval(n: int, p: float, level: float = 0.99) -> tuple[int, int]:
    """Equal-tailed acceptance interval [lo, hi] with each tail mass <= (1-level)/2."""
    b = stats.binom(n, p)
    tail = (1 - level) / 2
    lo = int(b.ppf(tail))
    if b.cdf(lo - 1) > tail:
        lo -= 1
    hi = int(b.isf(tail))
    return lo, hi


def binomial_upper_band(n: int, p: float, level: float = 0.99) -> int:
    """Smallest u with P(X > u) <= 1 - level: accept 0..u."""
    return int(stats.binom(n, p).isf(1 - level))


# -- validation checks --------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{self.name},{self.statistic:.6g},{self.threshold},{'PASS' if self.passed else 'FAIL'},{self.detail}"


def expected_step_covariance(model, t: Optional[float] = None) -> np.ndarray:
    """(t / (Δ N_d)) * sum_i d_i d_i^T with d_i = sigma(Y_K) . direction_i, from first principles."""
    t = model.delta if t is None else t
    floor = model.sigma.rate_floor if model.sigma.rate_mask.any() else None
    m = reference_multipliers(model.anchor_state, model.layout, floor)
    acc = np.zeros((model.layout.J, model.layout.J))
    for row in model.directions:
        d = m * row
        acc += np.outer(d, d)
    return t / (model.delta * model.n_drivers) * acc


def check_covariance_identity(model, n_scenarios: int = 50_000, seed: int = 0, tol: float = 0.05, workers: int = 1) -> CheckResult:
    from .config import SimulationConfig
    from .engine import simulate_scenarios
    from .mixing import JumpSpec, TimeChangeDistribution
    from .model import DriftSpec

    diffusive = model.replace(
        drift=DriftSpec.off(),
        jumps=JumpSpec(0.0, np.zeros((0, model.layout.J)), np.zeros(0, dtype=int)),
        time_change=TimeChangeDistribution.trivial(),
    )
    sims = simulate_scenarios(diffusive, SimulationConfig(n_scenarios=n_scenarios, seed=seed), workers=workers)
    sample = np.cov(sims.increments, rowvar=False)
    err = relative_frobenius(sample, expected_step_covariance(model))
    return CheckResult("covariance_identity", err, f"<= {tol}", err <= tol, f"n={n_scenarios}")


def check_time_change_mean(dist, n: int = 1_000_000, seed: int = 0, target: float = 1.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    draws = dist.from_uniform(rng.random(n))
    mean = float(draws.mean())
    se = float(draws.std(ddof=1)) / math.sqrt(n)
    ok = abs(mean - target) <= 3 * se if se > 0 else mean == target
    return CheckResult("time_change_mean", mean, f"|mean-{target}| <= 3se={3 * se:.2g}", bool(ok))


def check_jump_frequency(model, n_scenarios: int = 5000, seed: int = 0, level: float = 0.99) -> CheckResult:
    from .config import SimulationConfig
    from .engine import simulate_scenarios

    rate = model.jumps.rate
    sims = simulate_scenarios(model, SimulationConfig(n_scenarios=n_scenarios, seed=seed))
    count = int(sims.n_jumps.sum())
    if rate == 0:
        return CheckResult("jump_frequency", count, "== 0 (rate 0)", count == 0)
    lo, hi = binomial_interval(n_scenarios, rate, level)
    return CheckResult("jump_frequency", count, f"in [{lo}, {hi}]", lo <= count <= hi, f"rate={rate}")


def check_coverage(report, level: float = 0.99) -> CheckResult:
    upper = binomial_upper_band(report.n_days, 1 - report.confidence, level)
    es_ok = all(d.es >= d.var for d in report.days)
    return CheckResult(
        "backtest_coverage",
        report.violations,
        f"in [0, {upper}] over {report.n_days} days",
        report.violations <= upper and es_ok,
        f"es_breaches={report.es_breaches}",
    )


def format_table(results: Sequence[CheckResult]) -> str:
    return "\n".join(["check,statistic,threshold,result,detail"] + [r.line() for r in results])
