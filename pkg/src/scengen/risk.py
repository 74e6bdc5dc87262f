"""Linear IR/FX portfolio valuation, VaR / expected shortfall, and rolling backtests."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import stats

from .config import FilterConfig, ModelConfig, RiskConfig, SimulationConfig
from .data import FactorLayout, HistoricalPanel
from .engine import simulate_scenarios
from .errors import InsufficientHistory, InvalidConfig, MaturityOutOfRange, TooFewSamplesWarning
from .pipeline import calibrate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZeroCouponBond:
    currency: str
    maturity: float
    notional: float


@dataclass(frozen=True)
class FxSpotPosition:
    currency: str
    notional: float


@dataclass(frozen=True)
class Portfolio:
    """Roll-over portfolio: times to maturity stay fixed from day to day."""

    instruments: tuple

    def __post_init__(self):
        object.__setattr__(self, "instruments", tuple(self.instruments))
        if not self.instruments:
            raise InvalidConfig("portfolio must hold at least one instrument")
        for inst in self.instruments:
            if not math.isfinite(inst.notional):
                raise InvalidConfig(f"non-finite notional in {inst}")

    def scaled(self, factor: float) -> "Portfolio":
        return Portfolio(tuple(replace(i, notional=i.notional * factor) for i in self.instruments))

    def __add__(self, other: "Portfolio") -> "Portfolio":
        return Portfolio(self.instruments + other.instruments)


def parse_portfolio(text: str) -> Portfolio:
    """``"ZCB:EUR:2:100, FX:USD:1000"`` -> Portfolio."""
    items = []
    for token in text.split(","):
        parts = [p.strip() for p in token.split(":")]
        if not parts or not parts[0]:
            continue
        try:
            if parts[0].upper() == "ZCB" and len(parts) == 4:
                items.append(ZeroCouponBond(parts[1], float(parts[2]), float(parts[3])))
            elif parts[0].upper() == "FX" and len(parts) == 3:
                items.append(FxSpotPosition(parts[1], float(parts[2])))
            else:
                raise ValueError
        except ValueError:
            raise InvalidConfig(f"bad instrument {token.strip()!r}; use ZCB:CCY:maturity:notional or FX:CCY:notional") from None
    return Portfolio(tuple(items))


def default_portfolio(layout: FactorLayout) -> Portfolio:
    """One mid-grid bond per curve plus one FX position per foreign currency."""
    items = []
    if layout.n:
        x = layout.tenor_grid[layout.n // 2]
        items += [ZeroCouponBond(c, x, 100.0) for c in layout.currencies]
    items += [FxSpotPosition(c, 100.0) for c in layout.currencies[1:]]
    return Portfolio(tuple(items))


def zcb_weights(tenors, x: float) -> np.ndarray:
    """Weights w with ``curve @ w`` = integral of the interpolated curve over [0, x].

    The curve is linearly interpolated between tenors and held flat
    below the first tenor; the integral of that piecewise-linear
    function is exact under the trapezoid rule at its kinks.
    """
    tenors = np.asarray(tenors, dtype=float)
    if not 0 <= x <= (tenors[-1] if tenors.size else -1):
        raise MaturityOutOfRange(f"maturity {x} outside [0, {tenors[-1] if tenors.size else 'n/a'}]")
    n = tenors.size
    w = np.zeros(n)
    if x == 0:
        return w
    # flat piece on [0, min(x, t0)]
    w[0] += min(x, tenors[0])
    for k in range(n - 1):
        a, b = tenors[k], tenors[k + 1]
        if x <= a:
            break
        hi = min(x, b)
        h = b - a
        # integral over [a, hi] of (1-s) f_k + s f_{k+1}, s = (u - a) / h
        s1 = (hi - a) / h
        w[k] += h * (s1 - s1**2 / 2)
        w[k + 1] += h * s1**2 / 2
    return w


def zcb_price(curve, x: float, tenors) -> np.ndarray:
    """exp(-integral_0^x f(u) du) for one curve or a batch of curves (rows)."""
    return np.exp(-(np.asarray(curve, dtype=float) @ zcb_weights(tenors, x)))


def portfolio_value(portfolio: Portfolio, state, layout: FactorLayout) -> np.ndarray:
    """Domestic-currency value for one state (J,) or a batch (S, J)."""
    state = np.asarray(state, dtype=float)
    tenors = layout.tenors
    total = np.zeros(state.shape[:-1])
    for inst in portfolio.instruments:
        if inst.currency not in layout.currencies:
            raise InvalidConfig(f"currency {inst.currency} not in layout")
        alpha = layout.currencies.index(inst.currency)
        fx = np.exp(state[..., layout.fx_index(alpha)]) if alpha else 1.0
        if isinstance(inst, ZeroCouponBond):
            if not layout.n:
                raise InvalidConfig("layout has no yield curves for bond valuation")
            curve = state[..., layout.curve_slice(alpha)]
            total = total + inst.notional * fx * zcb_price(curve, inst.maturity, tenors)
        else:
            if alpha == 0:
                raise InvalidConfig("FX position in the domestic currency")
            total = total + inst.notional * fx
    return total


def scenario_pnl(portfolio: Portfolio, base_state, scenarios, layout: FactorLayout) -> np.ndarray:
    """Losses (positive = loss) of each scenario relative to the base state."""
    states = getattr(scenarios, "states", scenarios)
    return portfolio_value(portfolio, base_state, layout) - portfolio_value(portfolio, states, layout)


@dataclass(frozen=True)
class VarEsResult:
    confidence: float
    var: float
    es: float
    n_samples: int


def var_es(losses, confidence: float = 0.99) -> VarEsResult:
    """Empirical VaR and ES from order statistics.

    VaR is the ascending order statistic at rank ceil(confidence * n);
    ES is the mean of that order statistic and all larger ones.
    """
    if not 0 < confidence < 1:
        raise InvalidConfig("confidence must lie in (0, 1)")
    x = np.sort(np.asarray(losses, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise InvalidConfig("no losses given")
    if n < 1.0 / (1.0 - confidence):
        warnings.warn(f"{n} samples is fewer than 1/(1-confidence) = {1 / (1 - confidence):.0f}", TooFewSamplesWarning, stacklevel=2)
    # guard against confidence * n landing a hair above an integer
    rank = max(1, math.ceil(round(confidence * n, 9)))
    var = float(x[rank - 1])
    es = float(x[rank - 1 :].mean())
    return VarEsResult(confidence, var, max(es, var), n)


@dataclass(frozen=True)
class BacktestDay:
    date: str
    pnl: float
    var: float
    es: float

    @property
    def loss(self) -> float:
        return -self.pnl

    @property
    def var_violation(self) -> bool:
        return self.loss > self.var

    @property
    def es_breach(self) -> bool:
        return self.loss > self.es


@dataclass(frozen=True)
class BacktestReport:
    confidence: float
    days: tuple[BacktestDay, ...] = ()

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def violations(self) -> int:
        return sum(d.var_violation for d in self.days)

    @property
    def es_breaches(self) -> int:
        return sum(d.es_breach for d in self.days)

    def kupiec(self) -> tuple[float, float]:
        return kupiec_pof(self.violations, self.n_days, self.confidence)

    def totals(self) -> dict:
        lr, pval = self.kupiec() if self.n_days else (float("nan"), float("nan"))
        return {
            "days": self.n_days,
            "var_violations": self.violations,
            "es_breaches": self.es_breaches,
            "kupiec_lr": lr,
            "kupiec_pvalue": pval,
        }

    def write_csv(self, target, config_echo: Optional[dict] = None) -> None:
        own = isinstance(target, (str, os.PathLike))
        fh = open(target, "w", newline="", encoding="utf-8") if own else target
        try:
            if config_echo is not None:
                fh.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
            fh.write("# totals: " + json.dumps(self.totals(), sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("date", "pnl", "loss", "var", "es", "var_violation", "es_breach"))
            for d in self.days:
                w.writerow((d.date, repr(d.pnl), repr(d.loss), repr(d.var), repr(d.es), int(d.var_violation), int(d.es_breach)))
        finally:
            if own:
                fh.close()


def kupiec_pof(violations: int, n: int, confidence: float) -> tuple[float, float]:
    """Kupiec proportion-of-failures likelihood ratio and its chi2(1) p-value."""
    p = 1.0 - confidence
    x = violations
    ll0 = (n - x) * math.log1p(-p) + (x * math.log(p) if x else 0.0)
    phat = x / n
    ll1 = ((n - x) * math.log1p(-phat) if x < n else 0.0) + (x * math.log(phat) if x else 0.0)
    lr = max(0.0, -2.0 * (ll0 - ll1))
    return lr, float(stats.chi2.sf(lr, df=1))


def backtest(
    panel: HistoricalPanel,
    portfolio: Portfolio,
    window_days: int = 250,
    *,
    risk: Optional[RiskConfig] = None,
    filt: Optional[FilterConfig] = None,
    mcfg: Optional[ModelConfig] = None,
    seed: int = 0,
) -> BacktestReport:
    """Rolling one-day VaR/ES backtest over the last ``window_days`` days.

    For each forecast day t the model is recalibrated on the trailing
    ``risk.history`` observations ending at t, ``risk.backtest_scenarios``
    one-day scenarios are simulated, and the realized loss from t to t+1
    of the roll-over portfolio is compared against VaR and ES.
    """
    risk = risk or RiskConfig()
    if window_days == 0:
        return BacktestReport(risk.confidence)
    K = risk.history
    need = K + window_days
    if panel.K < need:
        raise InsufficientHistory(f"backtest needs {need} observations ({K} history + {window_days} days), panel has {panel.K}")
    lay = panel.layout
    values_now = portfolio_value(portfolio, panel.values, lay)
    days = []
    no_jumps = 0
    first = panel.K - 1 - window_days
    for t in range(first, panel.K - 1):
        cal = calibrate(panel.window(t - K + 1, t + 1), filt, mcfg, quiet=True)
        no_jumps += cal.model.jumps.size == 0
        day_seed = int(np.random.SeedSequence([seed, t]).generate_state(1, np.uint64)[0])
        sims = simulate_scenarios(cal.model, SimulationConfig(n_scenarios=risk.backtest_scenarios, seed=day_seed))
        losses = values_now[t] - portfolio_value(portfolio, sims.states, lay)
        res = var_es(losses, risk.confidence)
        days.append(BacktestDay(str(panel.dates[t + 1]), float(values_now[t + 1] - values_now[t]), res.var, res.es))
    if no_jumps:
        log.warning("extreme-event set empty on %d of %d backtest days; jumps disabled on those days", no_jumps, window_days)
    return BacktestReport(risk.confidence, tuple(days))


def histogram_export(values, n_bins: int, path=None, edges=None, label: str = "count", config_echo: Optional[dict] = None, **columns) -> tuple[np.ndarray, np.ndarray]:
    """Bin ``values`` and optionally write a ``bin_lo,bin_hi,<label>`` CSV.

    Extra keyword arrays are binned on the same edges and written as
    additional count columns (e.g. historical vs simulated side by side).
    """
    if n_bins < 1:
        raise InvalidConfig("n_bins must be >= 1")
    values = np.asarray(values, dtype=float)
    if edges is None:
        pool = np.concatenate([values] + [np.asarray(c, float) for c in columns.values()])
        lo, hi = (float(pool.min()), float(pool.max())) if pool.size else (0.0, 1.0)
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, n_bins + 1)
    counts, edges = np.histogram(values, bins=edges)
    extra = {name: np.histogram(np.asarray(c, float), bins=edges)[0] for name, c in columns.items()}
    if path is not None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if config_echo is not None:
                fh.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("bin_lo", "bin_hi", label) + tuple(extra))
            for k in range(len(counts)):
                w.writerow([repr(float(edges[k])), repr(float(edges[k + 1])), int(counts[k])] + [int(v[k]) for v in extra.values()])
    return edges, counts
