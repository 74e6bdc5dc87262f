"""End-to-end calibration: panel -> filtered returns -> extreme screening -> model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import FilterConfig, ModelConfig
from .data import HistoricalPanel, compute_returns
from .errors import InsufficientHistory
from .filtering import (
    ExtremeEventSet,
    FilteredReturns,
    SlidingVariance,
    VolRatioSeries,
    backfill_ratios,
    detect_extreme_events,
    partition_returns,
    rescale_returns,
    sliding_variance,
    vol_ratio,
)
from .mixing import TimeChangeDistribution
from .model import CalibratedModel, DriftSpec, build_calibrated_model


@dataclass(frozen=True, eq=False)
class Calibration:
    model: CalibratedModel
    returns: np.ndarray
    filtered: FilteredReturns
    extremes: ExtremeEventSet
    diffusive: FilteredReturns
    extreme: FilteredReturns
    today_vol: np.ndarray
    sv_rescale: Optional[SlidingVariance] = None
    sv_extreme: Optional[SlidingVariance] = None

    def summary(self) -> dict:
        return {
            "observations": int(self.returns.shape[0] + 1),
            "factors": int(self.returns.shape[1]),
            "filtered_returns": len(self.filtered),
            "drivers": self.model.n_drivers,
            "extreme_events": len(self.extremes),
            "jump_rate": self.model.jumps.rate,
            "today_vol": dict(zip(self.model.layout.column_names, map(float, self.today_vol))),
        }


def _ratios(sv: SlidingVariance, filt: FilterConfig) -> VolRatioSeries:
    ratios = vol_ratio(sv, filt.eps_var)
    return backfill_ratios(ratios) if filt.backfill_warmup else ratios


def calibrate(
    panel: HistoricalPanel,
    filt: Optional[FilterConfig] = None,
    mcfg: Optional[ModelConfig] = None,
    *,
    quiet: bool = False,
) -> Calibration:
    """Calibrate a model on the whole panel (its last row is today's anchor).

    The rescaling and extreme windows are applied independently. All K-1
    returns are filtered and screened; warm-up returns before a window is
    full reuse the earliest full-window ratio (with ``backfill_warmup``
    off they are dropped instead, and calibration starts at
    max(L_rescale, L_extreme)). With ``rescale`` off the
    raw returns over all K-1 indices are used; with ``screen_extremes``
    off no return is classified extreme. ``quiet`` suppresses the
    warning about an empty jump measure (callers that calibrate many
    times report it themselves).
    """
    filt = filt or FilterConfig()
    mcfg = mcfg or ModelConfig()
    returns = compute_returns(panel)
    n_ret = returns.shape[0]
    full_index = np.arange(1, n_ret + 1)
    sv_r = sv_e = None

    if filt.rescale:
        if n_ret < max(filt.l_rescale, filt.l_extreme):
            raise InsufficientHistory(
                f"{panel.K} observations; need at least {max(filt.l_rescale, filt.l_extreme) + 1} for the sliding windows"
            )
        sv_r = sliding_variance(returns, filt.l_rescale)
        filtered = rescale_returns(returns, _ratios(sv_r, filt))
        if not filt.backfill_warmup:
            filtered = filtered.restrict(max(filt.l_rescale, filt.l_extreme) if filt.screen_extremes else filt.l_rescale)
        today_vol = np.sqrt(sv_r.today)
    else:
        filtered = FilteredReturns(full_index, returns)
        today_vol = np.sqrt(np.mean(returns**2, axis=0))

    if filt.screen_extremes:
        if n_ret < filt.l_extreme:
            raise InsufficientHistory(f"need more than {filt.l_extreme} observations for extreme screening")
        sv_e = sliding_variance(returns, filt.l_extreme)
        screened = rescale_returns(returns, _ratios(sv_e, filt)).restrict(filtered.index[0])
        extremes = detect_extreme_events(screened, sv_e.today, filt.eta, filt.violations, filt.eps_var)
    else:
        extremes = ExtremeEventSet(filt.eta, filt.violations, np.zeros(0, dtype=int), {})

    diffusive, extreme = partition_returns(filtered, extremes)
    drift = DriftSpec(mcfg.include_hjm, mcfg.include_fx_drift, mcfg.mu2)
    model = build_calibrated_model(
        panel,
        diffusive,
        extreme,
        rate_floor=mcfg.rate_floor,
        drift=drift,
        jump_rate=mcfg.jump_rate,
        time_change=TimeChangeDistribution(mcfg.time_change),
        quiet=quiet,
    )
    return Calibration(model, returns, filtered, extremes, diffusive, extreme, today_vol, sv_r, sv_e)
