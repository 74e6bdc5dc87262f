"""Realized-volatility filtering of historical returns and extreme-event screening.

Index convention: observations are Y_1..Y_K and return ``i`` is
``Y_{i+1} - Y_i`` for i = 1..K-1, stored at row ``i - 1`` of the
(K-1) x J return matrix. All index arrays below use these 1-based
time-series indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllReturnsExtreme, IndexMismatch, InvalidConfig, WindowTooLong


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SlidingVariance:
    """Mean-zero realized variance over the trailing ``window`` returns.

    ``values[k]`` belongs to index ``index[k]`` = window + k, so the
    last row is today's local variance at index K-1.
    """

    window: int
    index: np.ndarray
    values: np.ndarray

    @property
    def today(self) -> np.ndarray:
        return self.values[-1]


@dataclass(frozen=True, eq=False)
class VolRatioSeries:
    index: np.ndarray
    ratios: np.ndarray
    eps_var: float


@dataclass(frozen=True, eq=False)
class FilteredReturns:
    index: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.index)

    def select(self, indices) -> "FilteredReturns":
        pos = np.searchsorted(self.index, indices)
        if len(indices) and (np.any(pos >= len(self.index)) or np.any(self.index[np.minimum(pos, len(self.index) - 1)] != indices)):
            raise IndexMismatch("requested indices are not all present")
        return FilteredReturns(np.asarray(indices, dtype=int), _readonly(self.values[pos]))

    def restrict(self, start: int) -> "FilteredReturns":
        """Keep indices >= ``start``."""
        keep = self.index >= start
        return FilteredReturns(self.index[keep], _readonly(self.values[keep]))


@dataclass(frozen=True, eq=False)
class ExtremeEventSet:
    eta: float
    violations: int
    indices: np.ndarray
    violating_factors: dict

    def __len__(self) -> int:
        return len(self.indices)


def sliding_variance(returns, window: int) -> SlidingVariance:
    returns = np.asarray(returns, dtype=float)
    if window < 1:
        raise InvalidConfig("window must be >= 1")
    n = returns.shape[0]
    if n < window:
        raise WindowTooLong(f"window {window} exceeds the {n} available returns")
    windows = np.lib.stride_tricks.sliding_window_view(returns**2, window, axis=0)
    values = windows.sum(axis=-1) / window
    index = np.arange(window, n + 1)
    return SlidingVariance(window, index, _readonly(values))


def vol_ratio(sv: SlidingVariance, eps_var: float = 1e-12) -> VolRatioSeries:
    floored = np.maximum(sv.values, eps_var)
    ratios = np.sqrt(floored / floored[-1])
    return VolRatioSeries(sv.index.copy(), _readonly(ratios), eps_var)


def backfill_ratios(ratios: VolRatioSeries, first: int = 1) -> VolRatioSeries:
    """Extend a ratio series back to index ``first`` by repeating its earliest row.

    Warm-up returns (index < window) have no full trailing window; they are
    rescaled with the earliest local volatility that is available.
    """
    start = int(ratios.index[0])
    if first >= start:
        return ratios
    head = np.repeat(ratios.ratios[:1], start - first, axis=0)
    index = np.arange(first, int(ratios.index[-1]) + 1)
    return VolRatioSeries(index, _readonly(np.vstack([head, ratios.ratios])), ratios.eps_var)


def rescale_returns(returns, ratios: VolRatioSeries) -> FilteredReturns:
    """Divide return ``i`` by its vol ratio, for every index the ratio series covers."""
    returns = np.asarray(returns, dtype=float)
    if ratios.index.size == 0 or ratios.index[-1] != returns.shape[0] or ratios.ratios.shape[1:] != returns.shape[1:]:
        raise IndexMismatch(
            f"ratio series ends at index {ratios.index[-1] if ratios.index.size else None}, "
            f"returns end at {returns.shape[0]}"
        )
    raw = returns[ratios.index - 1]
    return FilteredReturns(ratios.index.copy(), _readonly(raw / ratios.ratios))


def detect_extreme_events(filtered: FilteredReturns, today_var, eta: float, violations: int, eps_var: float = 0.0) -> ExtremeEventSet:
    """Indices where at least ``violations`` factors have |filtered| >= eta * today's vol.

    ``eps_var`` floors today's variance inside the threshold so dead series
    (zero variance) do not flag every index.
    """
    if not eta > 0 or violations < 1:
        raise InvalidConfig("eta > 0 and violations >= 1 required")
    threshold = eta * np.sqrt(np.maximum(np.asarray(today_var, dtype=float), eps_var))
    hits = np.abs(filtered.values) >= threshold
    extreme = hits.sum(axis=1) >= violations
    indices = filtered.index[extreme]
    by_index = {int(i): tuple(np.nonzero(h)[0].tolist()) for i, h in zip(indices, hits[extreme])}
    return ExtremeEventSet(eta, violations, indices, by_index)


def partition_returns(filtered: FilteredReturns, extremes) -> tuple[FilteredReturns, FilteredReturns]:
    """Split into (diffusive, extreme) parts.

    ``extremes`` is an ExtremeEventSet or an index array.
    """
    idx = np.asarray(getattr(extremes, "indices", extremes), dtype=int)
    is_ext = np.isin(filtered.index, idx)
    if is_ext.sum() != np.unique(idx).size:
        raise IndexMismatch("extreme indices are not a subset of the filtered index range")
    if is_ext.all():
        raise AllReturnsExtreme(f"all {len(filtered)} filtered returns are extreme; no diffusive drivers remain")
    diffusive = FilteredReturns(filtered.index[~is_ext], _readonly(filtered.values[~is_ext]))
    extreme = FilteredReturns(filtered.index[is_ext], _readonly(filtered.values[is_ext]))
    return diffusive, extreme
