"""Constant-direction volatility model for joint IR/FX risk factors.

State dynamics on the tenor grid (Musiela parametrization)::

    dY = (d/dx Y + mu3(Y) + mu2) dt + scale * sum_i sigma(Y) . lambda_i dB^i

with ``d/dx`` realized by shifting the curves, ``mu3`` the no-arbitrage
drift (HJM for curves, quanto correction for foreign curves, interest
differential for log-FX) and the directions ``lambda_i`` read directly
off the filtered historical returns.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np

from .data import FactorLayout, HistoricalPanel
from .errors import (
    AllReturnsExtreme,
    EmptyPanel,
    LengthMismatch,
    LoadingCountMismatch,
    ModelFileError,
    NegativeTime,
)
from .filtering import FilteredReturns
from .mixing import JumpSpec, TimeChangeDistribution

log = logging.getLogger(__name__)

MODEL_FORMAT = "scengen-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class GeometricSigma:
    """Diagonal state-dependent volatility factor.

    Log-FX factors use the identity; forward rates use
    ``sqrt(max(level, rate_floor))``, which keeps the map invertible.
    """

    rate_mask: np.ndarray
    rate_floor: float = 1e-4

    def __post_init__(self):
        mask = np.array(self.rate_mask, dtype=bool, copy=True)
        mask.setflags(write=False)
        object.__setattr__(self, "rate_mask", mask)

    @classmethod
    def for_layout(cls, layout: FactorLayout, rate_floor: float = 1e-4) -> "GeometricSigma":
        return cls(layout.rate_mask, rate_floor)

    @classmethod
    def identity(cls, J: int) -> "GeometricSigma":
        return cls(np.zeros(J, dtype=bool))

    def multipliers(self, state) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if state.shape[-1] != self.rate_mask.size:
            raise LengthMismatch(f"state has {state.shape[-1]} factors, sigma expects {self.rate_mask.size}")
        m = np.ones_like(state)
        m[..., self.rate_mask] = np.sqrt(np.maximum(state[..., self.rate_mask], self.rate_floor))
        return m


def sigma_apply(sigma: GeometricSigma, state, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = sigma.multipliers(state)
    if v.shape[-1] != m.shape[-1]:
        raise LengthMismatch(f"vector has {v.shape[-1]} factors, state has {m.shape[-1]}")
    return m * v


def sigma_inverse_apply(sigma: GeometricSigma, state, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = sigma.multipliers(state)
    if v.shape[-1] != m.shape[-1]:
        raise LengthMismatch(f"vector has {v.shape[-1]} factors, state has {m.shape[-1]}")
    return v / m


def apply_shift(curve, t, tenors) -> np.ndarray:
    """Shift a curve (or a batch of curves, one per row) by time ``t``.

    The value at tenor x becomes the linear interpolant at x + t, flat
    beyond the last tenor. ``t`` may be a scalar or one value per row.
    """
    tenors = np.asarray(tenors, dtype=float)
    curve = np.asarray(curve, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeTime("shift time must be >= 0")
    n = tenors.size
    if curve.shape[-1] != n:
        raise LengthMismatch(f"curve has {curve.shape[-1]} points, grid has {n}")
    if n <= 1:
        return curve.copy()
    x = np.minimum(tenors + t[..., None], tenors[-1])
    left = np.clip(np.searchsorted(tenors, x, side="right") - 1, 0, n - 2)
    h = tenors[left + 1] - tenors[left]
    w = (x - tenors[left]) / h
    lo = np.take_along_axis(curve, np.broadcast_to(left, curve.shape), axis=-1) if curve.ndim > 1 else curve[left]
    hi = np.take_along_axis(curve, np.broadcast_to(left + 1, curve.shape), axis=-1) if curve.ndim > 1 else curve[left + 1]
    return lo + w * (hi - lo)


def cumulative_trapezoid_weights(tenors) -> np.ndarray:
    """Matrix W with ``(W @ v)[k]`` = integral of v from 0 to tenor k.

    Trapezoid rule on the grid; v is held flat on [0, first tenor].
    """
    tenors = np.asarray(tenors, dtype=float)
    n = tenors.size
    W = np.zeros((n, n))
    if n == 0:
        return W
    W[:, 0] = tenors[0]
    for k in range(1, n):
        W[k] = W[k - 1]
        h = tenors[k] - tenors[k - 1]
        W[k, k - 1] += h / 2
        W[k, k] += h / 2
    return W


def _hjm_gram_operator(directions, tenors) -> np.ndarray:
    # drift(m) = m * (m @ A) with A = (W * G).T, G the Gram matrix of the curve directions
    D = np.asarray(directions, dtype=float)
    G = D.T @ D
    return (cumulative_trapezoid_weights(tenors) * G).T


def hjm_domestic_drift(curve, directions, tenors, scale: float, multipliers=None) -> np.ndarray:
    """No-arbitrage HJM drift of a forward curve (excluding the d/dx shift term).

    Parameters
    ----------
    curve : (n,) array
    directions : (d, n) array
        Volatility directions restricted to this curve's components.
    tenors : (n,) array
    scale : float
        Common driver scale; it enters the drift squared.
    multipliers : (n,) array, optional
        sigma(curve) multipliers; identity when omitted.

    Returns
    -------
    (n,) array: sum_i v_i(x) * integral_0^x v_i, with v_i = scale * m * lambda_i.
    """
    curve = np.asarray(curve, dtype=float)
    m = np.ones_like(curve) if multipliers is None else np.asarray(multipliers, dtype=float)
    D = np.asarray(directions, dtype=float).reshape(-1, curve.shape[-1])
    A = _hjm_gram_operator(D, tenors)
    return scale**2 * m * (m @ A)


def quanto_correction(directions, fx_loadings, scale: float, multipliers=None) -> np.ndarray:
    """sum_i v_i(x) * delta_i for the curve components v_i = scale * m * lambda_i."""
    D = np.asarray(directions, dtype=float)
    delta = np.asarray(fx_loadings, dtype=float)
    if D.shape[0] != delta.shape[-1]:
        raise LoadingCountMismatch(f"{delta.shape[-1]} FX loadings for {D.shape[0]} drivers")
    q = scale * (delta @ D)
    return q if multipliers is None else np.asarray(multipliers, dtype=float) * q


def hjm_foreign_drift(curve, directions, fx_loadings, tenors, scale: float, multipliers=None) -> np.ndarray:
    """Foreign-curve drift under the domestic measure: HJM drift minus the quanto term."""
    D = np.asarray(directions, dtype=float).reshape(-1, np.asarray(curve).shape[-1])
    quanto = quanto_correction(D, fx_loadings, scale, multipliers)
    return hjm_domestic_drift(curve, D, tenors, scale, multipliers) - quanto


def fx_drift(domestic_short_rate, foreign_short_rate, fx_loadings) -> float:
    delta = np.asarray(fx_loadings, dtype=float)
    return (domestic_short_rate - foreign_short_rate) - 0.5 * np.sum(delta**2, axis=-1)


@dataclass(frozen=True)
class DriftSpec:
    include_hjm: bool = True
    include_fx_drift: bool = True
    mu2: Optional[tuple[float, ...]] = None

    @classmethod
    def off(cls) -> "DriftSpec":
        return cls(False, False, None)


@dataclass(frozen=True, eq=False)
class CalibratedModel:
    """Immutable calibrated model.

    ``directions`` has one row per diffusive driver, each equal to
    sigma(Y_i)^-1 applied to the filtered return at index i. The
    diffusion coefficient at state y is ``scale * sigma(y) * directions``.
    """

    layout: FactorLayout
    sigma: GeometricSigma
    directions: np.ndarray
    scale: float
    drift: DriftSpec
    jumps: JumpSpec
    time_change: TimeChangeDistribution
    anchor_state: np.ndarray
    delta: float
    driver_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    anchor_date: Optional[str] = None

    def __post_init__(self):
        D = np.array(self.directions, dtype=float, copy=True)
        if D.ndim != 2 or D.shape[1] != self.layout.J:
            raise LengthMismatch(f"directions must be (N_d, {self.layout.J})")
        D.setflags(write=False)
        y = np.array(self.anchor_state, dtype=float, copy=True)
        if y.shape != (self.layout.J,):
            raise LengthMismatch("anchor state length must equal J")
        y.setflags(write=False)
        idx = np.array(self.driver_indices, dtype=int, copy=True)
        if idx.size == 0:
            idx = np.arange(1, D.shape[0] + 1)
        idx.setflags(write=False)
        object.__setattr__(self, "directions", D)
        object.__setattr__(self, "anchor_state", y)
        object.__setattr__(self, "driver_indices", idx)
        if self.jumps.directions.shape[1:] != (self.layout.J,) and self.jumps.size:
            raise LengthMismatch("jump directions must have J columns")
        if self.drift.mu2 is not None and len(self.drift.mu2) != self.layout.J:
            raise LengthMismatch("mu2 override must have J entries")

    @property
    def n_drivers(self) -> int:
        return self.directions.shape[0]

    def replace(self, **changes) -> "CalibratedModel":
        return replace(self, **changes)

    # -- precomputed no-arbitrage pieces ---------------------------------

    @cached_property
    def fx_loadings(self) -> np.ndarray:
        """(p, N_d): the log-FX component of every direction, times scale."""
        lay = self.layout
        cols = [lay.fx_index(a) for a in range(1, lay.p + 1)]
        return self.scale * self.directions[:, cols].T

    @cached_property
    def _hjm_operators(self) -> list:
        lay = self.layout
        return [_hjm_gram_operator(self.directions[:, lay.curve_slice(a)], lay.tenors) for a in range(lay.p + 1)]

    @cached_property
    def _quanto_vectors(self) -> list:
        lay = self.layout
        return [
            quanto_correction(self.directions[:, lay.curve_slice(a)], self.fx_loadings[a - 1], self.scale)
            for a in range(1, lay.p + 1)
        ]

    def shift(self, states, t) -> np.ndarray:
        """Apply the shift semigroup for time ``t`` to every curve; log-FX unchanged."""
        states = np.asarray(states, dtype=float)
        out = states.copy()
        lay = self.layout
        if lay.n:
            for a in range(lay.p + 1):
                sl = lay.curve_slice(a)
                out[..., sl] = apply_shift(states[..., sl], t, lay.tenors)
        return out

    def drift_vector(self, states, multipliers=None) -> np.ndarray:
        """Drift per unit time (excluding the shift term) for each state row."""
        states = np.asarray(states, dtype=float)
        m = self.sigma.multipliers(states) if multipliers is None else multipliers
        mu = np.zeros_like(states)
        lay = self.layout
        if self.drift.include_hjm and lay.n:
            for a in range(lay.p + 1):
                sl = lay.curve_slice(a)
                ma = m[..., sl]
                mu[..., sl] = self.scale**2 * ma * (ma @ self._hjm_operators[a])
                if a >= 1:
                    mu[..., sl] -= ma * self._quanto_vectors[a - 1]
        if self.drift.include_fx_drift and lay.p:
            d0 = states[..., 0] if lay.n else 0.0
            for a in range(1, lay.p + 1):
                ra = states[..., lay.curve_slice(a).start] if lay.n else 0.0
                mu[..., lay.fx_index(a)] = fx_drift(d0, ra, self.fx_loadings[a - 1])
        if self.drift.mu2 is not None:
            mu = mu + np.asarray(self.drift.mu2, dtype=float)
        return mu

    def diffusion_covariance(self, state=None, t: Optional[float] = None) -> np.ndarray:
        """Covariance of the one-step diffusive increment over time ``t`` (default Δ)."""
        state = self.anchor_state if state is None else state
        t = self.delta if t is None else t
        d = self.sigma.multipliers(state) * self.directions
        return t * self.scale**2 * (d.T @ d)


def build_calibrated_model(
    panel: HistoricalPanel,
    diffusive: FilteredReturns,
    extreme: Optional[FilteredReturns] = None,
    *,
    rate_floor: float = 1e-4,
    drift: Optional[DriftSpec] = None,
    jump_rate: float = 0.02,
    time_change: Optional[TimeChangeDistribution] = None,
    quiet: bool = False,
) -> CalibratedModel:
    """Assemble the calibrated model from filtered diffusive and extreme returns.

    The driver scale is 1/sqrt(Δ·N_d) with N_d the number of retained
    diffusive returns. If the extreme set is empty the jump rate falls
    back to zero (there is nothing to sample from).
    """
    if panel.K < 2:
        raise EmptyPanel("calibration needs at least two observations")
    if len(diffusive) == 0:
        raise AllReturnsExtreme("no diffusive returns to calibrate from")
    sigma = GeometricSigma.for_layout(panel.layout, rate_floor)
    base_states = panel.values[diffusive.index - 1]
    directions = sigma_inverse_apply(sigma, base_states, diffusive.values)
    scale = 1.0 / math.sqrt(panel.delta * len(diffusive))

    J = panel.layout.J
    if extreme is not None and len(extreme):
        jump_dirs = sigma_inverse_apply(sigma, panel.values[extreme.index - 1], extreme.values)
        jump_idx = extreme.index
    else:
        jump_dirs = np.zeros((0, J))
        jump_idx = np.zeros(0, dtype=int)
        if jump_rate > 0 and not quiet:
            log.warning("extreme-event set is empty; jump rate %.4g disabled", jump_rate)
        jump_rate = 0.0

    return CalibratedModel(
        layout=panel.layout,
        sigma=sigma,
        directions=directions,
        scale=scale,
        drift=drift or DriftSpec(),
        jumps=JumpSpec(jump_rate, jump_dirs, jump_idx),
        time_change=time_change or TimeChangeDistribution(),
        anchor_state=panel.values[-1],
        delta=panel.delta,
        driver_indices=diffusive.index,
        anchor_date=str(panel.dates[-1]),
    )


# -- model file ---------------------------------------------------------


def model_to_dict(model: CalibratedModel, config_echo: Optional[dict] = None) -> dict:
    lay = model.layout
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layout": {"currencies": list(lay.currencies), "tenors": list(lay.tenor_grid), "factors": list(lay.column_names)},
        "delta": model.delta,
        "anchor_date": model.anchor_date,
        "anchor_state": model.anchor_state.tolist(),
        "sigma": {"rate_floor": model.sigma.rate_floor, "rate_mask": model.sigma.rate_mask.tolist()},
        "scale": model.scale,
        "drift": {
            "include_hjm": model.drift.include_hjm,
            "include_fx_drift": model.drift.include_fx_drift,
            "mu2": None if model.drift.mu2 is None else list(model.drift.mu2),
        },
        "driver_indices": model.driver_indices.tolist(),
        "directions": model.directions.tolist(),
        "jumps": {
            "rate": model.jumps.rate,
            "source_indices": model.jumps.source_indices.tolist(),
            "directions": model.jumps.directions.tolist(),
        },
        "time_change": [list(a) for a in model.time_change.atoms],
        "config": config_echo or {},
    }


def model_from_dict(doc: dict) -> CalibratedModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"not a {MODEL_FORMAT} file (format field missing or wrong)")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported model format version {doc.get('version')!r}; expected {MODEL_VERSION}")
    try:
        lay = FactorLayout(tuple(doc["layout"]["currencies"]), tuple(doc["layout"]["tenors"]))
        J = lay.J
        sigma = GeometricSigma(np.array(doc["sigma"]["rate_mask"], dtype=bool), float(doc["sigma"]["rate_floor"]))
        jd = np.array(doc["jumps"]["directions"], dtype=float).reshape(-1, J)
        dr = doc["drift"]
        return CalibratedModel(
            layout=lay,
            sigma=sigma,
            directions=np.array(doc["directions"], dtype=float).reshape(-1, J),
            scale=float(doc["scale"]),
            drift=DriftSpec(bool(dr["include_hjm"]), bool(dr["include_fx_drift"]), None if dr["mu2"] is None else tuple(dr["mu2"])),
            jumps=JumpSpec(float(doc["jumps"]["rate"]), jd, np.array(doc["jumps"]["source_indices"], dtype=int)),
            time_change=TimeChangeDistribution(tuple(tuple(a) for a in doc["time_change"])),
            anchor_state=np.array(doc["anchor_state"], dtype=float),
            delta=float(doc["delta"]),
            driver_indices=np.array(doc["driver_indices"], dtype=int),
            anchor_date=doc.get("anchor_date"),
        )
    except ModelFileError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"corrupted model file (format version {doc.get('version')}): {exc}") from None


def save_model(model: CalibratedModel, path, config_echo: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, config_echo), fh, indent=1)
        fh.write("\n")


def load_model(path) -> CalibratedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file is not valid structured text (expected {MODEL_FORMAT} v{MODEL_VERSION}): {exc}") from None
    except OSError as exc:
        raise ModelFileError(f"cannot read model file: {exc}") from None
    return model_from_dict(doc)
