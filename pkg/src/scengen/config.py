"""Run configuration: dataclass sections plus a flat ``key = value`` file format.

Precedence when resolving a run: command-line flag > config file > default.
Defaults follow the concrete implementation the method was published with
(K=500, L=20/40, eta=4, M=4, 2% jump rate, 0.9d/1.9d time change).
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

from .data import parse_key_values
from .errors import InvalidConfig

DEFAULT_TIME_CHANGE = ((0.9, 0.9), (1.9, 0.1))


@dataclass(frozen=True)
class FilterConfig:
    l_rescale: int = 20
    l_extreme: int = 40
    eta: float = 4.0
    violations: int = 4
    eps_var: float = 1e-12
    # switches for the pure calibration setting (no vol filtering / no jump screening)
    rescale: bool = True
    screen_extremes: bool = True
    # returns before the first full window reuse the earliest full-window ratio;
    # when off they are dropped and calibration starts at max(l_rescale, l_extreme)
    backfill_warmup: bool = True

    def __post_init__(self):
        if self.l_rescale < 1 or self.l_extreme < 1:
            raise InvalidConfig("sliding windows must be >= 1")
        if not self.eta > 0:
            raise InvalidConfig("eta must be > 0")
        if self.violations < 1:
            raise InvalidConfig("violations (M) must be >= 1")
        if self.eps_var < 0:
            raise InvalidConfig("eps_var must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    rate_floor: float = 1e-4
    mu2: Optional[tuple[float, ...]] = None
    include_hjm: bool = True
    include_fx_drift: bool = True
    jump_rate: float = 0.02
    time_change: tuple[tuple[float, float], ...] = DEFAULT_TIME_CHANGE

    def __post_init__(self):
        if not self.rate_floor > 0:
            raise InvalidConfig("rate_floor must be > 0")
        if not 0 <= self.jump_rate < 1:
            raise InvalidConfig("jump_rate must lie in [0, 1)")


@dataclass(frozen=True)
class SimulationConfig:
    n_scenarios: int = 5000
    horizon_steps: int = 1
    seed: int = 0
    steps_per_day: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise InvalidConfig("n_scenarios must be >= 1")
        if self.horizon_steps < 1 or self.steps_per_day < 1:
            raise InvalidConfig("horizon_steps and steps_per_day must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")


@dataclass(frozen=True)
class RiskConfig:
    confidence: float = 0.99
    window_days: int = 250
    history: int = 500
    backtest_scenarios: int = 2000

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise InvalidConfig("confidence must lie in (0, 1)")
        if self.window_days < 0 or self.history < 2:
            raise InvalidConfig("window_days >= 0 and history >= 2 required")


@dataclass(frozen=True)
class RunConfig:
    panel: Optional[str] = None
    layout: Optional[str] = None
    out: str = "out"
    model_file: Optional[str] = None
    portfolio: Optional[str] = None
    report_factors: tuple[str, ...] = ()
    n_bins: int = 50
    validate_scenarios: int = 50_000
    filter: FilterConfig = field(default_factory=FilterConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    risk: RiskConfig = field(default_factory=RiskConfig)

    def to_dict(self) -> dict:
        """Resolved config for echoing into outputs.

        The worker count is left out: it never changes results, and
        keeping it would make 1-thread and N-thread files differ.
        """
        d = dataclasses.asdict(self)
        del d["simulation"]["workers"]
        return d


_SECTIONS = {"filter": FilterConfig, "model": ModelConfig, "simulation": SimulationConfig, "risk": RiskConfig}
_TOP_LEVEL = {f.name for f in fields(RunConfig)} - set(_SECTIONS)

# flat config-file key -> (section or None, field name)
KEYS: dict[str, tuple[Optional[str], str]] = {name: (None, name) for name in _TOP_LEVEL}
for _section, _cls in _SECTIONS.items():
    for _f in fields(_cls):
        KEYS[_f.name] = (_section, _f.name)
KEYS.update(
    {
        "L_rescale": ("filter", "l_rescale"),
        "L_extreme": ("filter", "l_extreme"),
        "M": ("filter", "violations"),
        "scenarios": ("simulation", "n_scenarios"),
    }
)


def _convert(section: Optional[str], name: str, raw: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    if name == "time_change":
        return parse_time_change(raw)
    if name == "mu2":
        return tuple(float(v) for v in raw.split(",")) if raw.strip() else None
    if name == "report_factors":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    cls = _SECTIONS[section] if section else RunConfig
    default = next(f for f in fields(cls) if f.name == name).default
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise InvalidConfig(f"{name}: expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_time_change(text: str) -> tuple[tuple[float, float], ...]:
    """``"0.9:0.9, 1.9:0.1"`` -> ((0.9, 0.9), (1.9, 0.1)) as (days, probability)."""
    atoms = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            days, prob = item.split(":")
            atoms.append((float(days), float(prob)))
        except ValueError:
            raise InvalidConfig(f"time_change atom {item!r} is not 'days:probability'") from None
    return tuple(atoms)


def resolve_config(path: Union[str, os.PathLike, None] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional config file, and overrides.

    ``overrides`` uses the same flat keys as the file; ``None`` values are skipped.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InvalidConfig(f"config file not found: {p}")
        raw.update(parse_key_values(p.read_text()))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {s: {} for s in _SECTIONS}
    for key, value in raw.items():
        if key not in KEYS:
            raise InvalidConfig(f"unknown config key {key!r}")
        section, name = KEYS[key]
        try:
            converted = _convert(section, name, value)
        except ValueError as exc:
            raise InvalidConfig(f"{key}: {exc}") from None
        (sections[section] if section else top)[name] = converted
    built = {s: _SECTIONS[s](**kw) for s, kw in sections.items()}
    return RunConfig(**top, **built)
