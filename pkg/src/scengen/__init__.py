"""Scenario generation from empirically calibrated constant-direction SDEs."""

import logging

from .config import FilterConfig, ModelConfig, RiskConfig, RunConfig, SimulationConfig
from .data import FactorLayout, HistoricalPanel, compute_returns, load_panel, slice_state
from .engine import ScenarioSet, euler_step, simulate_scenarios
from .mixing import JumpSpec, TimeChangeDistribution
from .model import CalibratedModel, GeometricSigma, build_calibrated_model
from .pipeline import Calibration, calibrate
from .risk import Portfolio, backtest, var_es

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "FilterConfig", "ModelConfig", "RiskConfig", "RunConfig", "SimulationConfig",
    "FactorLayout", "HistoricalPanel", "compute_returns", "load_panel", "slice_state",
    "ScenarioSet", "euler_step", "simulate_scenarios",
    "JumpSpec", "TimeChangeDistribution",
    "CalibratedModel", "GeometricSigma", "build_calibrated_model",
    "Calibration", "calibrate",
    "Portfolio", "backtest", "var_es",
]
