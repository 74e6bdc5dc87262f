"""Scenario simulation: explicit-implicit Euler steps with jumps and a random time change.

Every scenario owns a counter-based Philox stream keyed by
(seed, scenario index), and scenarios are processed in chunks whose
boundaries do not depend on the worker count, so results are
bit-identical for any number of threads.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Optional, Union

import numpy as np

from .config import SimulationConfig
from .errors import InvalidConfig, NonFiniteState
from .mixing import maybe_jump
from .model import CalibratedModel

CHUNK = 512
_MASK64 = (1 << 64) - 1


def scenario_stream(seed: int, scenario: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=((scenario & _MASK64) << 64) | (seed & _MASK64)))


@dataclass(frozen=True)
class ScenarioDraws:
    """Randomness consumed by one scenario, in draw order."""

    u_time: float
    u_jump: np.ndarray  # (days, 2): trigger and pick uniforms per day-step
    normals: np.ndarray  # (days * steps_per_day, n_drivers)


def draw_scenario(seed: int, scenario: int, days: int, steps_per_day: int, n_drivers: int) -> ScenarioDraws:
    g = scenario_stream(seed, scenario)
    u = g.random(1 + 2 * days)
    z = g.standard_normal((days * steps_per_day, n_drivers))
    return ScenarioDraws(float(u[0]), u[1:].reshape(days, 2), z)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Horizon states plus the audit trail of time changes and jumps.

    ``jump_sources[k]`` lists the time-series indices of the extreme
    returns mixed into scenario k, in the order they were applied.
    """

    factor_names: tuple[str, ...]
    states: np.ndarray
    tau_days: np.ndarray
    n_jumps: np.ndarray
    jump_sources: tuple[tuple[int, ...], ...]
    anchor_state: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return self.states - self.anchor_state

    def __len__(self) -> int:
        return self.states.shape[0]


def _step_batch(model: CalibratedModel, states: np.ndarray, dt: np.ndarray, z: np.ndarray) -> np.ndarray:
    m = model.sigma.multipliers(states)
    out = model.shift(states, dt)
    out += model.drift_vector(states, m) * dt[:, None]
    out += model.scale * m * ((z * np.sqrt(dt)[:, None]) @ model.directions)
    return out


def _apply_jumps(model: CalibratedModel, states: np.ndarray, u_jump: np.ndarray):
    spec = model.jumps
    if spec.rate <= 0 or spec.size == 0:
        return states, np.zeros(len(states), dtype=bool), np.zeros(len(states), dtype=int)
    hit = u_jump[:, 0] < spec.rate
    pick = np.minimum((u_jump[:, 1] * spec.size).astype(int), spec.size - 1)
    if hit.any():
        states = states.copy()
        m = model.sigma.multipliers(states[hit])
        states[hit] += m * spec.directions[pick[hit]]
    return states, hit, pick


def euler_step(model: CalibratedModel, state, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One explicit-implicit Euler step from ``state`` over ``dt`` year fractions.

    Draws the jump trigger first (two uniforms), then the Brownian
    increments. A triggered jump is added to the pre-step state, and the
    step is then taken from the jumped state.
    """
    if dt < 0:
        raise InvalidConfig("dt must be >= 0")
    state = np.asarray(state, dtype=float)[None, :]
    jump = maybe_jump(model.jumps, model.sigma, state[0], rng)
    if jump is not None:
        state = state + jump
    z = rng.standard_normal((1, model.n_drivers))
    new = _step_batch(model, state, np.array([float(dt)]), z)[0]
    if not np.all(np.isfinite(new)):
        raise NonFiniteState([0], 0)
    return new


def _simulate_chunk(model: CalibratedModel, config: SimulationConfig, start: int, stop: int, keep_path: bool = False):
    days, spd = config.horizon_steps, config.steps_per_day
    draws = [draw_scenario(config.seed, s, days, spd, model.n_drivers) for s in range(start, stop)]
    n = stop - start
    tau = model.time_change.from_uniform(np.array([d.u_time for d in draws]))
    dt = tau * model.delta / spd
    u_jump = np.stack([d.u_jump for d in draws])
    z = np.stack([d.normals for d in draws])
    states = np.broadcast_to(model.anchor_state, (n, model.layout.J)).copy()
    path = [states] if keep_path else None
    n_jumps = np.zeros(n, dtype=int)
    sources: list[list[int]] = [[] for _ in range(n)]
    for day in range(days):
        states, hit, pick = _apply_jumps(model, states, u_jump[:, day])
        for k in np.nonzero(hit)[0]:
            n_jumps[k] += 1
            sources[k].append(int(model.jumps.source_indices[pick[k]]))
        for sub in range(spd):
            step = day * spd + sub
            states = _step_batch(model, states, dt, z[:, step])
            bad = ~np.all(np.isfinite(states), axis=1)
            if bad.any():
                raise NonFiniteState((start + np.nonzero(bad)[0]).tolist(), step)
        if keep_path:
            path.append(states)
    return states, tau, n_jumps, [tuple(s) for s in sources], path


def simulate_scenarios(model: CalibratedModel, config: Optional[SimulationConfig] = None, workers: Optional[int] = None) -> ScenarioSet:
    """Simulate ``config.n_scenarios`` horizon states from the model's anchor.

    Each scenario samples one time-change duration tau (in days); the
    horizon is tau * horizon_steps * Δ, split into steps_per_day Euler
    substeps per day-step. A jump may be triggered at the start of every
    day-step with probability ``model.jumps.rate``.
    """
    config = config or SimulationConfig()
    workers = config.workers if workers is None else workers
    bounds = [(a, min(a + CHUNK, config.n_scenarios)) for a in range(0, config.n_scenarios, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _simulate_chunk(model, config, *b), bounds))
    else:
        parts = [_simulate_chunk(model, config, *b) for b in bounds]
    states = np.concatenate([p[0] for p in parts])
    tau = np.concatenate([p[1] for p in parts])
    n_jumps = np.concatenate([p[2] for p in parts])
    sources = tuple(s for p in parts for s in p[3])
    for a in (states, tau, n_jumps):
        a.setflags(write=False)
    return ScenarioSet(model.layout.column_names, states, tau, n_jumps, sources, model.anchor_state)


def simulate_paths(model: CalibratedModel, config: Optional[SimulationConfig] = None) -> tuple[np.ndarray, np.ndarray]:
    """Like ``simulate_scenarios`` but keeps the state after every day-step.

    Returns (paths, tau) with paths of shape (n_scenarios, horizon_steps + 1, J);
    the same streams are used, so ``paths[:, -1]`` equals the scenario states.
    """
    config = config or SimulationConfig()
    parts = [
        _simulate_chunk(model, config, a, min(a + CHUNK, config.n_scenarios), keep_path=True)
        for a in range(0, config.n_scenarios, CHUNK)
    ]
    paths = np.concatenate([np.stack(p[4], axis=1) for p in parts])
    return paths, np.concatenate([p[1] for p in parts])


# -- export ---------------------------------------------------------------


def write_scenarios_csv(scenarios: ScenarioSet, target: Union[str, os.PathLike, IO[str]], config_echo: Optional[dict] = None) -> None:
    """One row per scenario: factor levels, then ``tau_days``, ``n_jumps``, ``jump_sources``.

    The resolved configuration is embedded as a leading ``#`` comment line.
    """
    own = isinstance(target, (str, os.PathLike))
    fh = open(target, "w", newline="", encoding="utf-8") if own else target
    try:
        if config_echo is not None:
            fh.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario",) + tuple(scenarios.factor_names) + ("tau_days", "n_jumps", "jump_sources"))
        for k in range(len(scenarios)):
            w.writerow(
                [k]
                + [repr(float(x)) for x in scenarios.states[k]]
                + [repr(float(scenarios.tau_days[k])), int(scenarios.n_jumps[k]), ";".join(map(str, scenarios.jump_sources[k]))]
            )
    finally:
        if own:
            fh.close()


def scenarios_to_dict(scenarios: ScenarioSet, config_echo: Optional[dict] = None) -> dict:
    return {
        "format": "scengen-scenarios",
        "version": 1,
        "factors": list(scenarios.factor_names),
        "anchor_state": scenarios.anchor_state.tolist(),
        "states": scenarios.states.tolist(),
        "tau_days": scenarios.tau_days.tolist(),
        "n_jumps": scenarios.n_jumps.tolist(),
        "jump_sources": [list(s) for s in scenarios.jump_sources],
        "config": config_echo or {},
    }


def scenarios_from_dict(doc: dict) -> ScenarioSet:
    J = len(doc["factors"])
    return ScenarioSet(
        tuple(doc["factors"]),
        np.array(doc["states"], dtype=float).reshape(-1, J),
        np.array(doc["tau_days"], dtype=float),
        np.array(doc["n_jumps"], dtype=int),
        tuple(tuple(s) for s in doc["jump_sources"]),
        np.array(doc["anchor_state"], dtype=float),
    )
