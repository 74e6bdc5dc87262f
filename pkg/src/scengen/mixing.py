"""Random time change and extreme-event jump mixing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyJumpMeasure, InvalidConfig


@dataclass(frozen=True)
class TimeChangeDistribution:
    """Discrete distribution of the simulated trading time per calendar day-step.

    ``atoms`` are (duration in days, probability) pairs.
    """

    atoms: tuple[tuple[float, float], ...] = ((0.9, 0.9), (1.9, 0.1))

    def __post_init__(self):
        atoms = tuple((float(d), float(p)) for d, p in self.atoms)
        if not atoms:
            raise InvalidConfig("time change needs at least one atom")
        if any(d <= 0 or p <= 0 for d, p in atoms):
            raise InvalidConfig("time-change durations and probabilities must be positive")
        if abs(sum(p for _, p in atoms) - 1.0) > 1e-9:
            raise InvalidConfig(f"time-change probabilities sum to {sum(p for _, p in atoms)}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def trivial(cls) -> "TimeChangeDistribution":
        return cls(((1.0, 1.0),))

    @property
    def durations(self) -> np.ndarray:
        return np.array([d for d, _ in self.atoms])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    def mean(self) -> float:
        return float(self.durations @ self.probabilities)

    def variance(self) -> float:
        return float((self.durations**2) @ self.probabilities) - self.mean() ** 2

    def from_uniform(self, u):
        """Inverse-CDF map of uniforms in [0, 1) onto atom durations."""
        cdf = np.cumsum(self.probabilities)
        cdf[-1] = 1.0
        k = np.searchsorted(cdf, np.asarray(u), side="right")
        return self.durations[np.minimum(k, len(cdf) - 1)]


def sample_time_change(dist: TimeChangeDistribution, rng: np.random.Generator, size=None):
    return dist.from_uniform(rng.random(size))


@dataclass(frozen=True, eq=False)
class JumpSpec:
    """Jump trigger probability per day-step and the empirical jump measure.

    ``directions`` holds sigma(Y_i)^-1 applied to each extreme filtered
    return (one row per extreme index); the realized jump from state y
    is sigma(y) applied to a uniformly chosen row.
    """

    rate: float
    directions: np.ndarray
    source_indices: np.ndarray

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise InvalidConfig("jump rate must lie in [0, 1)")
        d = np.array(self.directions, dtype=float, copy=True)
        if d.ndim != 2 or d.shape[0] != len(self.source_indices):
            raise InvalidConfig("jump directions must be an (n_extreme, J) matrix matching source_indices")
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "source_indices", np.asarray(self.source_indices, dtype=int))
        if self.rate > 0 and len(self.source_indices) == 0:
            raise EmptyJumpMeasure("jump rate > 0 but the extreme-event set is empty")

    @property
    def size(self) -> int:
        return len(self.source_indices)


def maybe_jump(spec: JumpSpec, sigma, state, rng: np.random.Generator) -> Optional[np.ndarray]:
    """Return a jump vector with probability ``spec.rate``, else ``None``.

    Consumes exactly two uniforms from ``rng`` (trigger, pick) whatever the outcome.
    """
    u_trigger, u_pick = rng.random(2)
    if spec.rate > 0 and spec.size == 0:
        raise EmptyJumpMeasure("jump rate > 0 but the extreme-event set is empty")
    if not u_trigger < spec.rate:
        return None
    k = min(int(u_pick * spec.size), spec.size - 1)
    return sigma.multipliers(state) * spec.directions[k]
