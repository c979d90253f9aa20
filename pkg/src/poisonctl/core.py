"""Shared domain types and seeded randomness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class DataPoint:
    """One stream item: a feature vector and an optional label in {-1, +1}."""

    features: np.ndarray
    label: Optional[float] = None

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64, ndmin=1)
        if x.ndim != 1:
            raise ValueError(f"features must be a vector, got shape {x.shape}")
        x.flags.writeable = False
        object.__setattr__(self, "features", x)
        if self.label is not None:
            y = float(self.label)
            if y not in (-1.0, 1.0):
                raise ValueError(f"label must be -1 or +1, got {self.label}")
            object.__setattr__(self, "label", y)

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    def with_features(self, features) -> "DataPoint":
        return DataPoint(features, self.label)

    def __eq__(self, other):
        if not isinstance(other, DataPoint):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)

    def __hash__(self):
        return hash((self.features.tobytes(), self.label))


# ModelParams are plain float64 arrays: shape (d,) for logistic regression
# weights, shape (k, d) for k-means centroids.
ModelParams = np.ndarray


def model_dim(theta: ModelParams) -> int:
    return int(np.shape(theta)[-1])


@dataclass(frozen=True)
class ControlState:
    """The attacker's view at time ``step``: victim model plus incoming point."""

    model: ModelParams
    incoming: DataPoint
    step: int = 0

    def __post_init__(self):
        if model_dim(self.model) != self.incoming.dim:
            raise ValueError(
                f"incoming point has dimension {self.incoming.dim}, "
                f"model has dimension {model_dim(self.model)}"
            )
        if self.step < 0:
            raise ValueError("step must be nonnegative")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by a seed and a fork path.

    Draws come from numpy's counter-based Philox generator, keyed through a
    ``SeedSequence`` built from ``(seed, path)``. The same stream always
    yields the same draws, independent of process or thread layout.
    """

    seed: int
    path: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    @property
    def sequence_id(self) -> int:
        """64-bit id summarising the fork path."""
        ss = np.random.SeedSequence(0, spawn_key=self.path)
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def fork(self, child_id: int) -> "RngStream":
        return rng_fork(self, child_id)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def rng_fork(parent: RngStream, child_id: int) -> RngStream:
    if child_id < 0:
        raise ValueError("child_id must be nonnegative")
    return RngStream(parent.seed, parent.path + (int(child_id),))


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngStream``, a numpy ``Generator`` or an int seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator()


def discounted_cumulative_cost(costs: Sequence[float], gamma: float) -> float:
    """Sum of ``gamma**t * costs[t]``, accumulated in order."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("invalid discount")
    costs = list(costs)
    if not costs:
        raise ValueError("empty cost trace")
    total = 0.0
    w = 1.0
    for c in costs:
        total += w * float(c)
        w *= gamma
    return total


def discounted_partial_sums(costs: Sequence[float], gamma: float) -> np.ndarray:
    """Running values of the discounted cumulative cost, one per prefix."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("invalid discount")
    out = np.empty(len(costs))
    total = 0.0
    w = 1.0
    for t, c in enumerate(costs):
        total += w * float(c)
        w *= gamma
        out[t] = total
    return out
