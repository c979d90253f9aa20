"""Attack policies: null, greedy, receding-horizon NLP (MPC) and clairvoyant.

Every policy exposes ``act(state, rng) -> DataPoint``. Actions only ever
change features; the clean label is carried over.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from .core import ControlState, DataPoint, as_generator
from .costs import CostSpec
from .datastream import EmpiricalBuffer
from .trajopt import TrajOptConfig, optimize_trajectory, stack_points
from .victims import VictimSpec

POLICY_KINDS = ("null", "greedy", "nlp", "clairvoyant")


def act_null(state: ControlState) -> DataPoint:
    return state.incoming


def act_greedy(state: ControlState, victim: VictimSpec, cost: CostSpec, opt: TrajOptConfig) -> DataPoint:
    """Minimise the current step's running cost only."""
    if opt.horizon != 1:
        opt = replace(opt, horizon=1)
    z = state.incoming
    labels = None if z.label is None else np.array([z.label])
    res = optimize_trajectory(victim, cost, state.model, z.features[None], opt, labels=labels)
    return z.with_features(res.actions[0])


def plan_futures(z: DataPoint, buffer: EmpiricalBuffer, horizon: int, n_trajectories: int, rng):
    """Futures for one MPC solve: ``z`` pinned first, the rest drawn from the buffer.

    Returns ``(features (m, h, d), labels (m, h) or None)``.
    """
    m, h, d = n_trajectories, horizon, z.dim
    Z = np.empty((m, h, d))
    Y = None if z.label is None else np.empty((m, h))
    gen = as_generator(rng)
    for s in range(m):
        Z[s, 0] = z.features
        if Y is not None:
            Y[s, 0] = z.label
        if h > 1:
            X, y = buffer.sample_arrays(h - 1, gen)
            Z[s, 1:] = X
            if Y is not None:
                Y[s, 1:] = y
    return Z, Y


def act_nlp_mpc(state: ControlState, victim: VictimSpec, cost: CostSpec, opt: TrajOptConfig,
                buffer: EmpiricalBuffer, rng) -> DataPoint:
    """Solve the sampled h-step program and return its first action."""
    if len(buffer) == 0 and opt.horizon > 1:
        raise ValueError("no data observed")
    z = state.incoming
    Z, Y = plan_futures(z, buffer, opt.horizon, opt.n_trajectories, rng)
    res = optimize_trajectory(victim, cost, state.model, Z, opt, labels=Y)
    return z.with_features(res.actions[0])


def clairvoyant_config(opt: TrajOptConfig, T: int, iter_scale: Optional[float] = None) -> TrajOptConfig:
    """Full-horizon solver settings: the MPC budget scaled by T / h by default."""
    scale = math.ceil(T / opt.horizon) if iter_scale is None else iter_scale
    return replace(opt, horizon=T, max_iters=int(round(opt.max_iters * scale)))


def act_clairvoyant_precompute(victim: VictimSpec, cost: CostSpec, theta0, full_stream,
                               opt: TrajOptConfig, labels=None) -> List[DataPoint]:
    """Solve the whole-episode program once, knowing every future point.

    ``opt`` is used as given (its horizon is forced to the stream length);
    use :func:`clairvoyant_config` to derive the scaled budget.
    """
    if len(full_stream) and isinstance(full_stream[0], DataPoint):
        Z, labels = stack_points(full_stream)
    else:
        Z = np.asarray(full_stream, dtype=np.float64)
    T = Z.shape[0]
    if opt.horizon != T:
        opt = replace(opt, horizon=T)
    res = optimize_trajectory(victim, cost, theta0, Z, opt, labels=labels)
    return [DataPoint(res.actions[t], None if labels is None else labels[t]) for t in range(T)]


class AttackPolicy:
    """Base policy; ``null`` behaviour."""

    kind = "null"

    def act(self, state: ControlState, rng=None) -> DataPoint:
        return act_null(state)


class NullPolicy(AttackPolicy):
    pass


class GreedyPolicy(AttackPolicy):
    kind = "greedy"

    def __init__(self, victim: VictimSpec, cost: CostSpec, opt: TrajOptConfig):
        self.victim, self.cost = victim, cost
        self.opt = replace(opt, horizon=1)

    def act(self, state, rng=None):
        return act_greedy(state, self.victim, self.cost, self.opt)


class NlpMpcPolicy(AttackPolicy):
    """Receding-horizon planner over the attacker's empirical buffer.

    The buffer is owned by the policy; the episode runner feeds each observed
    point through :meth:`observe` before asking for an action.
    """

    kind = "nlp"

    def __init__(self, victim: VictimSpec, cost: CostSpec, opt: TrajOptConfig, buffer: EmpiricalBuffer):
        self.victim, self.cost, self.opt, self.buffer = victim, cost, opt, buffer

    def observe(self, z: DataPoint):
        self.buffer.push(z)

    def act(self, state, rng=None):
        return act_nlp_mpc(state, self.victim, self.cost, self.opt, self.buffer, rng)


class ClairvoyantPolicy(AttackPolicy):
    kind = "clairvoyant"

    def __init__(self, victim: VictimSpec, cost: CostSpec, theta0, full_stream: Sequence[DataPoint],
                 opt: TrajOptConfig, T: Optional[int] = None, iter_scale: Optional[float] = None):
        T = len(full_stream) if T is None else T
        if len(full_stream) < T:
            raise ValueError("clairvoyant stream shorter than the episode")
        self.stream = list(full_stream[:T])
        self.actions = act_clairvoyant_precompute(
            victim, cost, theta0, self.stream, clairvoyant_config(opt, T, iter_scale)
        )

    def act(self, state, rng=None):
        if state.incoming != self.stream[state.step]:
            raise ValueError(f"step {state.step}: stream differs from the one planned for")
        return self.actions[state.step]
