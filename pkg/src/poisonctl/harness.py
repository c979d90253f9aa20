"""Episode runner: environment -> attacker -> victim, with per-step traces."""

from __future__ import annotations

import csv
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .attackers import (
    POLICY_KINDS,
    AttackPolicy,
    ClairvoyantPolicy,
    GreedyPolicy,
    NlpMpcPolicy,
    NullPolicy,
)
from .core import ControlState, DataPoint, RngStream
from .costs import CostSpec, running_cost
from .datastream import EmpiricalBuffer, env_sample_arrays
from .trajopt import TrajOptConfig
from .victims import VictimSpec, victim_update

log = logging.getLogger(__name__)

# fork ids under an episode's root stream
_RNG_INIT, _RNG_STREAM, _RNG_PRE_ATTACK, _RNG_PLANNER = 0, 1, 2, 3


class EpisodeError(RuntimeError):
    def __init__(self, step: int, cause: BaseException):
        super().__init__(f"step {step}: {cause}")
        self.step = step


@dataclass(frozen=True)
class EpisodeConfig:
    """One attacked training run.

    ``theta0`` / ``cost.reference`` left as ``None`` are drawn from a standard
    Gaussian keyed by ``seed``, identically for every policy.
    """

    victim: VictimSpec
    cost: CostSpec
    env: object
    policy: str = "null"
    T: int = 500
    gamma: float = 0.99
    planner: TrajOptConfig = field(default_factory=TrajOptConfig)
    theta0: Optional[np.ndarray] = None
    seed: int = 0
    pre_attack_n: int = 0
    clairvoyant_iter_scale: Optional[float] = None

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("invalid discount")
        if self.policy not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.pre_attack_n < 0:
            raise ValueError("pre_attack_n must be >= 0")
        if self.env.dim != self.victim.d:
            raise ValueError("environment and victim dimensions differ")

    def resolved(self) -> "EpisodeConfig":
        """Fill in random theta0 / target and sync the planner discount."""
        init = RngStream(self.seed).fork(_RNG_INIT)
        shape = self.victim.model_shape
        theta0 = self.theta0
        if theta0 is None:
            theta0 = init.fork(0).generator().standard_normal(shape)
        cost = self.cost
        if cost.nefarious != "backdoor" and cost.reference is None:
            cost = replace(cost, reference=init.fork(1).generator().standard_normal(shape))
        return replace(self, theta0=np.asarray(theta0, dtype=np.float64).reshape(shape), cost=cost,
                       planner=replace(self.planner, gamma=self.gamma))


@dataclass
class EpisodeTrace:
    policy: str
    seed: int
    gamma: float
    thetas: np.ndarray  # (T + 1, *model_shape)
    clean: np.ndarray  # (T, d)
    actions: np.ndarray  # (T, d)
    labels: Optional[np.ndarray]
    costs: np.ndarray  # (T,)
    jtilde: np.ndarray  # (T,)
    target: Optional[np.ndarray] = None
    wall_seconds: float = 0.0

    @property
    def T(self) -> int:
        return len(self.costs)

    @property
    def perturb_norms(self) -> np.ndarray:
        return np.linalg.norm(self.actions - self.clean, axis=1)

    def point(self, t: int, attacked: bool = True) -> DataPoint:
        X = self.actions if attacked else self.clean
        return DataPoint(X[t], None if self.labels is None else self.labels[t])

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        T, d = self.clean.shape
        flat = self.thetas[:T].reshape(T, -1)
        head = (["t", "g", "Jtilde", "perturb_norm"]
                + [f"theta{i}" for i in range(flat.shape[1])]
                + [f"z{i}" for i in range(d)] + [f"a{i}" for i in range(d)])
        norms = self.perturb_norms
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for t in range(T):
                row = [t, repr(float(self.costs[t])), repr(float(self.jtilde[t])), repr(float(norms[t]))]
                row += [repr(float(v)) for v in flat[t]]
                row += [repr(float(v)) for v in self.clean[t]]
                row += [repr(float(v)) for v in self.actions[t]]
                w.writerow(row)


def episode_stream(config: EpisodeConfig):
    """The clean stream z_0..z_{T-1} every policy on this seed sees.

    Labels are dropped for unsupervised victims.
    """
    X, y = env_sample_arrays(config.env, RngStream(config.seed).fork(_RNG_STREAM), config.T)
    return X, (y if config.victim.supervised else None)


def pre_attack_points(config: EpisodeConfig) -> List[DataPoint]:
    if config.pre_attack_n == 0:
        return []
    X, y = env_sample_arrays(config.env, RngStream(config.seed).fork(_RNG_PRE_ATTACK), config.pre_attack_n)
    if not config.victim.supervised:
        y = None
    return [DataPoint(X[i], None if y is None else y[i]) for i in range(len(X))]


def make_policy(config: EpisodeConfig, stream: Sequence[DataPoint]) -> AttackPolicy:
    """Build the policy for an already resolved config."""
    kind = config.policy
    if kind == "null":
        return NullPolicy()
    if kind == "greedy":
        return GreedyPolicy(config.victim, config.cost, config.planner)
    if kind == "nlp":
        labelled = config.victim.supervised
        buf = EmpiricalBuffer(config.victim.d, labelled, pre_attack_points(config))
        return NlpMpcPolicy(config.victim, config.cost, config.planner, buf)
    return ClairvoyantPolicy(config.victim, config.cost, config.theta0, stream, config.planner,
                             T=config.T, iter_scale=config.clairvoyant_iter_scale)


def run_episode(config: EpisodeConfig) -> EpisodeTrace:
    start = time.perf_counter()
    config = config.resolved()
    victim, cost, T = config.victim, config.cost, config.T
    Z, Y = episode_stream(config)
    if victim.supervised and Y is None:
        raise ValueError("supervised victim needs a labelled environment")
    stream = [DataPoint(Z[t], None if Y is None else Y[t]) for t in range(T)]
    try:
        policy = make_policy(config, stream)
    except Exception as exc:
        raise EpisodeError(0, exc) from exc
    planner_rng = RngStream(config.seed).fork(_RNG_PLANNER)

    thetas = np.empty((T + 1,) + victim.model_shape)
    thetas[0] = config.theta0
    A = np.empty_like(Z)
    g = np.empty(T)
    theta = thetas[0]
    for t in range(T):
        try:
            z = stream[t]
            if isinstance(policy, NlpMpcPolicy):
                # the attacker sees z_t before perturbing it
                policy.observe(z)
            a = policy.act(ControlState(theta, z, t), planner_rng.fork(t))
            if a.label != z.label:
                raise ValueError("label perturbation disabled")
            g[t] = running_cost(cost, victim, theta, z, a)
            theta = victim_update(victim, theta, a)
            if not np.all(np.isfinite(theta)) or not np.isfinite(g[t]):
                raise FloatingPointError("non-finite model or cost")
        except EpisodeError:
            raise
        except Exception as exc:
            raise EpisodeError(t, exc) from exc
        A[t] = a.features
        thetas[t + 1] = theta
        if t % 100 == 0:
            log.debug("%s seed=%d t=%d g=%.4f", config.policy, config.seed, t, g[t])
    weights = config.gamma ** np.arange(T)
    jtilde = np.cumsum(weights * g)
    return EpisodeTrace(
        policy=config.policy, seed=config.seed, gamma=config.gamma, thetas=thetas, clean=Z,
        actions=A, labels=Y, costs=g, jtilde=jtilde, target=cost.reference,
        wall_seconds=time.perf_counter() - start,
    )


def replay_thetas(victim: VictimSpec, theta0, actions: np.ndarray, labels=None) -> np.ndarray:
    """Re-run the victim on recorded actions."""
    out = np.empty((len(actions) + 1,) + victim.model_shape)
    out[0] = theta0
    for t in range(len(actions)):
        a = DataPoint(actions[t], None if labels is None else labels[t])
        out[t + 1] = victim_update(victim, out[t], a)
    return out


@dataclass
class EpisodeSummary:
    policy: str
    seed: int
    T: int
    jtilde_T: float
    wall_seconds: float
    trace: Optional[EpisodeTrace] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_one(config: EpisodeConfig) -> EpisodeSummary:
    try:
        tr = run_episode(config)
    except Exception as exc:
        log.error("episode %s/seed=%d failed: %s", config.policy, config.seed, exc)
        return EpisodeSummary(config.policy, config.seed, config.T, float("nan"), 0.0,
                              error="".join(traceback.format_exception_only(type(exc), exc)).strip())
    return EpisodeSummary(tr.policy, tr.seed, tr.T, float(tr.jtilde[-1]), tr.wall_seconds, trace=tr)


def run_suite(configs: Sequence[EpisodeConfig], parallelism: int = 1) -> List[EpisodeSummary]:
    """Run independent episodes; results come back in input order.

    Failures are captured per episode in ``EpisodeSummary.error``.
    """
    configs = list(configs)
    if not configs:
        return []
    if parallelism <= 1 or len(configs) == 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(configs))) as pool:
        return list(pool.map(_run_one, configs))


def write_summary_csv(path, summaries: Sequence[EpisodeSummary], record_timing: bool = False):
    """``policy, seed, T, Jtilde_T, wall_seconds``; timing left blank unless requested."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "seed", "T", "Jtilde_T", "wall_seconds"])
        for s in summaries:
            wall = f"{s.wall_seconds:.3f}" if record_timing else ""
            w.writerow([s.policy, s.seed, s.T, repr(s.jtilde_T), wall])
