"""Tabular MDPs for checking the model-error suboptimality bounds numerically.

``verify_prop1`` plans on a perturbed transition model and measures the value
lost on the true model; ``verify_thm2`` measures how often the empirical
multinomial lands within the L1 concentration radius.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .core import RngStream, as_generator


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with transition tensor ``P[s, a, s']`` and costs ``g[s, a]``."""

    P: np.ndarray
    g: np.ndarray
    gamma: float
    mu0: Optional[np.ndarray] = None
    c_max: float = 1.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        g = np.asarray(self.g, dtype=np.float64)
        S, A = g.shape
        if P.shape != (S, A, S):
            raise ValueError(f"transition tensor must be ({S}, {A}, {S}), got {P.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be probability vectors")
        if np.any(g < 0) or np.any(g > self.c_max):
            raise ValueError("costs must lie in [0, c_max]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("invalid discount")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "g", g)
        mu0 = np.full(S, 1.0 / S) if self.mu0 is None else np.asarray(self.mu0, dtype=np.float64)
        object.__setattr__(self, "mu0", mu0)

    @property
    def n_states(self) -> int:
        return self.g.shape[0]

    @property
    def n_actions(self) -> int:
        return self.g.shape[1]

    def objective(self, V: np.ndarray) -> float:
        return float(self.mu0 @ V)


def value_iteration(mdp: TabularMDP, tol: float = 1e-10, max_iters: int = 1_000_000,
                    return_residuals: bool = False):
    """Iterate the Bellman optimality operator (costs are minimised).

    Stops once the sup-norm change between sweeps is at most
    ``tol * (1 - gamma) / gamma``, which bounds the fixed-point error by ``tol``.

    Returns ``(V, policy)``, or ``(V, policy, residuals)`` when requested.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    gamma = mdp.gamma
    V = np.zeros(mdp.n_states)
    stop = tol * (1.0 - gamma) / gamma
    residuals = []
    for _ in range(max_iters):
        Q = mdp.g + gamma * mdp.P @ V
        V_new = Q.min(axis=1)
        res = float(np.max(np.abs(V_new - V)))
        residuals.append(res)
        V = V_new
        if res <= stop:
            break
    Q = mdp.g + gamma * mdp.P @ V
    policy = Q.argmin(axis=1)
    V = Q.min(axis=1)
    if return_residuals:
        return V, policy, residuals
    return V, policy


def policy_evaluation(mdp: TabularMDP, policy, tol: float = 1e-10) -> np.ndarray:
    """Value of a deterministic policy, by solving ``(I - gamma P_pi) V = g_pi``.

    The direct solve is exact up to rounding; ``tol`` only guards the check.
    """
    policy = np.asarray(policy, dtype=int)
    S = mdp.n_states
    idx = np.arange(S)
    P_pi = mdp.P[idx, policy]
    g_pi = mdp.g[idx, policy]
    V = np.linalg.solve(np.eye(S) - mdp.gamma * P_pi, g_pi)
    resid = np.max(np.abs(g_pi + mdp.gamma * P_pi @ V - V))
    if resid > max(tol, 1e-9):
        raise ArithmeticError(f"policy evaluation residual {resid:.3g} exceeds tolerance")
    return V


def l1_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions have different supports")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("inputs must be probability vectors")
    return float(np.abs(p - q).sum())


def simulation_bound(gamma: float, c_max: float, eps: float) -> float:
    """Worst-case value lost by planning on a model whose transitions are eps-off in L1."""
    return gamma * c_max * eps / (1.0 - gamma) ** 2


def l1_concentration_radius(N: int, n: int, delta: float) -> float:
    """Radius r with P(||P_hat - P||_1 > r) <= delta for n draws over N outcomes."""
    return 2.0 * math.sqrt(((N + 1) * math.log(2.0) - math.log(delta)) / (2.0 * n))


# ------------------------------------------------------------ random instances


def attack_structured_pair(n_theta: int, n_z: int, n_actions: int, gamma: float, rng,
                           perturbation: float = 0.5, c_max: float = 1.0):
    """Two MDPs differing only in the distribution of the incoming point.

    States are pairs ``(theta, z)``; the model part moves deterministically via a
    random table ``F[theta, a]`` while the next ``z`` is drawn from ``P`` (true)
    or ``P_hat`` (planning model) regardless of state and action.

    Returns ``(true_mdp, model_mdp, eps)`` with ``eps = ||P_hat - P||_1``.
    """
    gen = as_generator(rng)
    S = n_theta * n_z
    F = gen.integers(0, n_theta, size=(n_theta, n_actions))
    g = gen.uniform(0.0, c_max, size=(S, n_actions))
    p = gen.dirichlet(np.ones(n_z))
    mix = gen.uniform(0.0, perturbation)
    p_hat = (1.0 - mix) * p + mix * gen.dirichlet(np.ones(n_z))

    def build(dist):
        P = np.zeros((S, n_actions, S))
        for th in range(n_theta):
            for z in range(n_z):
                s = th * n_z + z
                for a in range(n_actions):
                    P[s, a, F[th, a] * n_z: (F[th, a] + 1) * n_z] = dist
        return TabularMDP(P, g, gamma, c_max=c_max)

    return build(p), build(p_hat), l1_distance(p, p_hat)


def random_mdp_pair(n_states: int, n_actions: int, gamma: float, rng,
                    perturbation: float = 0.5, c_max: float = 1.0):
    """Unstructured pair: every transition row perturbed independently.

    ``eps`` is the largest row-wise L1 difference.
    """
    gen = as_generator(rng)
    g = gen.uniform(0.0, c_max, size=(n_states, n_actions))
    P = gen.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    mix = gen.uniform(0.0, perturbation)
    Q = (1.0 - mix) * P + mix * gen.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    Q /= Q.sum(axis=2, keepdims=True)
    eps = float(np.abs(P - Q).sum(axis=2).max())
    return TabularMDP(P, g, gamma, c_max=c_max), TabularMDP(Q, g, gamma, c_max=c_max), eps


# ------------------------------------------------------------ reports


@dataclass
class Prop1Trial:
    trial: int
    epsilon: float
    gap: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.gap / self.bound if self.bound > 0 else 0.0


@dataclass
class Prop1Report:
    trials: List[Prop1Trial] = field(default_factory=list)
    slack: float = 1e-8

    @property
    def violations(self) -> int:
        return sum(t.gap > t.bound + self.slack for t in self.trials)

    @property
    def max_ratio(self) -> float:
        return max((t.ratio for t in self.trials), default=0.0)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_csv(self, path):
        _write(path, ["trial", "epsilon", "gap", "bound", "ratio"],
               [[t.trial, repr(t.epsilon), repr(t.gap), repr(t.bound), repr(t.ratio)] for t in self.trials])


def optimality_gap(true_mdp: TabularMDP, model_mdp: TabularMDP, tol: float = 1e-10) -> float:
    """sup_s of the value lost on ``true_mdp`` by acting optimally for ``model_mdp``."""
    _, pi_model = value_iteration(model_mdp, tol)
    _, pi_true = value_iteration(true_mdp, tol)
    V_model_pi = policy_evaluation(true_mdp, pi_model, tol)
    V_opt = policy_evaluation(true_mdp, pi_true, tol)
    return float(np.max(V_model_pi - V_opt))


def verify_prop1(trials: int = 500, rng=0, max_states: int = 10, max_actions: int = 10,
                 gammas: Sequence[float] = (0.5, 0.9), structured: bool = True,
                 tol: float = 1e-10, slack: float = 1e-8) -> Prop1Report:
    """Check gap <= gamma * C_max * eps / (1 - gamma)**2 on random MDP pairs.

    With ``structured`` the pairs follow the attack MDP (deterministic model
    update, i.i.d. incoming point); otherwise transitions are arbitrary.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    root = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    report = Prop1Report(slack=slack)
    for i in range(trials):
        gen = root.fork(i).generator()
        gamma = float(gammas[i % len(gammas)])
        if structured:
            n_theta = int(gen.integers(1, max_states // 2 + 1))
            n_z = int(gen.integers(2, max_states // n_theta + 1))
            n_a = int(gen.integers(1, max_actions + 1))
            true_mdp, model_mdp, eps = attack_structured_pair(n_theta, n_z, n_a, gamma, gen)
        else:
            n_s = int(gen.integers(1, max_states + 1))
            n_a = int(gen.integers(1, max_actions + 1))
            true_mdp, model_mdp, eps = random_mdp_pair(n_s, n_a, gamma, gen)
        gap = optimality_gap(true_mdp, model_mdp, tol)
        report.trials.append(Prop1Trial(i, eps, gap, simulation_bound(gamma, true_mdp.c_max, eps)))
    return report


@dataclass
class Thm2Report:
    N: int
    n: int
    delta: float
    bound: float
    l1: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.l1 <= self.bound

    @property
    def coverage(self) -> float:
        return float(self.covered.mean())

    @property
    def passed(self) -> bool:
        return self.coverage >= 1.0 - self.delta

    def to_csv(self, path):
        cov = self.covered
        _write(path, ["trial", "l1", "bound", "covered"],
               [[i, repr(float(v)), repr(self.bound), int(cov[i])] for i, v in enumerate(self.l1)])


def verify_thm2(N: int, n: int, delta: float = 0.05, trials: int = 10_000, rng=0) -> Thm2Report:
    """Empirical coverage of the multinomial L1 concentration radius.

    Each trial draws a fresh distribution from a flat Dirichlet, samples ``n``
    outcomes and records ``||P_hat - P||_1``.
    """
    if N < 2 or n < 1 or not 0.0 < delta < 1.0 or trials < 1:
        raise ValueError("need N >= 2, n >= 1, delta in (0, 1), trials >= 1")
    gen = as_generator(rng)
    P = gen.dirichlet(np.ones(N), size=trials)
    counts = np.stack([gen.multinomial(n, p) for p in P])
    l1 = np.abs(counts / n - P).sum(axis=1)
    return Thm2Report(N, n, delta, l1_concentration_radius(N, n, delta), l1)


def _write(path, head, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        w.writerows(rows)
