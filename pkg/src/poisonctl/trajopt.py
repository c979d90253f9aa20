"""Finite-horizon attack planning by first-order trajectory optimization.

The planner minimises

    sum_{tau < h} gamma**tau * g(theta_tau, z_tau, a_tau),  theta_{tau+1} = f(theta_tau, a_tau)

over the action features ``a_0 .. a_{h-1}`` with Adam, starting from the
zero-perturbation point ``a = z``. Gradients come from a single reverse sweep
through the victim dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from .core import DataPoint
from .costs import CostSpec, running_cost_kernel
from .victims import VictimSpec, vjp_kernel

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrajOptConfig:
    horizon: int = 1
    max_iters: int = 2000
    step_size: float = 0.05
    gamma: float = 0.99
    convergence_tol: float = 1e-6
    n_trajectories: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.step_size > 0 or not self.convergence_tol > 0:
            raise ValueError("step_size and convergence_tol must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("invalid discount")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")


@dataclass(frozen=True)
class TrajOptResult:
    actions: np.ndarray  # (h, d) best action features found
    objective: float
    initial_objective: float
    iterations_used: int


class TrajOptDiverged(RuntimeError):
    """Raised when the objective turns non-finite; keeps the last finite iterate."""

    def __init__(self, message, actions):
        super().__init__(message)
        self.actions = actions


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def rollout_kernel(kind, eta, code, ref, tx, ty, lam, gamma, theta0, Z, A, Y, grad, want_grad):
    h, d = A.shape
    k = theta0.shape[0]
    thetas = np.empty((h + 1, k, d))
    gnef = np.empty((h, k, d))
    thetas[0] = theta0
    obj = 0.0
    w = 1.0
    for t in range(h):
        obj += w * running_cost_kernel(kind, eta, code, ref, tx, ty, lam,
                                       thetas[t], Z[t], A[t], Y[t], thetas[t + 1], gnef[t])
        w *= gamma
    if not want_grad:
        return obj
    carry = np.zeros((k, d))
    v = np.empty((k, d))
    g_theta = np.empty((k, d))
    g_a = np.empty(d)
    # reverse sweep; w currently holds gamma**h
    for t in range(h - 1, -1, -1):
        w /= gamma
        for j in range(k):
            for i in range(d):
                v[j, i] = w * lam * gnef[t, j, i] + carry[j, i]
        vjp_kernel(kind, eta, thetas[t], A[t], Y[t], v, g_theta, g_a)
        for i in range(d):
            grad[t, i] = g_a[i] + w * 2.0 * (A[t, i] - Z[t, i])
        carry[:, :] = g_theta
    return obj


@numba.njit(cache=True)
def _averaged(kind, eta, code, ref, tx, ty, lam, gamma, theta0, Zs, A, Ys, grad, tmp):
    m = Zs.shape[0]
    obj = 0.0
    grad[:, :] = 0.0
    for s in range(m):
        obj += rollout_kernel(kind, eta, code, ref, tx, ty, lam, gamma, theta0, Zs[s], A, Ys[s], tmp, True)
        grad += tmp
    if m > 1:
        obj /= m
        grad /= m
    return obj


@numba.njit(cache=True)
def adam_kernel(kind, eta, code, ref, tx, ty, lam, gamma, theta0, Zs, Ys,
                lr, max_iters, tol, best_A):
    """Returns (best objective, initial objective, iterations, diverged flag)."""
    h, d = Zs.shape[1], Zs.shape[2]
    A = Zs[0].copy()
    best_A[:, :] = A
    grad = np.empty((h, d))
    tmp = np.empty((h, d))
    mom = np.zeros((h, d))
    vel = np.zeros((h, d))
    best = np.inf
    init = np.nan
    b1t = 1.0
    b2t = 1.0
    it = 0
    while True:
        obj = _averaged(kind, eta, code, ref, tx, ty, lam, gamma, theta0, Zs, A, Ys, grad, tmp)
        gmax = 0.0
        finite = math.isfinite(obj)
        for t in range(h):
            for i in range(d):
                g = abs(grad[t, i])
                if not math.isfinite(g):
                    finite = False
                elif g > gmax:
                    gmax = g
        if it == 0:
            init = obj
        if not finite:
            return best, init, it, True
        if obj < best:
            best = obj
            best_A[:, :] = A
        if gmax <= tol or it >= max_iters:
            return best, init, it, False
        it += 1
        b1t *= ADAM_BETA1
        b2t *= ADAM_BETA2
        for t in range(h):
            for i in range(d):
                g = grad[t, i]
                mom[t, i] = ADAM_BETA1 * mom[t, i] + (1.0 - ADAM_BETA1) * g
                vel[t, i] = ADAM_BETA2 * vel[t, i] + (1.0 - ADAM_BETA2) * g * g
                mhat = mom[t, i] / (1.0 - b1t)
                vhat = vel[t, i] / (1.0 - b2t)
                A[t, i] -= lr * mhat / (math.sqrt(vhat) + ADAM_EPS)


# ------------------------------------------------------------ public API


def stack_points(points: Sequence[DataPoint]):
    """Stack data points into a feature matrix and a label vector (or None)."""
    if len(points) == 0:
        raise ValueError("no points to stack")
    X = np.stack([p.features for p in points])
    labels = [p.label for p in points]
    if all(lab is None for lab in labels):
        return X, None
    if any(lab is None for lab in labels):
        raise ValueError("mixed labelled and unlabelled points")
    return X, np.array(labels, dtype=np.float64)


def _as_arrays(futures, actions, labels):
    if len(futures) and isinstance(futures[0], DataPoint):
        Z, flabels = stack_points(futures)
        labels = flabels if labels is None else labels
    else:
        Z = np.asarray(futures, dtype=np.float64)
    if actions is None:
        A = Z.copy()
    elif len(actions) and isinstance(actions[0], DataPoint):
        A, alabels = stack_points(actions)
        if alabels is not None and (labels is None or not np.array_equal(alabels, labels)):
            raise ValueError("label perturbation disabled")
    else:
        A = np.asarray(actions, dtype=np.float64)
    if Z.ndim != 2 or A.shape != Z.shape:
        raise ValueError(f"futures {Z.shape} and actions {A.shape} must both be (h, d)")
    return np.ascontiguousarray(Z), np.ascontiguousarray(A), labels


def _kernel_setup(victim: VictimSpec, cost: CostSpec, theta0, Z, labels):
    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.shape != victim.model_shape:
        raise ValueError(f"theta0 shape {theta0.shape} does not match victim {victim.model_shape}")
    if Z.shape[-1] != victim.d:
        raise ValueError("feature dimension does not match the victim")
    if victim.supervised:
        if labels is None:
            raise ValueError("unlabeled point for supervised victim")
        Y = np.asarray(labels, dtype=np.float64)
    else:
        Y = np.zeros(Z.shape[:-1]) if labels is None else np.asarray(labels, dtype=np.float64)
    if Y.shape != Z.shape[:-1]:
        raise ValueError("labels do not match the futures")
    code, ref, tx, ty = cost.kernel_args(victim)
    t2 = np.ascontiguousarray(theta0.reshape(victim.k, victim.d))
    return (victim.code, float(victim.eta), code, ref, tx, ty, float(cost.lam)), t2, np.ascontiguousarray(Y)


def rollout_objective(victim: VictimSpec, cost: CostSpec, theta0, futures, actions, gamma: float,
                      labels: Optional[np.ndarray] = None) -> float:
    """Discounted running cost of applying ``actions`` against ``futures``.

    ``futures``/``actions`` are ``(h, d)`` arrays or lists of DataPoints; for a
    supervised victim the (shared) labels come from the futures or ``labels``.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("invalid discount")
    Z, A, labels = _as_arrays(futures, actions, labels)
    args, t2, Y = _kernel_setup(victim, cost, theta0, Z, labels)
    grad = np.empty_like(A)
    return float(rollout_kernel(*args, float(gamma), t2, Z, A, Y, grad, False))


def rollout_gradient(victim: VictimSpec, cost: CostSpec, theta0, futures, actions, gamma: float,
                     labels: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of :func:`rollout_objective` w.r.t. every action, shape ``(h, d)``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("invalid discount")
    Z, A, labels = _as_arrays(futures, actions, labels)
    args, t2, Y = _kernel_setup(victim, cost, theta0, Z, labels)
    grad = np.empty_like(A)
    rollout_kernel(*args, float(gamma), t2, Z, A, Y, grad, True)
    return grad


def optimize_trajectory(victim: VictimSpec, cost: CostSpec, theta0, futures,
                        config: TrajOptConfig, labels: Optional[np.ndarray] = None) -> TrajOptResult:
    """Plan actions for ``futures`` starting from zero perturbation.

    ``futures`` may also be an ``(m, h, d)`` stack of sampled trajectories
    (with ``(m, h)`` labels); the objective is then their average and the
    initial actions are the first trajectory.
    """
    if len(futures) and isinstance(futures[0], DataPoint):
        Z, flabels = stack_points(futures)
        labels = flabels if labels is None else labels
    else:
        Z = np.asarray(futures, dtype=np.float64)
    if Z.ndim == 2:
        Z = Z[None]
        if labels is not None:
            labels = np.asarray(labels, dtype=np.float64)[None]
    if Z.ndim != 3:
        raise ValueError("futures must be (h, d) or (m, h, d)")
    Z = np.ascontiguousarray(Z)
    args, t2, Y = _kernel_setup(victim, cost, theta0, Z, labels)
    best_A = np.empty(Z.shape[1:])
    best, init, iters, diverged = adam_kernel(
        *args, float(config.gamma), t2, Z, Y,
        float(config.step_size), int(config.max_iters), float(config.convergence_tol), best_A,
    )
    if diverged:
        raise TrajOptDiverged(f"diverged after {iters} iterations", best_A)
    return TrajOptResult(best_A, float(best), float(init), int(iters))
