"""Attacker running cost: weighted nefarious cost plus squared perturbation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .core import DataPoint
from .victims import VictimSpec, step_kernel, vjp_kernel

NEF_COSINE = 0
NEF_SQDIST = 1
NEF_AVERSION = 2
NEF_BACKDOOR = 3


@dataclass(frozen=True)
class CostSpec:
    """Running-cost parameters.

    ``nefarious`` is one of ``"targeted"``, ``"aversion"``, ``"backdoor"``.
    Targeted attacks measure closeness to ``reference`` with ``metric``
    (``"cosine"`` or ``"squared"``); aversion pushes away from ``reference``;
    backdoor uses ``trigger`` as the special labelled example.
    """

    lam: float
    nefarious: str = "targeted"
    metric: str = "squared"
    reference: Optional[np.ndarray] = None
    trigger: Optional[DataPoint] = None
    perturb_labels: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.nefarious not in ("targeted", "aversion", "backdoor"):
            raise ValueError(f"unknown nefarious cost {self.nefarious!r}")
        if self.metric not in ("cosine", "squared"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.perturb_labels:
            raise ValueError("label perturbation disabled")
        if self.nefarious == "backdoor":
            if self.trigger is None or self.trigger.label is None:
                raise ValueError("backdoor cost needs a labelled trigger point")
        if self.reference is not None:
            ref = np.array(self.reference, dtype=np.float64)
            ref.flags.writeable = False
            object.__setattr__(self, "reference", ref)

    @property
    def code(self) -> int:
        if self.nefarious == "targeted":
            return NEF_COSINE if self.metric == "cosine" else NEF_SQDIST
        return NEF_AVERSION if self.nefarious == "aversion" else NEF_BACKDOOR

    def kernel_args(self, victim: VictimSpec):
        """Validate against ``victim`` and return arrays for the numba kernels."""
        code = self.code
        if code in (NEF_COSINE, NEF_BACKDOOR) and victim.kind != "logreg":
            raise ValueError(f"{self.nefarious}/{self.metric} cost requires a logistic-regression victim")
        if code == NEF_BACKDOOR:
            ref = np.zeros((victim.k, victim.d))
            if self.trigger.dim != victim.d:
                raise ValueError("trigger dimension does not match the victim")
            tx, ty = np.asarray(self.trigger.features), float(self.trigger.label)
        else:
            if self.reference is None:
                raise ValueError(f"{self.nefarious} cost needs a reference model")
            if self.reference.shape != victim.model_shape:
                raise ValueError(
                    f"reference shape {self.reference.shape} does not match model {victim.model_shape}"
                )
            ref = self.reference.reshape(victim.k, victim.d)
            tx, ty = np.zeros(victim.d), 0.0
        return code, np.ascontiguousarray(ref), np.ascontiguousarray(tx), ty


@numba.njit(cache=True)
def nef_kernel(code, theta, ref, tx, ty, grad):
    """Return g_nef(theta) and write its gradient into ``grad``."""
    k, d = theta.shape
    if code == NEF_COSINE:
        dot = 0.0
        nt = 0.0
        nr = 0.0
        for i in range(d):
            dot += theta[0, i] * ref[0, i]
            nt += theta[0, i] * theta[0, i]
            nr += ref[0, i] * ref[0, i]
        nt = math.sqrt(nt)
        nr = math.sqrt(nr)
        c = dot / (nt * nr)
        for i in range(d):
            grad[0, i] = -(ref[0, i] / (nt * nr) - c * theta[0, i] / (nt * nt))
        return -c
    if code == NEF_BACKDOOR:
        m = 0.0
        for i in range(d):
            m += theta[0, i] * tx[i]
        m *= ty
        # log(1 + exp(-m)) without overflow
        if m > 0:
            val = math.log1p(math.exp(-m))
            s = math.exp(-m) / (1.0 + math.exp(-m))
        else:
            val = -m + math.log1p(math.exp(m))
            s = 1.0 / (1.0 + math.exp(m))
        for i in range(d):
            grad[0, i] = -ty * tx[i] * s
        return val
    sign = 1.0 if code == NEF_SQDIST else -1.0
    val = 0.0
    for j in range(k):
        for i in range(d):
            u = theta[j, i] - ref[j, i]
            val += u * u
            grad[j, i] = sign * 2.0 * u
    return sign * val


@numba.njit(cache=True)
def running_cost_kernel(kind, eta, code, ref, tx, ty, lam, theta, z, a, y, theta_next, grad_nef):
    """g = lam * g_nef(f(theta, a)) + ||a - z||^2; fills ``theta_next``/``grad_nef``."""
    step_kernel(kind, eta, theta, a, y, theta_next)
    nef = nef_kernel(code, theta_next, ref, tx, ty, grad_nef)
    per = 0.0
    for i in range(a.shape[0]):
        u = a[i] - z[i]
        per += u * u
    return lam * nef + per


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("cosine of vectors with different dimensions")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined at zero")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def nefarious_cost(spec: CostSpec, next_model) -> float:
    """Evaluate g_nef on an (already updated) model."""
    theta = np.asarray(next_model, dtype=np.float64)
    code = spec.code
    if code == NEF_COSINE:
        if theta.ndim != 1:
            raise ValueError("cosine similarity needs a logistic-regression weight vector")
        return -cosine(theta, spec.reference)
    if code == NEF_BACKDOOR:
        if theta.ndim != 1:
            raise ValueError("backdoor cost needs a logistic-regression weight vector")
        m = spec.trigger.label * float(theta @ spec.trigger.features)
        return float(np.logaddexp(0.0, -m))
    if spec.reference is None or theta.shape != spec.reference.shape:
        raise ValueError("model and reference shapes differ")
    sq = float(np.sum((theta - spec.reference) ** 2))
    return sq if code == NEF_SQDIST else -sq


def _prepare(spec: CostSpec, victim: VictimSpec, theta, clean: DataPoint, action: DataPoint):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != victim.model_shape:
        raise ValueError(f"model shape {theta.shape} does not match victim {victim.model_shape}")
    if clean.dim != victim.d or action.dim != victim.d:
        raise ValueError("dimension mismatch between points and victim")
    if action.label != clean.label:
        raise ValueError("label perturbation disabled")
    if victim.supervised and clean.label is None:
        raise ValueError("unlabeled point for supervised victim")
    y = clean.label if clean.label is not None else 0.0
    return theta.reshape(victim.k, victim.d), y


def running_cost(spec: CostSpec, victim: VictimSpec, theta, clean: DataPoint, action: DataPoint) -> float:
    """lam * g_nef(f(theta, action)) + ||action - clean||^2."""
    t2, y = _prepare(spec, victim, theta, clean, action)
    code, ref, tx, ty = spec.kernel_args(victim)
    nxt = np.empty_like(t2)
    gn = np.empty_like(t2)
    return float(
        running_cost_kernel(victim.code, victim.eta, code, ref, tx, ty, float(spec.lam),
                            t2, clean.features, action.features, y, nxt, gn)
    )


def running_cost_gradient(spec: CostSpec, victim: VictimSpec, theta, clean: DataPoint, action: DataPoint) -> np.ndarray:
    """Gradient of :func:`running_cost` with respect to ``action.features``."""
    t2, y = _prepare(spec, victim, theta, clean, action)
    code, ref, tx, ty = spec.kernel_args(victim)
    nxt = np.empty_like(t2)
    gn = np.empty_like(t2)
    running_cost_kernel(victim.code, victim.eta, code, ref, tx, ty, float(spec.lam),
                        t2, clean.features, action.features, y, nxt, gn)
    g_theta = np.empty_like(t2)
    g_a = np.empty(victim.d)
    vjp_kernel(victim.code, victim.eta, t2, action.features, y, spec.lam * gn, g_theta, g_a)
    return g_a + 2.0 * (action.features - clean.features)
