"""Victim learners: one-step online updates and their vector-Jacobian products.

Internally every model is a ``(k, d)`` float64 array (logistic regression uses
``k = 1``) so the numba kernels below serve both learners. The public helpers
accept and return the natural shapes: ``(d,)`` weights or ``(k, d)`` centroids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import DataPoint, model_dim

LOGREG = 0
KMEANS = 1

_KIND_CODES = {"logreg": LOGREG, "kmeans": KMEANS}


@dataclass(frozen=True)
class VictimSpec:
    kind: str
    eta: float
    d: int
    k: int = 1

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown victim kind {self.kind!r}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.d < 1 or self.k < 1:
            raise ValueError("d and k must be >= 1")
        if self.kind == "logreg" and self.k != 1:
            raise ValueError("logistic regression has k = 1")

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def supervised(self) -> bool:
        return self.kind == "logreg"

    @property
    def model_shape(self) -> tuple:
        return (self.d,) if self.kind == "logreg" else (self.k, self.d)


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _sigmoid(m):
    if m >= 0.0:
        return 1.0 / (1.0 + math.exp(-m))
    e = math.exp(m)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _responsibilities(theta, a, out):
    k, d = theta.shape
    best = -np.inf
    for j in range(k):
        s = 0.0
        for i in range(d):
            u = a[i] - theta[j, i]
            s += u * u
        out[j] = -s
        if out[j] > best:
            best = out[j]
    z = 0.0
    for j in range(k):
        out[j] = math.exp(out[j] - best)
        z += out[j]
    for j in range(k):
        out[j] /= z


@numba.njit(cache=True)
def step_kernel(kind, eta, theta, a, y, out):
    """Write f(theta, a) into ``out``; ``y`` is ignored for k-means."""
    k, d = theta.shape
    if kind == LOGREG:
        m = 0.0
        for i in range(d):
            m += theta[0, i] * a[i]
        c = eta * _sigmoid(-y * m)
        for i in range(d):
            out[0, i] = theta[0, i] + c * y * a[i]
    else:
        r = np.empty(k)
        _responsibilities(theta, a, r)
        for j in range(k):
            for i in range(d):
                out[j, i] = theta[j, i] + eta * r[j] * (a[i] - theta[j, i])


@numba.njit(cache=True)
def vjp_kernel(kind, eta, theta, a, y, v, g_theta, g_a):
    """Overwrite ``g_theta`` / ``g_a`` with v^T df/dtheta and v^T df/da."""
    k, d = theta.shape
    if kind == LOGREG:
        m = 0.0
        vx = 0.0
        for i in range(d):
            m += theta[0, i] * a[i]
            vx += v[0, i] * a[i]
        s = _sigmoid(-y * m)
        c2 = eta * s * (1.0 - s)
        for i in range(d):
            g_theta[0, i] = v[0, i] - c2 * vx * a[i]
            g_a[i] = eta * s * y * v[0, i] - c2 * vx * theta[0, i]
    else:
        r = np.empty(k)
        _responsibilities(theta, a, r)
        w = np.empty(k)
        wbar = 0.0
        for j in range(k):
            acc = 0.0
            for i in range(d):
                acc += v[j, i] * (a[i] - theta[j, i])
            w[j] = eta * acc
            wbar += r[j] * w[j]
        for i in range(d):
            g_a[i] = 0.0
        for j in range(k):
            q = r[j] * (w[j] - wbar)
            for i in range(d):
                u = a[i] - theta[j, i]
                g_theta[j, i] = v[j, i] * (1.0 - eta * r[j]) + 2.0 * q * u
                g_a[i] += eta * r[j] * v[j, i] - 2.0 * q * u


# ------------------------------------------------------------ public API


def softmax(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(x - x.max())
    return e / e.sum()


def _check_point(theta: np.ndarray, point: DataPoint):
    if point.dim != model_dim(theta):
        raise ValueError(
            f"dimension mismatch: point has {point.dim}, model has {model_dim(theta)}"
        )


def logreg_update(theta, point: DataPoint, eta: float) -> np.ndarray:
    """One gradient step on the logistic log-likelihood.

    Returns ``theta + eta * y * x / (1 + exp(y * theta @ x))``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if point.label is None:
        raise ValueError("unlabeled point for supervised victim")
    _check_point(theta, point)
    out = np.empty((1, theta.shape[0]))
    step_kernel(LOGREG, float(eta), theta.reshape(1, -1), point.features, point.label, out)
    return out[0]


def soft_kmeans_update(centroids, point: DataPoint, eta: float) -> np.ndarray:
    """Move every centroid toward ``point`` weighted by its softmax responsibility."""
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[0] < 1:
        raise ValueError("centroids must be a (k, d) array with k >= 1")
    _check_point(centroids, point)
    out = np.empty_like(centroids)
    step_kernel(KMEANS, float(eta), centroids, point.features, 0.0, out)
    return out


def victim_update(spec: VictimSpec, theta, point: DataPoint) -> np.ndarray:
    if spec.kind == "logreg":
        return logreg_update(theta, point, spec.eta)
    return soft_kmeans_update(theta, point, spec.eta)


def victim_vjp(spec: VictimSpec, theta, action: DataPoint, cotangent):
    """Pull a cotangent on the updated model back through one victim step.

    Args:
        spec: victim description.
        theta: current model, ``(d,)`` or ``(k, d)``.
        action: the point fed to the victim.
        cotangent: array shaped like ``theta``.

    Returns:
        ``(grad_theta, grad_action_features)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    v = np.asarray(cotangent, dtype=np.float64)
    if theta.shape != spec.model_shape or v.shape != theta.shape:
        raise ValueError(
            f"shape mismatch: theta {theta.shape}, cotangent {v.shape}, "
            f"expected {spec.model_shape}"
        )
    _check_point(theta, action)
    y = 0.0
    if spec.supervised:
        if action.label is None:
            raise ValueError("unlabeled point for supervised victim")
        y = action.label
    t2 = theta.reshape(-1, spec.d)
    g_theta = np.empty_like(t2)
    g_a = np.empty(spec.d)
    vjp_kernel(spec.code, float(spec.eta), t2, action.features, y, v.reshape(t2.shape), g_theta, g_a)
    return g_theta.reshape(theta.shape), g_a
