import numpy as np
import pytest

from poisonctl import CostSpec, VictimSpec


def central_diff(fun, x, step=1e-5):
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        g[idx] = (fun(xp) - fun(xm)) / (2 * step)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8))


def random_problem(gen, kind, d=None, k=None, lam=None):
    """A random victim/cost pair with a model and labels for ``kind``."""
    d = d or int(gen.integers(1, 5))
    if kind == "logreg":
        victim = VictimSpec("logreg", float(gen.uniform(0.05, 0.5)), d)
        metric = "cosine"
    else:
        victim = VictimSpec("kmeans", float(gen.uniform(0.05, 0.5)), d, k or int(gen.integers(1, 4)))
        metric = "squared"
    cost = CostSpec(float(gen.uniform(0.5, 10.0)) if lam is None else lam, "targeted", metric,
                    reference=gen.normal(size=victim.model_shape))
    theta = gen.normal(size=victim.model_shape)
    return victim, cost, theta


@pytest.fixture
def gen():
    return np.random.default_rng(1234)
