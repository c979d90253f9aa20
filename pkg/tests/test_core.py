import multiprocessing as mp

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisonctl.core import (
    ControlState,
    DataPoint,
    RngStream,
    discounted_cumulative_cost,
    rng_fork,
)

costs_st = st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=50)
gammas = st.floats(0.01, 0.99)


def test_discounted_geometric():
    assert discounted_cumulative_cost([1, 1, 1], 0.5) == pytest.approx(1.75)


def test_discounted_single_term():
    assert discounted_cumulative_cost([5], 0.99) == 5


@pytest.mark.parametrize("costs,gamma,msg", [([], 0.5, "empty cost trace"),
                                             ([1.0], 1.0, "invalid discount"),
                                             ([1.0], 0.0, "invalid discount")])
def test_discounted_errors(costs, gamma, msg):
    with pytest.raises(ValueError, match=msg):
        discounted_cumulative_cost(costs, gamma)


@given(costs_st, costs_st, gammas)
def test_discounted_split(prefix, suffix, gamma):
    whole = discounted_cumulative_cost(prefix + suffix, gamma)
    parts = (discounted_cumulative_cost(prefix, gamma)
             + gamma ** len(prefix) * discounted_cumulative_cost(suffix, gamma))
    assert abs(whole - parts) <= 1e-10 * max(abs(whole), 1.0)


@given(costs_st, st.floats(0, 100), gammas)
def test_discounted_monotone_for_nonnegative_costs(costs, extra, gamma):
    assert discounted_cumulative_cost(costs + [extra], gamma) >= discounted_cumulative_cost(costs, gamma)


def test_fork_is_deterministic():
    s = RngStream(42)
    a = rng_fork(s, 0).generator().random(10)
    b = rng_fork(s, 0).generator().random(10)
    assert np.array_equal(a, b)


def test_forks_differ():
    s = RngStream(42)
    a = s.fork(0).generator().random(100)
    b = s.fork(1).generator().random(100)
    assert not np.any(a == b)


def _draws(_):
    return RngStream(7).fork(0).fork(1).generator().random(5).tolist()


def test_fork_reproducible_across_processes():
    ctx = mp.get_context("spawn")
    with ctx.Pool(2) as pool:
        a, b = pool.map(_draws, [0, 1])
    assert a == b == _draws(None)


def test_sequence_id_depends_on_path():
    s = RngStream(3)
    assert s.fork(0).sequence_id != s.fork(1).sequence_id
    assert s.fork(0).sequence_id == RngStream(99).fork(0).sequence_id


def test_seed_range():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)


def test_datapoint_is_immutable_and_validated():
    p = DataPoint([1.0, 2.0], 1)
    with pytest.raises(ValueError):
        p.features[0] = 3.0
    with pytest.raises(ValueError):
        DataPoint([1.0], 0)
    assert p == DataPoint(np.array([1.0, 2.0]), 1.0)
    assert p != DataPoint([1.0, 2.0], -1)


def test_control_state_dimension_check():
    with pytest.raises(ValueError):
        ControlState(np.zeros(3), DataPoint([1.0, 2.0], 1))
    ControlState(np.zeros((2, 2)), DataPoint([1.0, 2.0]))
