import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simbeam.powerctl import (DegenerateProblemError, IwfOptions, effective_floors, iterative_waterfilling,
                              waterfill, waterfill_step)
from simbeam.wavefield import sinr_and_rate


def closed_form_waterfill(floors, budget):
    # sort-based oracle: largest active set whose level clears every floor
    order = np.sort(floors)
    for m in range(len(order), 0, -1):
        level = (budget + order[:m].sum()) / m
        if level > order[m - 1]:
            return np.maximum(level - np.asarray(floors), 0.0)
    raise AssertionError


def test_single_user_takes_budget():
    assert waterfill_step(np.array([[2.0]]), [0.0], 1.0, 3.5)[0] == pytest.approx(3.5)


def test_symmetric_pair():
    p = waterfill_step(np.eye(2), [1, 1], np.array([1.0, 1.0]), 2.0)
    assert np.allclose(p, [1, 1])


def test_weak_user_shut_off():
    p = waterfill_step(np.eye(2), [0.5, 0.5], np.array([0.1, 10.0]), 1.0)
    assert np.allclose(p, [1, 0], atol=1e-12)


def test_zero_gain_user_gets_nothing():
    g = np.diag([1.0, 0.0, 2.0])
    p = waterfill_step(g, [1, 1, 1], np.ones(3), 3.0)
    assert p[1] == 0.0 and p.sum() == pytest.approx(3.0, abs=1e-12)


def test_all_zero_gains_degenerate():
    with pytest.raises(DegenerateProblemError):
        waterfill_step(np.zeros((2, 2)), [1, 1], np.ones(2), 1.0)


def test_effective_floors():
    g = np.array([[2.0, 1.0], [0.5, 4.0]])
    f = effective_floors(g, [1.0, 2.0], np.array([0.1, 0.2]))
    assert np.allclose(f, [(2.0 + 0.1) / 2.0, (0.5 + 0.2) / 4.0])


@settings(max_examples=200, deadline=None)
@given(floors=st.lists(st.floats(1e-12, 1e3), min_size=1, max_size=8), budget=st.floats(1e-6, 1e3))
def test_waterfill_matches_sort_oracle(floors, budget):
    f = np.array(floors)
    p = waterfill(f, budget)
    assert np.all(p >= 0)
    assert abs(p.sum() - budget) < 1e-9 * max(1.0, budget)
    assert np.max(np.abs(p - closed_form_waterfill(f, budget))) < 1e-8 * max(1.0, budget)


@pytest.mark.parametrize("zeta", [0.25, 0.5, 1.0])
def test_iwf_diagonal_reaches_closed_form(zeta):
    rng = np.random.default_rng(11)
    for _ in range(20):
        K = 4
        d = rng.uniform(0.1, 5, K)
        s2 = rng.uniform(0.05, 2, K)
        res = iterative_waterfilling(np.diag(d), s2, 2.0, IwfOptions(zeta=zeta, tol=1e-14, max_iter=500))
        assert np.max(np.abs(res.p - closed_form_waterfill(s2 / d, 2.0))) < 1e-8
        tr = np.array(res.trace)
        assert np.all(np.diff(tr) >= -1e-9)


def test_symmetric_users_stay_uniform():
    g = np.full((3, 3), 0.2) + np.eye(3)
    res = iterative_waterfilling(g, np.ones(3), 3.0)
    assert np.allclose(res.p, 1.0)


def test_damping_bounds():
    with pytest.raises(ValueError):
        IwfOptions(zeta=0.1).damping(4)
    with pytest.raises(ValueError):
        IwfOptions(zeta=1.5).damping(4)
    assert IwfOptions().damping(4) == 0.75
    assert IwfOptions().damping(1) == 1.0
    assert IwfOptions(zeta=0.25).damping(4) == 0.25


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_iwf_general_instance_properties(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 6))
    g = rng.exponential(size=(K, K)) * rng.uniform(0.01, 1)
    g[np.diag_indices(K)] *= rng.uniform(1, 10)
    s2 = rng.uniform(0.01, 1, K)
    res = iterative_waterfilling(g, s2, 1.0)
    assert np.all(res.p >= 0)
    assert abs(res.p.sum() - 1.0) < 1e-9
    assert sinr_and_rate(g, res.p, s2)[1] >= res.initial_rate - 1e-12
    assert len(res.trace) == res.iterations <= 100
