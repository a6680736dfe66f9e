import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boxdesign.analytics import (TuningParams, build_cost_matrix, compute_weights, dominating_set,
                                 estimate_effective_volumes, neighbor_set, strictly_smaller_set,
                                 substitution_cost)
from boxdesign.model import BoxType, CandidatePool, Item, Order, ValidationError
from boxdesign.packer import pack_order
from boxdesign.synthetic import random_orders
from oracles import structured_cost


def pool_of(*dims):
    return CandidatePool(tuple(BoxType(f"b{i}", *d) for i, d in enumerate(dims)))


def random_pool(rng, n, hi=9):
    seen = {}
    while len(seen) < n:
        d = tuple(sorted(rng.integers(1, hi, size=3).tolist(), reverse=True))
        seen.setdefault(d, BoxType(f"b{len(seen)}", *d))
    return CandidatePool(tuple(seen.values()))


# effective volumes

def test_ev_single_exact_fit():
    pool = pool_of((1, 1, 1), (3, 2, 1), (5, 5, 5))
    ev = estimate_effective_volumes([Order.of("o", [Item("a", 3, 2, 1, 1)])], pool)
    assert ev.tolist() == [0.0, 6.0, 0.0]


def test_ev_two_orders_share_best_box():
    pool = pool_of((4, 2, 1), (4, 4, 4))
    orders = [Order.of("o1", [Item("a", 3, 1, 1, 1)]), Order.of("o2", [Item("b", 2.5, 2, 1, 1)])]
    for o in orders:
        assert pack_order(o, pool.boxes).instances[0].box.id == "b0"
    assert estimate_effective_volumes(orders, pool).tolist() == [8.0, 0.0]


def test_ev_conservation():
    rng = np.random.default_rng(4)
    pool = random_pool(rng, 25, hi=14)
    orders = random_orders(80, seed=4)
    ev = estimate_effective_volumes(orders, pool)
    packed = sum(pack_order(o, pool.boxes).packed_volume for o in orders)
    assert ev.sum() == pytest.approx(packed, rel=1e-9)
    assert np.all(ev >= 0)


def test_ev_rejects_empty_corpus():
    with pytest.raises(ValidationError):
        estimate_effective_volumes([], pool_of((1, 1, 1)))


def test_ev_parallel_matches_serial():
    pool = random_pool(np.random.default_rng(1), 12, hi=14)
    orders = random_orders(20, seed=1)
    assert np.array_equal(estimate_effective_volumes(orders, pool),
                          estimate_effective_volumes(orders, pool, workers=2))


# weights

def test_weights_examples():
    pool = pool_of((4, 2, 2), (3, 1, 1), (2, 2, 2))
    wv = compute_weights([16.0, 3.0, 0.0], pool, 0.5)
    assert wv.w[0] == 4.0
    assert wv.w[2] == 0.0
    assert compute_weights([16.0, 3.0, 8.0], pool, 1.0).w.tolist() == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("rho", [0, -0.5])
def test_weights_reject_non_positive_rho(rho):
    with pytest.raises(ValidationError):
        compute_weights([1.0], pool_of((1, 1, 1)), rho)


# subnormals lose relative precision under division; volumes never get there
@given(st.lists(st.floats(0, 1e6, allow_subnormal=False), min_size=3, max_size=3), st.floats(0.01, 1e3), st.floats(0.05, 2))
def test_weights_linear_in_ev(ev, scale, rho):
    pool = pool_of((4, 2, 2), (3, 1, 1), (2, 2, 2))
    a = compute_weights(ev, pool, rho).w
    b = compute_weights(np.array(ev) * scale, pool, rho).w
    assert np.allclose(b, a * scale, rtol=1e-12, atol=0)
    assert all((wi == 0) == (ei == 0) for wi, ei in zip(a, ev))


def test_tuning_params_validation():
    TuningParams(0.5, 0, 0)
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, -0.1)]:
        with pytest.raises(ValidationError):
            TuningParams(*bad)


# sets

def test_set_examples():
    pool = pool_of((2, 2, 2), (4, 2, 2), (4, 1, 1), (3, 3, 3), (4, 4, 4))
    assert 0 in dominating_set(0, pool)
    assert 1 in dominating_set(0, pool)
    assert 2 not in dominating_set(0, pool)
    assert neighbor_set(0, pool, 0) == {0}
    assert all(j not in strictly_smaller_set(j, pool) for j in range(len(pool)))
    assert 3 in neighbor_set(4, pool, 1) and 3 in strictly_smaller_set(4, pool)


def test_neighbor_set_monotone_in_delta():
    pool = random_pool(np.random.default_rng(0), 40)
    for j in range(len(pool)):
        sets = [neighbor_set(j, pool, d) for d in (0, 0.5, 1, 2, 3, 4)]
        assert all(a <= b for a, b in zip(sets, sets[1:]))


# costs

def test_cost_examples():
    pool = pool_of((4, 2, 2), (2, 2, 2), (3, 3, 3), (4, 4, 4), (4, 4, 3))
    assert substitution_cost(1, 1, pool, 0, 0) == -1
    assert substitution_cost(0, 1, pool, 0, 0) == -0.5
    assert substitution_cost(2, 3, pool, 1, 2) == 0
    assert substitution_cost(4, 3, pool, 1, 2) == pytest.approx(-1 / 3, abs=1e-15)


def test_cost_matrix_small():
    assert build_cost_matrix(pool_of((3, 2, 1)), 0, 0).tolist() == [[-1.0]]
    c = build_cost_matrix(pool_of((1, 1, 1), (2, 2, 2)), 0, 0)
    assert c.tolist() == [[-1.0, 0.0], [-0.125, -1.0]]


def test_case_precedence():
    # box 0 dominates box 1 and is within delta; the first case must win
    pool = pool_of((3, 3, 3), (2, 2, 2))
    assert substitution_cost(0, 1, pool, 5, 4) == -8 / 27


def test_cost_matrix_matches_literal_transcription():
    rng = np.random.default_rng(7)
    for _ in range(20):
        delta, alpha = (float(x) for x in rng.integers(0, 5, size=2))
        dims, expected = structured_cost(rng, 15, delta, alpha)
        got = build_cost_matrix(pool_of(*dims), delta, alpha)
        assert np.array_equal(got, expected)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30), st.sampled_from([0, 0.5, 1, 2, 3, 4]),
       st.sampled_from([0, 0.5, 1, 2, 3, 4]))
def test_vectorised_matches_scalar(seed, n, delta, alpha):
    pool = random_pool(np.random.default_rng(seed), n)
    c = build_cost_matrix(pool, delta, alpha, block=7)
    for i in range(n):
        for j in range(n):
            assert c[i, j] == substitution_cost(i, j, pool, delta, alpha)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40), st.floats(0, 5), st.floats(0, 5))
def test_cost_matrix_bounds_and_diagonal(seed, n, delta, alpha):
    pool = random_pool(np.random.default_rng(seed), n, hi=12)
    c = build_cost_matrix(pool, delta, alpha)
    assert np.all(c <= 0) and np.all(c >= -1)
    assert np.all(np.diag(c) == -1.0)


def test_alpha_monotone():
    pool = random_pool(np.random.default_rng(3), 40)
    mats = [np.abs(build_cost_matrix(pool, 2, a)) for a in (0, 1, 2, 3, 4)]
    for a, b in zip(mats, mats[1:]):
        assert np.all(b <= a)


def test_large_matrix_block_boundaries():
    rng = np.random.default_rng(5)
    pool = random_pool(rng, 150, hi=12)
    assert np.array_equal(build_cost_matrix(pool, 1, 1, block=32), build_cost_matrix(pool, 1, 1, block=1000))


def test_negative_parameters_rejected():
    with pytest.raises(ValidationError):
        build_cost_matrix(pool_of((1, 1, 1)), -1, 0)
    with pytest.raises(ValidationError):
        neighbor_set(0, pool_of((1, 1, 1)), -1)


def test_ceiling_applies_to_ratios_below_one():
    # substitute is bigger in volume but not dominating: ratio < 1, ceil -> 1
    pool = pool_of((5, 5, 2), (4, 4, 3))
    r = (4 * 4 * 3) / (5 * 5 * 2)
    assert substitution_cost(0, 1, pool, 1, 2) == pytest.approx(-r / (1 + 2), abs=0)
    assert math.ceil(r) == 1
