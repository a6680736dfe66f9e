import csv
import math
import random
from pathlib import Path

import numpy as np
import pytest

from boxdesign.analytics import (TuningParams, build_cost_matrix, compute_weights,
                                 estimate_effective_volumes)
from boxdesign.model import BoxType, Item, Order, OrderLine, ValidationError, generate_candidate_pool
from boxdesign.packer import UndefinedMetricError, pack_order
from boxdesign.pipeline import (AssortmentReport, GridResult, SplitSpec, compare, evaluate_assortment,
                                finalize, grid_search, make_grid, select_model, split_corpus)
from boxdesign.solver import Selection, SelectionProblem, solve_exhaustive, solve_greedy
from boxdesign.synthetic import archetype_corpus, random_orders

FIXTURES = Path(__file__).parent / "fixtures"
ARCHETYPES = [(10, 6, 4), (8, 8, 8), (12, 4, 2)]


def ids(orders):
    return [o.order_id for o in orders]


def report(boxes, util, corpus="c"):
    return AssortmentReport(("x",), corpus, boxes, util, 0)


# split

def test_split_is_partition_and_order_independent():
    orders = random_orders(300, seed=1)
    spec = SplitSpec(1 / 3, 1 / 3, 1 / 3, seed=5)
    parts = split_corpus(orders, spec)
    all_ids = [i for p in parts for i in ids(p)]
    assert sorted(all_ids) == sorted(ids(orders)) and len(set(all_ids)) == len(all_ids)
    shuffled = orders[:]
    random.Random(0).shuffle(shuffled)
    again = split_corpus(shuffled, spec)
    assert [sorted(ids(p)) for p in parts] == [sorted(ids(p)) for p in again]


def test_split_three_orders():
    orders = random_orders(3, seed=0)
    parts = split_corpus(orders, SplitSpec(1 / 3, 1 / 3, 1 / 3, seed=0))
    assert sorted(i for p in parts for i in ids(p)) == sorted(ids(orders))


def test_split_sizes_are_binomial():
    orders = [Order.of(f"ord-{i}", [Item("s", 1, 1, 1, 1)]) for i in range(10_000)]
    a = split_corpus(orders, SplitSpec(seed=1))
    b = split_corpus(orders, SplitSpec(seed=2))
    assert [ids(p) for p in a] != [ids(p) for p in b]
    for parts in (a, b):
        for part, frac in zip(parts, (0.6, 0.2, 0.2)):
            mean, sd = 10_000 * frac, math.sqrt(10_000 * frac * (1 - frac))
            assert abs(len(part) - mean) <= 4 * sd


@pytest.mark.parametrize("fracs", [(0.5, 0.5, 0.0), (0.6, 0.3, 0.2), (1.2, -0.1, -0.1)])
def test_split_rejects_bad_fractions(fracs):
    with pytest.raises(ValidationError):
        SplitSpec(*fracs)


def test_split_needs_three_orders():
    with pytest.raises(ValidationError):
        split_corpus(random_orders(2), SplitSpec())


# evaluate / compare

def test_evaluate_nine_cubes():
    cube = Item("c", 1, 1, 1, 1)
    r = evaluate_assortment([BoxType("b", 2, 2, 2, 100)], [Order("o", (OrderLine(cube, 9),))])
    assert r.total_boxes_used == 2 and r.utilization == pytest.approx(0.5625)
    assert r.unpacked_items == 0


def test_evaluate_full_pool_matches_ev_run():
    pool = generate_candidate_pool(2, 12, 2)
    orders = random_orders(40, seed=2, hi=8)
    r = evaluate_assortment(list(pool), orders)
    ev = estimate_effective_volumes(orders, pool)
    used = sum(pack_order(o, pool.boxes).box_volume for o in orders)
    assert r.utilization == pytest.approx(ev.sum() / used, rel=1e-12)


def test_evaluate_rejects_empty():
    with pytest.raises(ValidationError):
        evaluate_assortment([BoxType("b", 1, 1, 1)], [])
    with pytest.raises(ValidationError):
        evaluate_assortment([], random_orders(2))


def test_full_pool_never_leaves_more_unpacked():
    pool = generate_candidate_pool(2, 10, 2)
    orders = random_orders(40, seed=3, hi=12)
    full = evaluate_assortment(list(pool), orders)
    rng = np.random.default_rng(0)
    for _ in range(5):
        subset = [pool[i] for i in rng.choice(len(pool), 4, replace=False)]
        assert full.unpacked_items <= evaluate_assortment(subset, orders).unpacked_items


def test_compare_examples():
    assert compare(report(10, 0.5), report(10, 0.5)) == (0.0, 0.0)
    red, gain = compare(report(990, 0.55), report(1000, 0.50))
    assert red == pytest.approx(1.0) and gain == pytest.approx(10.0)
    assert compare(report(134, 0.5), report(100, 0.5))[0] == pytest.approx(-34.0)


def test_compare_sign_flip_with_equal_counts():
    a, b = report(50, 0.6), report(50, 0.4)
    assert compare(a, b)[0] == -compare(b, a)[0] == 0
    assert compare(a, b)[1] > 0 > compare(b, a)[1]


def test_compare_errors():
    with pytest.raises(UndefinedMetricError):
        compare(report(1, 0.5), report(0, 0.0))
    with pytest.raises(ValidationError):
        compare(report(1, 0.5, "a"), report(1, 0.5, "b"))


# grid search

@pytest.fixture(scope="module")
def small_setup():
    pool = generate_candidate_pool(2, 12, 2)
    orders = archetype_corpus(120, ARCHETYPES, seed=3, noise_fraction=0.2)
    train, validation, _ = split_corpus(orders, SplitSpec(seed=1))
    baseline = [BoxType("base1", 12, 12, 12), BoxType("base2", 12, 12, 8), BoxType("base3", 10, 10, 10)]
    return pool, train, validation, baseline


def test_grid_singleton_matches_manual(small_setup):
    pool, train, validation, baseline = small_setup
    params = TuningParams(0.5, 4, 3)
    (res,) = grid_search(train, validation, pool, baseline, 3, [params])
    w = compute_weights(estimate_effective_volumes(train, pool), pool, 0.5).w
    sel = solve_greedy(SelectionProblem(build_cost_matrix(pool, 4, 3), w, 3))
    cand = evaluate_assortment([pool[i] for i in sel.rows], validation, "validation")
    base = evaluate_assortment(baseline, validation, "validation")
    assert res.selection.rows == sel.rows
    assert (res.box_reduction_pct, res.utilization_improvement_pct) == compare(cand, base)


def test_full_grid_has_100_settings_in_order(small_setup):
    grid = make_grid()
    assert len(grid) == 100
    assert grid[0] == TuningParams(0.25, 0, 0) and grid[-1] == TuningParams(1, 4, 4)
    pool, train, validation, baseline = small_setup
    results = grid_search(train, validation, pool, baseline, 3, grid)
    assert len(results) == 100
    assert [r.params for r in results] == grid


def test_grid_cache_is_transparent(small_setup):
    pool, train, validation, baseline = small_setup
    grid = make_grid(rhos=(0.25, 1.0), deltas=(0, 4), alphas=(0, 3))
    cached = grid_search(train, validation, pool, baseline, 3, grid, cache=True)
    plain = grid_search(train, validation, pool, baseline, 3, grid, cache=False)
    for a, b in zip(cached, plain):
        assert a.selection.rows == b.selection.rows
        assert a.selection.objective == b.selection.objective
        assert a.box_reduction_pct == b.box_reduction_pct
        assert a.utilization_improvement_pct == b.utilization_improvement_pct


def test_grid_rejects_empty(small_setup):
    pool, train, validation, baseline = small_setup
    with pytest.raises(ValidationError):
        grid_search(train, validation, pool, baseline, 3, [])


# model selection

def fake(params, red, gain, extra_unpacked=0):
    sel = Selection((0,), 0.0, np.zeros(1, dtype=int))
    return GridResult(params, red, gain, sel, extra_unpacked=extra_unpacked)


def reference_grid():
    with open(FIXTURES / "reference_grid.csv", newline="") as fh:
        return [fake(TuningParams(float(r["rho"]), float(r["delta"]), float(r["alpha"])),
                     float(r["box_reduction_pct"]), float(r["utilization_improvement_pct"]))
                for r in csv.DictReader(fh)]


def test_select_model_reproduces_reference_choice():
    rows = reference_grid()
    assert len(rows) == 100
    choice = select_model(rows)
    assert choice.params == TuningParams(0.5, 4, 3)
    assert rows[choice.index].utilization_improvement_pct == 10.28
    assert rows[choice.index].box_reduction_pct == 0.2
    assert not choice.sacrifices_boxes


def test_select_model_rules():
    p1, p2, p3 = TuningParams(1, 0, 0), TuningParams(2, 0, 0), TuningParams(3, 0, 0)
    assert select_model([fake(p1, 0.0, 1.0)]).params == p1
    assert select_model([fake(p1, -1, 12), fake(p2, 0.1, 9)]).params == p2
    assert select_model([fake(p1, 0.1, 9), fake(p2, 0.3, 9), fake(p3, 0.3, 9)]).params == p2
    flagged = select_model([fake(p1, -1, 3), fake(p2, -2, 5)])
    assert flagged.params == p2 and flagged.sacrifices_boxes
    with pytest.raises(ValidationError):
        select_model([])


def test_select_model_skips_assortments_that_drop_items():
    p1, p2 = TuningParams(1, 0, 0), TuningParams(2, 0, 0)
    choice = select_model([fake(p1, 40, 300, extra_unpacked=5), fake(p2, 0, 20)])
    assert choice.params == p2 and not choice.drops_items
    only = select_model([fake(p1, 40, 300, extra_unpacked=5), fake(p2, 10, 20, extra_unpacked=1)])
    assert only.params == p1 and only.drops_items


def test_grid_records_extra_unpacked():
    pool = generate_candidate_pool(2, 12, 2)
    orders = archetype_corpus(90, ARCHETYPES, seed=2, noise_fraction=0)
    train, validation, _ = split_corpus(orders, SplitSpec(seed=0))
    baseline = [BoxType("big", 12, 12, 12)]
    (res,) = grid_search(train, validation, pool, baseline, 1, [TuningParams(1, 0, 0)])
    assert res.extra_unpacked == res.report.unpacked_items


# finalize

def test_finalize_recovers_archetype_boxes():
    pool = generate_candidate_pool(2, 12, 2)
    orders = archetype_corpus(60, ARCHETYPES, seed=1, noise_fraction=0)
    for params in (TuningParams(0.5, 4, 3), TuningParams(1, 2, 1)):
        sel = finalize(orders, pool, params, 3)
        assert sorted(pool[i].dims for i in sel.rows) == sorted(tuple(map(float, a)) for a in ARCHETYPES)
        w = compute_weights(estimate_effective_volumes(orders, pool), pool, params.rho).w
        oracle = solve_exhaustive(SelectionProblem(build_cost_matrix(pool, params.delta, params.alpha), w, 3))
        assert sorted(oracle.rows) == sorted(sel.rows)


def test_finalize_deterministic_and_consistent_with_training(small_setup):
    pool, train, validation, baseline = small_setup
    params = TuningParams(0.75, 2, 1)
    a = finalize(train, pool, params, 3)
    b = finalize(train, pool, params, 3)
    assert a.rows == b.rows and a.objective == b.objective
    (res,) = grid_search(train, validation, pool, baseline, 3, [params])
    assert res.selection.rows == a.rows
