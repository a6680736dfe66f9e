"""Experiment protocol: split, tune (rho, delta, alpha) on validation, refit, test."""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .analytics import TuningParams, build_cost_matrix, compute_weights, estimate_effective_volumes
from .model import BoxType, CandidatePool, Order, ValidationError
from .packer import UndefinedMetricError, pack_order
from .solver import Selection, SelectionProblem, solve_em, solve_exhaustive, solve_greedy

log = logging.getLogger(__name__)

GRID_RHOS = (0.25, 0.5, 0.75, 1.0)
GRID_DELTAS = (0.0, 1.0, 2.0, 3.0, 4.0)
GRID_ALPHAS = (0.0, 1.0, 2.0, 3.0, 4.0)


def make_grid(rhos: Sequence[float] = GRID_RHOS, deltas: Sequence[float] = GRID_DELTAS,
              alphas: Sequence[float] = GRID_ALPHAS) -> list[TuningParams]:
    """Cartesian grid, rho outermost and alpha innermost."""
    return [TuningParams(r, d, a) for r in rhos for d in deltas for a in alphas]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    validation_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if not all(0 < f < 1 for f in fracs):
            raise ValidationError(f"each split fraction must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ValidationError(f"split fractions must sum to 1, got {sum(fracs)!r}")


def _bucket(order_id: str, seed: int) -> float:
    digest = hashlib.blake2b(f"{seed}\x1f{order_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0 ** 64


def split_corpus(orders: Sequence[Order], spec: SplitSpec = SplitSpec()):
    """Assign each order to train/validation/test by a seeded hash of its id.

    Membership depends only on (seed, order_id), so reordering the corpus
    does not move any order between parts.
    """
    if len(orders) < 3:
        raise ValidationError(f"need at least 3 orders to split, got {len(orders)}")
    cut1 = spec.train_fraction
    cut2 = spec.train_fraction + spec.validation_fraction
    train, validation, test = [], [], []
    for order in orders:
        u = _bucket(order.order_id, spec.seed)
        (train if u < cut1 else validation if u < cut2 else test).append(order)
    return train, validation, test


@dataclass(frozen=True)
class AssortmentReport:
    assortment: tuple[str, ...]
    corpus: str
    total_boxes_used: int
    utilization: float
    unpacked_items: int
    packed_volume: float = 0.0
    box_volume: float = 0.0
    n_orders: int = 0


def _pack_stats(args):
    order, boxes = args
    res = pack_order(order, boxes)
    return res.box_count, res.packed_volume, res.box_volume, len(res.unpacked)


def evaluate_assortment(assortment: Sequence[BoxType], orders: Sequence[Order], corpus: str = "corpus",
                        workers: int = 1) -> AssortmentReport:
    """Pack every order with the assortment and aggregate count and utilization."""
    if not assortment:
        raise ValidationError("assortment must be non-empty")
    if not orders:
        raise ValidationError("cannot evaluate an empty corpus")
    boxes = tuple(assortment)
    jobs = [(o, boxes) for o in orders]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            stats = list(ex.map(_pack_stats, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        stats = map(_pack_stats, jobs)
    count = unpacked = 0
    packed = used = 0.0
    for c, pv, bv, u in stats:
        count += c
        packed += pv
        used += bv
        unpacked += u
    return AssortmentReport(tuple(b.id for b in boxes), corpus, count,
                            packed / used if used > 0 else 0.0, unpacked, packed, used, len(orders))


def compare(candidate: AssortmentReport, baseline: AssortmentReport) -> tuple[float, float]:
    """Percent box-count reduction and relative percent utilization gain over the baseline."""
    if candidate.corpus != baseline.corpus:
        raise ValidationError(f"reports cover different corpora: {candidate.corpus!r} vs {baseline.corpus!r}")
    if baseline.total_boxes_used == 0 or baseline.utilization == 0:
        raise UndefinedMetricError("baseline has zero boxes or zero utilization")
    box_reduction = 100.0 * (baseline.total_boxes_used - candidate.total_boxes_used) / baseline.total_boxes_used
    util_gain = 100.0 * (candidate.utilization - baseline.utilization) / baseline.utilization
    return box_reduction, util_gain


@dataclass(frozen=True)
class GridResult:
    params: TuningParams
    box_reduction_pct: float
    utilization_improvement_pct: float
    selection: Selection
    assortment: tuple[str, ...] = ()
    report: Optional[AssortmentReport] = None
    # validation items this assortment leaves unpacked beyond the baseline's
    extra_unpacked: int = 0


def solve(problem: SelectionProblem, method: str = "greedy", seed: int = 0) -> Selection:
    if method == "greedy":
        return solve_greedy(problem)
    if method == "em":
        return solve_em(problem, seed=seed)
    if method == "exhaustive":
        return solve_exhaustive(problem)
    raise ValidationError(f"unknown solver {method!r}")


def grid_search(train: Sequence[Order], validation: Sequence[Order], pool: CandidatePool,
                baseline_assortment: Sequence[BoxType], k: int, grid: Sequence[TuningParams],
                cache: bool = True, method: str = "greedy", seed: int = 0, workers: int = 1) -> list[GridResult]:
    """Fit one assortment per grid setting on train and score it on validation.

    With ``cache`` on, effective volumes are estimated once (rho only rescales
    them), each (delta, alpha) cost matrix is built once, and identical
    assortments are evaluated once.
    """
    if not grid:
        raise ValidationError("grid is empty")
    if not 1 <= k <= len(pool):
        raise ValidationError(f"k must be in [1, {len(pool)}], got {k}")
    baseline = evaluate_assortment(baseline_assortment, validation, "validation", workers)
    ev_cached = estimate_effective_volumes(train, pool, workers) if cache else None

    # group settings sharing a cost matrix, keep results in grid order
    groups: dict[tuple[float, float], list[int]] = {}
    for idx, params in enumerate(grid):
        key = (params.delta, params.alpha) if cache else (params.delta, params.alpha, idx)
        groups.setdefault(key, []).append(idx)

    results: list[Optional[GridResult]] = [None] * len(grid)
    evaluated: dict[tuple[int, ...], AssortmentReport] = {}
    for members in groups.values():
        first = grid[members[0]]
        cost = build_cost_matrix(pool, first.delta, first.alpha)
        for idx in members:
            params = grid[idx]
            ev = ev_cached if cache else estimate_effective_volumes(train, pool, workers)
            weights = compute_weights(ev, pool, params.rho)
            selection = solve(SelectionProblem(cost, weights.w, k), method, seed)
            rows = tuple(sorted(selection.rows))
            report = evaluated.get(rows) if cache else None
            if report is None:
                report = evaluate_assortment([pool[i] for i in rows], validation, "validation", workers)
                evaluated[rows] = report
            reduction, gain = compare(report, baseline)
            results[idx] = GridResult(params, reduction, gain, selection,
                                      tuple(pool[i].id for i in selection.rows), report,
                                      report.unpacked_items - baseline.unpacked_items)
            log.debug("grid %s -> boxes %+.3f%%, util %+.3f%%", params, reduction, gain)
    return results


@dataclass(frozen=True)
class ModelChoice:
    params: TuningParams
    index: int
    # True when every eligible setting used more boxes than the baseline
    sacrifices_boxes: bool
    # True when every setting leaves more items unpacked than the baseline
    drops_items: bool = False


def select_model(results: Sequence[GridResult]) -> ModelChoice:
    """Best utilization gain among settings that do not add boxes.

    Settings whose assortment leaves more items unpacked than the baseline
    are considered only when nothing else is left, since dropping items
    lowers the box count and raises utilization for free. Among the rest,
    ties go to the larger box reduction, then to the earlier grid position.
    If every setting adds boxes, the best utilization gain overall is
    returned and flagged.
    """
    if not results:
        raise ValidationError("no grid results to select from")
    covering = [i for i, r in enumerate(results) if r.extra_unpacked <= 0]
    drops = not covering
    if drops:
        log.warning("every grid setting leaves more items unpacked than the baseline")
        covering = list(range(len(results)))
    admissible = [i for i in covering if results[i].box_reduction_pct >= 0]
    fallback = not admissible
    pool = covering if fallback else admissible
    best = min(pool, key=lambda i: (-results[i].utilization_improvement_pct,
                                    -results[i].box_reduction_pct, i))
    if fallback:
        log.warning("every grid setting increases the box count; choosing %s anyway", results[best].params)
    return ModelChoice(results[best].params, best, fallback, drops)


def finalize(orders: Sequence[Order], pool: CandidatePool, params: TuningParams, k: int,
             method: str = "greedy", seed: int = 0, workers: int = 1) -> Selection:
    """Refit on the merged corpus with the chosen parameters."""
    ev = estimate_effective_volumes(orders, pool, workers)
    weights = compute_weights(ev, pool, params.rho)
    cost = build_cost_matrix(pool, params.delta, params.alpha)
    return solve(SelectionProblem(cost, weights.w, k), method, seed)


def assortment_of(selection: Selection, pool: CandidatePool) -> list[BoxType]:
    return [pool[i] for i in selection.rows]
