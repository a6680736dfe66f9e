"""Weighted k-medoids style row selection.

Given an m x n cost matrix and non-negative column weights, pick k rows so
that ``sum_j w[j] * min(cost[S, j])`` is as small as possible. The cost need
not be a metric and m need not equal n.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ValidationError

DEFAULT_EXHAUSTIVE_BUDGET = 2_000_000


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class SelectionProblem:
    cost: np.ndarray
    weights: np.ndarray
    k: int

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if cost.ndim != 2 or cost.shape[0] < 1 or cost.shape[1] < 1:
            raise ValidationError(f"cost must be a non-empty 2-D matrix, got shape {cost.shape}")
        if weights.shape != (cost.shape[1],):
            raise ValidationError(f"weights shape {weights.shape} does not match {cost.shape[1]} columns")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValidationError("weights must be finite and non-negative")
        if not np.all(np.isfinite(cost)):
            raise ValidationError("cost entries must be finite")
        if int(self.k) != self.k or not 1 <= self.k <= cost.shape[0]:
            raise ValidationError(f"k must be in [1, {cost.shape[0]}], got {self.k}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "k", int(self.k))

    @property
    def m(self) -> int:
        return self.cost.shape[0]

    @property
    def n(self) -> int:
        return self.cost.shape[1]


@dataclass(frozen=True)
class Selection:
    rows: tuple[int, ...]
    objective: float
    assignment: np.ndarray
    # objective after each greedy step / EM iteration (EM includes the start)
    history: tuple[float, ...] = field(default=())
    iterations: int = 0


def _check_rows(problem: SelectionProblem, rows: Sequence[int]) -> list[int]:
    rows = [int(r) for r in rows]
    if not rows:
        raise ValidationError("row selection is empty")
    if len(set(rows)) != len(rows):
        raise ValidationError(f"rows are not distinct: {rows}")
    if any(r < 0 or r >= problem.m for r in rows):
        raise ValidationError(f"row index out of range [0, {problem.m}): {rows}")
    return rows


def objective(problem: SelectionProblem, rows: Sequence[int]) -> float:
    rows = _check_rows(problem, rows)
    return float(np.dot(problem.weights, problem.cost[rows].min(axis=0)))


def assign(problem: SelectionProblem, rows: Sequence[int]) -> np.ndarray:
    """Map each column to the selected row holding its minimum (smallest index on ties)."""
    ordered = np.array(sorted(rows))
    return ordered[np.argmin(problem.cost[ordered], axis=0)]


def _selection(problem, rows, history=(), iterations=0) -> Selection:
    return Selection(tuple(int(r) for r in rows), objective(problem, rows), assign(problem, rows),
                     tuple(history), iterations)


def solve_greedy(problem: SelectionProblem) -> Selection:
    """Add rows one at a time, each lowering the weighted column minima the most."""
    scaled = problem.cost * problem.weights[None, :]
    # totals[i] ~ sum_j min(current[j], scaled[i, j]), kept up to date
    # incrementally over the columns whose running minimum dropped. Rows
    # within `slack` of the best approximate total are re-scored exactly so
    # ties resolve to the smallest index just as a full rescan would.
    slack = 1e-9 * max(1.0, float(np.abs(scaled).sum(axis=1).max()))
    totals = scaled.sum(axis=1)
    current = None
    available = np.ones(problem.m, dtype=bool)
    rows: list[int] = []
    history: list[float] = []
    for step in range(problem.k):
        masked = np.where(available, totals, np.inf)
        near = np.flatnonzero(masked <= masked.min() + slack)
        if current is None or near.size == 1:
            best = int(near[0]) if near.size == 1 else int(np.argmin(masked))
        else:
            exact = np.minimum(scaled[near], current[None, :]).sum(axis=1)
            best = int(near[np.argmin(exact)])  # first index on ties
        rows.append(best)
        available[best] = False
        history.append(objective(problem, rows))
        if step == problem.k - 1:
            break
        if current is None:
            current = scaled[best].copy()
            totals = np.minimum(scaled, current[None, :]).sum(axis=1)
            continue
        dropped = np.flatnonzero(scaled[best] < current)
        if dropped.size:
            # min(cur, s) - min(new, s) == max(0, min(cur, s) - new) when new < cur
            diff = scaled[:, dropped]
            np.minimum(diff, current[dropped][None, :], out=diff)
            diff -= scaled[best, dropped][None, :]
            np.maximum(diff, 0.0, out=diff)
            totals -= diff.sum(axis=1)
            current[dropped] = scaled[best, dropped]
    return _selection(problem, rows, history, problem.k)


def solve_em(problem: SelectionProblem, init: Optional[Sequence[int]] = None,
             max_iter: int = 100, seed: int = 0) -> Selection:
    """Alternate column assignment and per-cluster medoid updates.

    The update for a cluster considers every row not already serving as
    another cluster's medoid and keeps the current medoid unless a row is
    strictly cheaper over the cluster's columns.
    """
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    k = problem.k
    if init is None:
        rng = np.random.default_rng(seed)
        medoids = [int(r) for r in rng.choice(problem.m, size=k, replace=False)]
    else:
        medoids = _check_rows(problem, init)
        if len(medoids) != k:
            raise ValidationError(f"init has {len(medoids)} rows, expected {k}")

    w = problem.weights
    history = [objective(problem, medoids)]
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        labels = assign(problem, medoids)
        selected = set(medoids)
        changed = False
        for slot in sorted(range(k), key=lambda s: medoids[s]):
            current = medoids[slot]
            cols = np.flatnonzero(labels == current)
            if cols.size == 0:
                continue
            scores = problem.cost[:, cols] @ w[cols]
            for other in selected - {current}:
                scores[other] = np.inf
            best = int(np.argmin(scores))
            if scores[best] < scores[current]:
                selected.discard(current)
                selected.add(best)
                medoids[slot] = best
                changed = True
        history.append(objective(problem, medoids))
        if not changed:
            break
    return _selection(problem, medoids, history, iterations)


def solve_exhaustive(problem: SelectionProblem, budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
                     chunk: int = 4096) -> Selection:
    """Global optimum by enumerating every k-subset in lexicographic order."""
    total = math.comb(problem.m, problem.k)
    if total > budget:
        raise BudgetExceededError(f"C({problem.m}, {problem.k}) = {total} subsets exceeds budget {budget}")
    w = problem.weights
    best_rows = None
    best_val = np.inf
    combos = itertools.combinations(range(problem.m), problem.k)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        vals = problem.cost[block].min(axis=1) @ w
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = vals[i]
            best_rows = block[i].tolist()
    return _selection(problem, best_rows)
