"""Selection inputs estimated from order history.

* effective volume of each candidate box: item volume it receives when the
  corpus is packed with the whole pool available;
* box weights: effective volume discounted by ``box_volume ** rho``;
* substitution costs ``c[i, j]``: how well box ``i`` stands in for box ``j``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import CandidatePool, Order, ValidationError
from .packer import pack_order


@dataclass(frozen=True)
class TuningParams:
    rho: float
    delta: float
    alpha: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValidationError(f"rho must be > 0, got {self.rho}")
        if not self.delta >= 0:
            raise ValidationError(f"delta must be >= 0, got {self.delta}")
        if not self.alpha >= 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class WeightVector:
    ev: np.ndarray
    w: np.ndarray


def _pack_ev(args):
    order, boxes = args
    res = pack_order(order, boxes)
    return [(inst.assortment_index, inst.packed_volume) for inst in res.instances]


def estimate_effective_volumes(orders: Sequence[Order], pool: CandidatePool, workers: int = 1) -> np.ndarray:
    """Pack every order with the full pool and total the item volume per box type."""
    if not orders:
        raise ValidationError("order corpus is empty")
    boxes = pool.boxes
    jobs = [(o, boxes) for o in orders]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            contributions = list(ex.map(_pack_ev, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        contributions = map(_pack_ev, jobs)
    ev = np.zeros(len(pool))
    # fixed corpus order keeps the float accumulation reproducible
    for per_order in contributions:
        for j, vol in per_order:
            ev[j] += vol
    return ev


def box_volumes(pool: CandidatePool) -> np.ndarray:
    return np.array([b.volume() for b in pool], dtype=float)


def compute_weights(ev, pool: CandidatePool, rho: float) -> WeightVector:
    if not rho > 0:
        raise ValidationError(f"rho must be > 0, got {rho}")
    ev = np.asarray(ev, dtype=float)
    if ev.shape != (len(pool),):
        raise ValidationError(f"ev has shape {ev.shape}, expected ({len(pool)},)")
    if np.any(ev < 0):
        raise ValidationError("effective volumes must be non-negative")
    return WeightVector(ev.copy(), ev / box_volumes(pool) ** rho)


# Scalar set definitions, one pair (i, j) at a time. build_cost_matrix uses a
# vectorised route; these stay as the reference it is tested against.

def dominating_set(j: int, pool: CandidatePool) -> set[int]:
    """Boxes at least as large as box j along every sorted dimension."""
    bj = pool[j]
    return {i for i, bi in enumerate(pool)
            if bi.length >= bj.length and bi.depth >= bj.depth and bi.height >= bj.height}


def neighbor_set(j: int, pool: CandidatePool, delta: float) -> set[int]:
    """Boxes whose every dimension lies within +-delta of box j's."""
    if delta < 0:
        raise ValidationError(f"delta must be >= 0, got {delta}")
    bj = pool[j]
    return {i for i, bi in enumerate(pool)
            if all(b - delta <= a <= b + delta for a, b in zip(bi.dims, bj.dims))}


def strictly_smaller_set(j: int, pool: CandidatePool) -> set[int]:
    bj = pool[j]
    return {i for i, bi in enumerate(pool)
            if bi.length < bj.length and bi.depth < bj.depth and bi.height < bj.height}


def substitution_cost(i: int, j: int, pool: CandidatePool, delta: float, alpha: float) -> float:
    bi, bj = pool[i], pool[j]
    ratio = bj.volume() / bi.volume()
    if bi.length >= bj.length and bi.depth >= bj.depth and bi.height >= bj.height:
        return -ratio
    near = all(b - delta <= a <= b + delta for a, b in zip(bi.dims, bj.dims))
    smaller = bi.length < bj.length and bi.depth < bj.depth and bi.height < bj.height
    if near and not smaller:
        return -ratio / (math.ceil(ratio) + alpha)
    return 0.0


def build_cost_matrix(pool: CandidatePool, delta: float, alpha: float, block: int = 512) -> np.ndarray:
    """Dense n x n substitution-cost matrix; rows substitute, columns are substituted."""
    if delta < 0 or alpha < 0:
        raise ValidationError(f"delta and alpha must be >= 0, got {delta}, {alpha}")
    dims = np.array([b.dims for b in pool], dtype=float)
    vol = box_volumes(pool)
    n = len(pool)
    cost = np.zeros((n, n))
    for start in range(0, n, block):
        cols = slice(start, min(n, start + block))
        di = dims[:, None, :]            # rows i
        dj = dims[None, cols, :]         # columns j
        ratio = vol[None, cols] / vol[:, None]
        dominates = np.all(di >= dj, axis=2)
        near = np.all((di >= dj - delta) & (di <= dj + delta), axis=2)
        smaller = np.all(di < dj, axis=2)
        partial = -ratio / (np.ceil(ratio) + alpha)
        cost[:, cols] = np.where(dominates, -ratio, np.where(near & ~smaller, partial, 0.0))
    return cost
