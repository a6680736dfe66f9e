"""Best-fit-first 4D packing (length, depth, height, weight) with order splitting.

An order is packed by trying the assortment's boxes from smallest to largest
volume and taking the first one that holds every remaining unit. When no box
holds them all, the box that admits the most item volume is filled and the
leftover units are packed recursively.

Inside one box, units go in by descending volume. Each unit takes the free
space with the least residual volume that admits it under some axis-aligned
rotation; free spaces are kept as a list of maximal empty cuboids.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .model import BoxType, Item, Order

EPS = 1e-9

# index -> axis permutation applied to the item's canonical dims
ORIENTATIONS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))

Space = tuple[float, float, float, float, float, float]  # x, y, z, dx, dy, dz


class UndefinedMetricError(ArithmeticError):
    """A ratio metric was requested over an empty denominator."""


class Reason(str, enum.Enum):
    DIM_EXCEEDED = "DIM_EXCEEDED"
    WEIGHT_EXCEEDED = "WEIGHT_EXCEEDED"


@dataclass(frozen=True)
class Placement:
    item: Item
    box_index: int
    origin: tuple[float, float, float]
    oriented_dims: tuple[float, float, float]
    orientation: int = 0

    @property
    def end(self) -> tuple[float, float, float]:
        return tuple(o + d for o, d in zip(self.origin, self.oriented_dims))


@dataclass
class BoxInstance:
    box: BoxType
    assortment_index: int
    placements: list[Placement] = field(default_factory=list)

    @property
    def packed_volume(self) -> float:
        return sum(p.item.volume for p in self.placements)

    @property
    def packed_weight(self) -> float:
        return sum(p.item.weight for p in self.placements)


@dataclass(frozen=True)
class Unpacked:
    item: Item
    reason: Reason


@dataclass
class PackingResult:
    order: Order
    instances: list[BoxInstance] = field(default_factory=list)
    unpacked: list[Unpacked] = field(default_factory=list)

    @property
    def box_count(self) -> int:
        return len(self.instances)

    @property
    def packed_volume(self) -> float:
        return sum(inst.packed_volume for inst in self.instances)

    @property
    def box_volume(self) -> float:
        return sum(inst.box.volume() for inst in self.instances)

    @property
    def placements(self) -> list[Placement]:
        return [p for inst in self.instances for p in inst.placements]


def orientations(dims: Sequence[float]) -> Iterator[tuple[int, tuple[float, float, float]]]:
    """Yield (orientation index, rotated dims), skipping duplicate rotations."""
    seen = set()
    for idx, perm in enumerate(ORIENTATIONS):
        rotated = (dims[perm[0]], dims[perm[1]], dims[perm[2]])
        if rotated in seen:
            continue
        seen.add(rotated)
        yield idx, rotated


def item_fits_box(item: Item, box: BoxType) -> bool:
    """Dimension-only check; exact because both triples are sorted descending."""
    return all(a <= b + EPS for a, b in zip(item.dims, box.dims))


def _sort_units(items: Sequence[Item]) -> list[Item]:
    return sorted(items, key=lambda it: (-it.volume, -it.length, -it.depth, -it.height, it.sku_id))


def _overlaps(s: Space, p: Space) -> bool:
    return all(s[a] < p[a] + p[a + 3] - EPS and p[a] < s[a] + s[a + 3] - EPS for a in range(3))


def _contains(outer: Space, inner: Space) -> bool:
    return all(outer[a] <= inner[a] + EPS and inner[a] + inner[a + 3] <= outer[a] + outer[a + 3] + EPS
               for a in range(3))


def _carve(spaces: list[Space], p: Space) -> list[Space]:
    out: list[Space] = []
    for s in spaces:
        if not _overlaps(s, p):
            out.append(s)
            continue
        for a in range(3):
            lo, hi = s[a], s[a] + s[a + 3]
            plo, phi = p[a], p[a] + p[a + 3]
            if plo - lo > EPS:
                piece = list(s)
                piece[a + 3] = plo - lo
                out.append(tuple(piece))
            if hi - phi > EPS:
                piece = list(s)
                piece[a] = phi
                piece[a + 3] = hi - phi
                out.append(tuple(piece))
    kept: list[Space] = []
    for i, s in enumerate(out):
        redundant = False
        for j, t in enumerate(out):
            if i != j and _contains(t, s) and (not _contains(s, t) or j < i):
                redundant = True
                break
        if not redundant:
            kept.append(s)
    kept.sort()
    return kept


def _fill(items: Sequence[Item], box: BoxType, stop_on_reject: bool) -> tuple[list[Placement], list[Item]]:
    spaces: list[Space] = [(0.0, 0.0, 0.0, box.length, box.depth, box.height)]
    placed: list[Placement] = []
    rejected: list[Item] = []
    weight = 0.0
    for item in _sort_units(items):
        best = None
        if weight + item.weight <= box.max_weight + EPS:
            for s in spaces:
                key = None
                for oi, dims in orientations(item.dims):
                    if dims[0] <= s[3] + EPS and dims[1] <= s[4] + EPS and dims[2] <= s[5] + EPS:
                        # residual is orientation-independent, so the first fit wins
                        key = (s[3] * s[4] * s[5] - item.volume, s[0], s[1], s[2], oi)
                        break
                if key is not None and (best is None or key < best[0]):
                    best = (key, s, dims)
        if best is None:
            rejected.append(item)
            if stop_on_reject:
                return placed, rejected
            continue
        (_, x, y, z, oi), _, dims = best
        placed.append(Placement(item, 0, (x, y, z), dims, oi))
        weight += item.weight
        spaces = _carve(spaces, (x, y, z) + dims)
    return placed, rejected


def fit_single_box(items: Sequence[Item], box: BoxType) -> Optional[list[Placement]]:
    """Place every item in one box, or return None.

    Exact for a single item. For several items the heuristic may give up on a
    set that does geometrically fit.
    """
    if not items:
        raise ValueError("fit_single_box needs at least one item")
    if sum(it.weight for it in items) > box.max_weight + EPS:
        return None
    if sum(it.volume for it in items) > box.volume() * (1 + EPS):
        return None
    if not all(item_fits_box(it, box) for it in items):
        return None
    placed, rejected = _fill(items, box, stop_on_reject=True)
    return None if rejected else placed


def _infeasible_reason(item: Item, assortment: Sequence[BoxType]) -> Optional[Reason]:
    dim_ok = [b for b in assortment if item_fits_box(item, b)]
    if not dim_ok:
        return Reason.DIM_EXCEEDED
    if not any(item.weight <= b.max_weight + EPS for b in dim_ok):
        return Reason.WEIGHT_EXCEEDED
    return None


def pack_order(order: Order, assortment: Sequence[BoxType]) -> PackingResult:
    """Pack one order into box instances drawn from ``assortment``.

    Units that fit no single box type on their own are reported in
    ``unpacked`` with a reason; everything else gets placed.
    """
    if not assortment:
        raise ValueError("assortment must be non-empty")
    ranked = sorted(range(len(assortment)),
                    key=lambda i: (assortment[i].volume(), assortment[i].dims, assortment[i].max_weight, i))
    result = PackingResult(order)
    remaining: list[Item] = []
    for item in order.units():
        reason = _infeasible_reason(item, assortment)
        if reason is None:
            remaining.append(item)
        else:
            result.unpacked.append(Unpacked(item, reason))

    while remaining:
        chosen = None
        for i in ranked:
            placements = fit_single_box(remaining, assortment[i])
            if placements is not None:
                chosen = (i, placements, [])
                break
        if chosen is None:
            chosen = _best_partial(remaining, assortment, ranked)
        i, placements, leftover = chosen
        index = len(result.instances)
        result.instances.append(BoxInstance(
            assortment[i], i,
            [Placement(p.item, index, p.origin, p.oriented_dims, p.orientation) for p in placements]))
        remaining = leftover
    return result


def _best_partial(items: list[Item], assortment: Sequence[BoxType], ranked: list[int]):
    # largest admitted volume wins; ties go to the smaller box
    best = None
    best_key = None
    for rank in range(len(ranked) - 1, -1, -1):
        i = ranked[rank]
        box = assortment[i]
        if best_key is not None and box.volume() < -best_key[0] - EPS:
            continue
        placed, rejected = _fill(items, box, stop_on_reject=False)
        if not placed:
            continue
        key = (-sum(p.item.volume for p in placed), box.volume(), rank)
        if best_key is None or key < best_key:
            best_key = key
            best = (i, placed, rejected)
    if best is None:
        # unreachable: every remaining unit fits some box alone
        raise RuntimeError("no box admits any remaining item")
    return best


def utilization(result: PackingResult) -> float:
    """Packed item volume over used box volume for one packing result."""
    if not result.instances:
        raise UndefinedMetricError("utilization undefined: no boxes used")
    return result.packed_volume / result.box_volume


def trace_records(result: PackingResult) -> Iterator[dict]:
    """One flat record per placed unit, for line-delimited trace output."""
    for inst_index, inst in enumerate(result.instances):
        for p in inst.placements:
            yield {
                "order_id": result.order.order_id,
                "box_instance": inst_index,
                "box_id": inst.box.id,
                "sku_id": p.item.sku_id,
                "origin": list(p.origin),
                "oriented_dims": list(p.oriented_dims),
            }
