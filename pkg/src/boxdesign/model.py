"""Core domain types: boxes, items, orders and the candidate pool."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterator, Sequence


class ValidationError(ValueError):
    """Raised when an input violates a domain precondition."""


def canonicalize(dims: Sequence[float], names: Sequence[str] = ("length", "depth", "height")) -> tuple[float, float, float]:
    """Return the three dimensions sorted descending.

    Raises ValidationError naming the field when a value is non-positive
    or non-finite.
    """
    if len(dims) != 3:
        raise ValidationError(f"expected 3 dimensions, got {len(dims)}")
    out = []
    for name, value in zip(names, dims):
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(f"non-finite dimension: {name}={value!r}")
        if value <= 0:
            raise ValidationError(f"non-positive dimension: {name}={value!r}")
        out.append(value)
    a, b, c = sorted(out, reverse=True)
    return a, b, c


def _positive(name: str, value: float, allow_inf: bool = False) -> float:
    value = float(value)
    if math.isnan(value) or value <= 0 or (value == math.inf and not allow_inf):
        raise ValidationError(f"non-positive {name}: {value!r}")
    return value


@dataclass(frozen=True)
class BoxType:
    """A shipping box; dimensions are stored sorted so length >= depth >= height."""

    id: str
    length: float
    depth: float
    height: float
    max_weight: float = math.inf

    def __post_init__(self):
        dims = canonicalize((self.length, self.depth, self.height))
        object.__setattr__(self, "length", dims[0])
        object.__setattr__(self, "depth", dims[1])
        object.__setattr__(self, "height", dims[2])
        object.__setattr__(self, "max_weight", _positive("max_weight", self.max_weight, allow_inf=True))

    @property
    def dims(self) -> tuple[float, float, float]:
        return (self.length, self.depth, self.height)

    def volume(self) -> float:
        return self.length * self.depth * self.height

    def key(self) -> tuple[float, float, float, float]:
        return (self.length, self.depth, self.height, self.max_weight)


@dataclass(frozen=True)
class Item:
    sku_id: str
    length: float
    depth: float
    height: float
    weight: float

    def __post_init__(self):
        dims = canonicalize((self.length, self.depth, self.height))
        object.__setattr__(self, "length", dims[0])
        object.__setattr__(self, "depth", dims[1])
        object.__setattr__(self, "height", dims[2])
        object.__setattr__(self, "weight", _positive("weight", self.weight))

    @property
    def dims(self) -> tuple[float, float, float]:
        return (self.length, self.depth, self.height)

    @property
    def volume(self) -> float:
        return self.length * self.depth * self.height


@dataclass(frozen=True)
class OrderLine:
    item: Item
    quantity: int = 1

    def __post_init__(self):
        if int(self.quantity) != self.quantity or self.quantity < 1:
            raise ValidationError(f"quantity must be an integer >= 1, got {self.quantity!r}")


@dataclass(frozen=True)
class Order:
    order_id: str
    lines: tuple[OrderLine, ...]

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if not self.lines:
            raise ValidationError(f"order {self.order_id!r} has no lines")

    @classmethod
    def of(cls, order_id: str, items: Sequence[Item]) -> "Order":
        """Build an order with one line per item (quantity 1)."""
        return cls(order_id, tuple(OrderLine(it, 1) for it in items))

    def units(self) -> list[Item]:
        """Expand lines into one entry per physical unit, in line order."""
        return [line.item for line in self.lines for _ in range(line.quantity)]

    @property
    def n_units(self) -> int:
        return sum(line.quantity for line in self.lines)

    @property
    def volume(self) -> float:
        return sum(line.item.volume * line.quantity for line in self.lines)


@dataclass(frozen=True)
class CandidatePool:
    """The n candidate box sizes, addressable by position j."""

    boxes: tuple[BoxType, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.boxes:
            raise ValidationError("candidate pool must contain at least one box")
        seen: dict[tuple, str] = {}
        for box in self.boxes:
            if box.key() in seen:
                raise ValidationError(f"duplicate box {box.id!r} matches {seen[box.key()]!r}")
            seen[box.key()] = box.id

    def __len__(self) -> int:
        return len(self.boxes)

    def __getitem__(self, j: int) -> BoxType:
        return self.boxes[j]

    def __iter__(self) -> Iterator[BoxType]:
        return iter(self.boxes)

    @property
    def ids(self) -> list[str]:
        return [b.id for b in self.boxes]

    def index_of(self, box_id: str) -> int:
        for j, b in enumerate(self.boxes):
            if b.id == box_id:
                return j
        raise KeyError(box_id)


def _grid(min_dim: float, max_dim: float, step: float) -> list[float]:
    # integer multiples of step avoid cumulative float drift
    values = []
    i = 0
    while True:
        v = min_dim + i * step
        if v > max_dim + 1e-9 * max(1.0, abs(max_dim)):
            break
        values.append(v)
        i += 1
    return values


def generate_candidate_pool(min_dim: float, max_dim: float, step: float,
                            max_weight: float = math.inf) -> CandidatePool:
    """Enumerate every sorted triple over an arithmetic dimension grid."""
    if not (min_dim > 0 and max_dim >= min_dim):
        raise ValidationError(f"need 0 < min_dim <= max_dim, got {min_dim}, {max_dim}")
    if not step > 0:
        raise ValidationError(f"step must be positive, got {step}")
    values = _grid(min_dim, max_dim, step)
    if not values:
        raise ValidationError("empty dimension grid")
    boxes = []
    for c, b, a in combinations_with_replacement(values, 3):
        # combinations come ascending; (a, b, c) is the descending triple
        boxes.append(BoxType(f"B{a:g}x{b:g}x{c:g}", a, b, c, max_weight))
    boxes.sort(key=lambda bx: (bx.volume(), bx.dims))
    return CandidatePool(tuple(boxes))
