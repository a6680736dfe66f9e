"""Seeded synthetic corpora and assortments for demos and tests."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import BoxType, Item, Order, OrderLine


def random_item(rng: np.random.Generator, sku_id: str, lo: float = 1.0, hi: float = 10.0,
                max_weight: float = 5.0, integer: bool = True) -> Item:
    dims = rng.integers(int(lo), int(hi) + 1, size=3) if integer else rng.uniform(lo, hi, size=3)
    return Item(sku_id, *dims.astype(float), round(float(rng.uniform(0.1, max_weight)), 3))


def random_orders(n: int, seed: int = 0, max_items: int = 10, lo: float = 1.0, hi: float = 10.0,
                  integer: bool = True) -> list[Order]:
    """Orders of 1..max_items units with random dimensions and weights."""
    rng = np.random.default_rng(seed)
    orders = []
    for o in range(n):
        size = int(rng.integers(1, max_items + 1))
        lines = [OrderLine(random_item(rng, f"s{o}_{i}", lo, hi, integer=integer), 1) for i in range(size)]
        orders.append(Order(f"o{o}", tuple(lines)))
    return orders


def random_assortment(seed: int = 0, size: int = 8, lo: float = 4.0, hi: float = 25.0,
                      weight_range: tuple[float, float] = (10.0, 60.0)) -> list[BoxType]:
    rng = np.random.default_rng(seed)
    boxes = {}
    while len(boxes) < size:
        dims = tuple(float(x) for x in rng.integers(int(lo), int(hi) + 1, size=3))
        box = BoxType(f"r{seed}_{len(boxes)}", *dims, round(float(rng.uniform(*weight_range)), 2))
        boxes.setdefault(box.key(), box)
    return list(boxes.values())


def archetype_corpus(n_orders: int, archetypes: Sequence[tuple[float, float, float]], seed: int = 0,
                     noise_fraction: float = 0.15, noise_hi: float = 4.0) -> list[Order]:
    """Orders dominated by a few item shapes plus some small noise items.

    Each order holds one archetype unit, picked uniformly; a
    ``noise_fraction`` share of orders instead holds 1-3 small random items.
    """
    rng = np.random.default_rng(seed)
    shapes = [Item(f"arch{a}", *dims, 1.0) for a, dims in enumerate(archetypes)]
    orders = []
    for o in range(n_orders):
        if rng.random() < noise_fraction:
            count = int(rng.integers(1, 4))
            items = [random_item(rng, f"noise{o}_{i}", 1.0, noise_hi, max_weight=1.0) for i in range(count)]
            orders.append(Order.of(f"o{o}", items))
        else:
            orders.append(Order(f"o{o}", (OrderLine(shapes[int(rng.integers(len(shapes)))], 1),)))
    return orders
