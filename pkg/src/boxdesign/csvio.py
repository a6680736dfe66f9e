"""CSV and JSON-lines readers/writers for boxes, SKUs, orders and results."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import BoxType, CandidatePool, Item, Order, OrderLine, ValidationError
from .packer import PackingResult, trace_records
from .solver import Selection

BOX_COLUMNS = ("box_id", "length", "depth", "height", "max_weight")
SKU_COLUMNS = ("sku_id", "length", "depth", "height", "weight")
ORDER_COLUMNS = ("order_id", "sku_id", "quantity")


class InputError(ValidationError):
    """A malformed input file; the message carries file and line."""


def fmt(x: float) -> str:
    """17 significant digits: enough for an exact float round trip."""
    return format(float(x), ".17g")


def _rows(path, required: Sequence[str]):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot open: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}:1: missing column(s): {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, row


def _number(path, line, row, column, cast=float):
    raw = (row.get(column) or "").strip()
    try:
        return cast(raw)
    except ValueError:
        raise InputError(f"{path}:{line}: column {column!r}: cannot parse {raw!r}") from None


def read_boxes(path) -> CandidatePool:
    boxes = []
    for line, row in _rows(path, BOX_COLUMNS):
        try:
            dims = (_number(path, line, row, c) for c in BOX_COLUMNS[1:4])
            # blank max_weight means no limit
            cap = _number(path, line, row, "max_weight") if (row.get("max_weight") or "").strip() else math.inf
            boxes.append(BoxType(row["box_id"].strip(), *dims, cap))
        except ValidationError as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"{path}:{line}: {exc}") from None
    try:
        return CandidatePool(tuple(boxes))
    except ValidationError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_baseline(path, pool: CandidatePool | None = None) -> list[BoxType]:
    """A baseline is either full box rows or a ``box_id`` column naming pool boxes."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if all(c in header for c in BOX_COLUMNS):
        return list(read_boxes(path).boxes)
    if pool is None:
        raise InputError(f"{path}:1: id-only baseline needs a box pool to resolve against")
    out = []
    for line, row in _rows(path, ("box_id",)):
        try:
            out.append(pool[pool.index_of(row["box_id"].strip())])
        except KeyError:
            raise InputError(f"{path}:{line}: unknown box_id {row['box_id']!r}") from None
    if not out:
        raise InputError(f"{path}: baseline is empty")
    return out


def read_skus(path) -> dict[str, Item]:
    skus: dict[str, Item] = {}
    for line, row in _rows(path, SKU_COLUMNS):
        sku = row["sku_id"].strip()
        if sku in skus:
            raise InputError(f"{path}:{line}: duplicate sku_id {sku!r}")
        try:
            skus[sku] = Item(sku, *(_number(path, line, row, c) for c in SKU_COLUMNS[1:]))
        except ValidationError as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"{path}:{line}: {exc}") from None
    return skus


def read_orders(path, skus: dict[str, Item]) -> list[Order]:
    """Group order lines by order_id; orders keep first-appearance order."""
    lines: dict[str, list[OrderLine]] = {}
    for line, row in _rows(path, ORDER_COLUMNS):
        sku = row["sku_id"].strip()
        if sku not in skus:
            raise InputError(f"{path}:{line}: unknown sku_id {sku!r}")
        qty = _number(path, line, row, "quantity", int)
        if qty < 1:
            raise InputError(f"{path}:{line}: quantity must be >= 1, got {qty}")
        lines.setdefault(row["order_id"].strip(), []).append(OrderLine(skus[sku], qty))
    return [Order(oid, tuple(ls)) for oid, ls in lines.items()]


def write_boxes(path, boxes: Iterable[BoxType]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BOX_COLUMNS)
        for b in boxes:
            w.writerow([b.id, fmt(b.length), fmt(b.depth), fmt(b.height), fmt(b.max_weight)])


def write_skus(path, items: Iterable[Item]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SKU_COLUMNS)
        for it in items:
            w.writerow([it.sku_id, fmt(it.length), fmt(it.depth), fmt(it.height), fmt(it.weight)])


def write_orders(path, orders: Iterable[Order]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORDER_COLUMNS)
        for o in orders:
            for ln in o.lines:
                w.writerow([o.order_id, ln.item.sku_id, ln.quantity])


def write_weights(path, pool: CandidatePool, ev, w) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["box_id", "ev", "w"])
        for box, e, wt in zip(pool, ev, w):
            out.writerow([box.id, fmt(e), fmt(wt)])


def read_weights(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    ids, ev, w = [], [], []
    for line, row in _rows(path, ("box_id", "ev", "w")):
        ids.append(row["box_id"])
        ev.append(_number(path, line, row, "ev"))
        w.append(_number(path, line, row, "w"))
    return ids, np.array(ev), np.array(w)


def write_cost_matrix(path, cost: np.ndarray, ids: Sequence[str]) -> None:
    """CSV with a header row and first column of box ids; ``.npy`` paths are binary."""
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, cost)
        path.with_suffix(".ids.json").write_text(json.dumps(list(ids)) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["box_id", *ids])
        for rid, row in zip(ids, cost):
            w.writerow([rid, *(fmt(x) for x in row)])


def read_cost_matrix(path) -> tuple[np.ndarray, list[str]]:
    path = Path(path)
    if path.suffix == ".npy":
        ids = json.loads(path.with_suffix(".ids.json").read_text(encoding="utf-8"))
        return np.load(path), ids
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "box_id":
            raise InputError(f"{path}:1: expected header starting with 'box_id'")
        col_ids = header[1:]
        row_ids, values = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InputError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            row_ids.append(row[0])
            try:
                values.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise InputError(f"{path}:{line_no}: {exc}") from None
    if row_ids != col_ids:
        raise InputError(f"{path}: row ids do not match column ids")
    return np.array(values, dtype=float).reshape(len(row_ids), len(col_ids)), row_ids


def write_selection(path, selection: Selection, ids: Sequence[str] | None = None) -> None:
    """One row per selected box; the objective column follows the greedy steps when known."""
    steps = selection.history if len(selection.history) == len(selection.rows) else ()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "row_index", "box_id", "objective_after_step"])
        for rank, row in enumerate(selection.rows, start=1):
            obj = steps[rank - 1] if steps else (selection.objective if rank == len(selection.rows) else "")
            w.writerow([rank, row, ids[row] if ids is not None else "", fmt(obj) if obj != "" else ""])


def write_trace(path, results: Iterable[PackingResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            for rec in trace_records(res):
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
