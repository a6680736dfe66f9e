"""Command-line entry point.

Subcommands: pack, weights, costs, select, evaluate, design. Every option can
also come from an INI config (``--config run.ini``, section ``[boxdesign]``);
command-line flags override the file. Log level comes from BOXDESIGN_LOG.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import platform
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from . import csvio
from .analytics import TuningParams, build_cost_matrix, compute_weights, estimate_effective_volumes
from .model import CandidatePool, ValidationError
from .packer import pack_order
from .pipeline import (SplitSpec, compare, evaluate_assortment, finalize, grid_search, make_grid,
                       select_model, solve, split_corpus)
from .solver import SelectionProblem

log = logging.getLogger("boxdesign")

SECTION = "boxdesign"
# option name -> (type, default)
OPTIONS = {
    "boxes": (str, None),
    "skus": (str, None),
    "orders": (str, None),
    "baseline": (str, None),
    "assortment": (str, None),
    "costs": (str, None),
    "weights": (str, None),
    "k": (int, None),
    "rho": (float, None),
    "delta": (float, None),
    "alpha": (float, None),
    "grid": (str, "full"),
    "solver": (str, "greedy"),
    "seed": (int, 0),
    "threads": (int, 1),
    "out": (str, "out"),
    "train_fraction": (float, 0.6),
    "validation_fraction": (float, 0.2),
    "test_fraction": (float, 0.2),
}


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


@contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (ValidationError, OSError, ArithmeticError, KeyError, RuntimeError) as exc:
        raise StageError(name, exc) from exc


def parse_grid(text: str) -> list[TuningParams]:
    """``full`` or ``rho=0.25,0.5;delta=0,1;alpha=0,2`` (missing axes keep the full grid's values)."""
    text = text.strip()
    if text in ("", "full"):
        return make_grid()
    axes = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        name, _, values = part.partition("=")
        name = name.strip()
        if name not in ("rho", "delta", "alpha") or not values:
            raise ValidationError(f"bad grid component {part!r}")
        axes[name + "s"] = [float(v) for v in values.split(",")]
    return make_grid(**axes)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [boxdesign] section")
    for name, (typ, _) in OPTIONS.items():
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)

    parser = argparse.ArgumentParser(prog="boxdesign", description="Shipping box assortment design.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("pack", parents=[common], help="pack orders with an assortment; write trace and report")
    sub.add_parser("weights", parents=[common], help="effective volumes and box weights for a pool")
    sub.add_parser("costs", parents=[common], help="substitution cost matrix for a pool")
    sub.add_parser("select", parents=[common], help="choose k boxes from costs and weights")
    sub.add_parser("evaluate", parents=[common], help="score an assortment against a baseline")
    sub.add_parser("design", parents=[common], help="full split / tune / refit / test protocol")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {name: default for name, (_, default) in OPTIONS.items()}
    if args.config:
        parser = configparser.ConfigParser()
        if not parser.read(args.config, encoding="utf-8"):
            raise ValidationError(f"cannot read config {args.config}")
        if SECTION not in parser:
            raise ValidationError(f"{args.config}: missing [{SECTION}] section")
        base = Path(args.config).parent
        for key, raw in parser[SECTION].items():
            if key not in OPTIONS:
                raise ValidationError(f"{args.config}: unknown key {key!r}")
            typ = OPTIONS[key][0]
            value = typ(raw)
            # relative paths in a config file are relative to the file
            if typ is str and key in ("boxes", "skus", "orders", "baseline", "assortment", "costs",
                                      "weights", "out") and not os.path.isabs(value):
                value = str(base / value)
            cfg[key] = value
    for name in OPTIONS:
        value = getattr(args, name)
        if value is not None:
            cfg[name] = value
    if cfg["threads"] < 1:
        raise ValidationError("threads must be >= 1")
    if cfg["k"] is not None and cfg["k"] < 1:
        raise ValidationError("k must be >= 1")
    return cfg


def _require(cfg, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _params(cfg) -> TuningParams:
    _require(cfg, "rho", "delta", "alpha")
    return TuningParams(cfg["rho"], cfg["delta"], cfg["alpha"])


def _load_orders(cfg):
    _require(cfg, "skus", "orders")
    skus = csvio.read_skus(cfg["skus"])
    return csvio.read_orders(cfg["orders"], skus)


def _write_report(path, reports, extra=()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("assortment_label,corpus,n_orders,total_boxes_used,utilization,unpacked_items,"
                 "packed_volume,box_volume,box_ids\n")
        for label, r in reports:
            fh.write(f"{label},{r.corpus},{r.n_orders},{r.total_boxes_used},{csvio.fmt(r.utilization)},"
                     f"{r.unpacked_items},{csvio.fmt(r.packed_volume)},{csvio.fmt(r.box_volume)},"
                     f"{';'.join(r.assortment)}\n")
    if extra:
        with open(Path(path).with_name(Path(path).stem + "_comparison.csv"), "w", encoding="utf-8") as fh:
            fh.write("metric,value\n")
            for key, value in extra:
                fh.write(f"{key},{value}\n")


def cmd_pack(cfg) -> int:
    out = Path(cfg["out"])
    with stage("load"):
        _require(cfg, "boxes")
        assortment = list(csvio.read_boxes(cfg["boxes"]).boxes)
        orders = _load_orders(cfg)
    with stage("pack"):
        out.mkdir(parents=True, exist_ok=True)
        results = [pack_order(o, assortment) for o in orders]
        csvio.write_trace(out / "trace.jsonl", results)
        report = evaluate_assortment(assortment, orders, "orders", cfg["threads"])
        _write_report(out / "report.csv", [("assortment", report)])
    print(f"packed {len(orders)} orders into {report.total_boxes_used} boxes, "
          f"utilization {report.utilization:.4f}, unpacked {report.unpacked_items}")
    return 0


def cmd_weights(cfg) -> int:
    out = Path(cfg["out"])
    with stage("load"):
        _require(cfg, "boxes", "rho")
        pool = csvio.read_boxes(cfg["boxes"])
        orders = _load_orders(cfg)
    with stage("weights"):
        ev = estimate_effective_volumes(orders, pool, cfg["threads"])
        wv = compute_weights(ev, pool, cfg["rho"])
        out.mkdir(parents=True, exist_ok=True)
        csvio.write_weights(out / "weights.csv", pool, wv.ev, wv.w)
    print(f"wrote {out / 'weights.csv'}")
    return 0


def cmd_costs(cfg) -> int:
    out = Path(cfg["out"])
    with stage("load"):
        _require(cfg, "boxes", "delta", "alpha")
        pool = csvio.read_boxes(cfg["boxes"])
    with stage("costs"):
        cost = build_cost_matrix(pool, cfg["delta"], cfg["alpha"])
        out.mkdir(parents=True, exist_ok=True)
        csvio.write_cost_matrix(out / "costs.csv", cost, pool.ids)
    print(f"wrote {out / 'costs.csv'}")
    return 0


def cmd_select(cfg) -> int:
    out = Path(cfg["out"])
    with stage("load"):
        _require(cfg, "k")
        if cfg["costs"] and cfg["weights"]:
            cost, ids = csvio.read_cost_matrix(cfg["costs"])
            w_ids, _, w = csvio.read_weights(cfg["weights"])
            if w_ids != ids:
                raise ValidationError("weights box_ids do not match cost matrix columns")
        else:
            _require(cfg, "boxes")
            pool = csvio.read_boxes(cfg["boxes"])
            params = _params(cfg)
            orders = _load_orders(cfg)
            ids = pool.ids
            w = compute_weights(estimate_effective_volumes(orders, pool, cfg["threads"]), pool, params.rho).w
            cost = build_cost_matrix(pool, params.delta, params.alpha)
    with stage("select"):
        selection = solve(SelectionProblem(cost, w, cfg["k"]), cfg["solver"], cfg["seed"])
        out.mkdir(parents=True, exist_ok=True)
        csvio.write_selection(out / "selection.csv", selection, ids)
    print(f"objective {selection.objective:.6g}; selected {', '.join(ids[i] for i in selection.rows)}")
    return 0


def cmd_evaluate(cfg) -> int:
    out = Path(cfg["out"])
    with stage("load"):
        _require(cfg, "assortment", "baseline")
        pool = csvio.read_boxes(cfg["boxes"]) if cfg["boxes"] else None
        candidate = csvio.read_baseline(cfg["assortment"], pool)
        baseline = csvio.read_baseline(cfg["baseline"], pool)
        orders = _load_orders(cfg)
    with stage("evaluate"):
        cand_r = evaluate_assortment(candidate, orders, "orders", cfg["threads"])
        base_r = evaluate_assortment(baseline, orders, "orders", cfg["threads"])
        reduction, gain = compare(cand_r, base_r)
        out.mkdir(parents=True, exist_ok=True)
        _write_report(out / "evaluation.csv", [("candidate", cand_r), ("baseline", base_r)],
                      [("box_reduction_pct", csvio.fmt(reduction)),
                       ("utilization_improvement_pct", csvio.fmt(gain)),
                       ("utilization_improvement_definition", "relative")])
    print(f"box reduction {reduction:.3f}%, utilization improvement {gain:.3f}% (relative)")
    return 0


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_design(cfg) -> int:
    out = Path(cfg["out"])
    with stage("load"):
        _require(cfg, "boxes", "baseline", "k")
        pool: CandidatePool = csvio.read_boxes(cfg["boxes"])
        baseline = csvio.read_baseline(cfg["baseline"], pool)
        orders = _load_orders(cfg)
        grid = parse_grid(cfg["grid"])
        if cfg["k"] > len(pool):
            raise ValidationError(f"k={cfg['k']} exceeds pool size {len(pool)}")
    out.mkdir(parents=True, exist_ok=True)
    with stage("split"):
        spec = SplitSpec(cfg["train_fraction"], cfg["validation_fraction"], cfg["test_fraction"], cfg["seed"])
        train, validation, test = split_corpus(orders, spec)
        for name, part in (("train", train), ("validation", validation), ("test", test)):
            if not part:
                raise ValidationError(f"{name} split is empty; use more orders or other fractions")
        with open(out / "split.csv", "w", encoding="utf-8") as fh:
            fh.write("order_id,part\n")
            for name, part in (("train", train), ("validation", validation), ("test", test)):
                for o in part:
                    fh.write(f"{o.order_id},{name}\n")
    with stage("grid_search"):
        results = grid_search(train, validation, pool, baseline, cfg["k"], grid,
                              method=cfg["solver"], seed=cfg["seed"], workers=cfg["threads"])
        with open(out / "grid.csv", "w", encoding="utf-8") as fh:
            fh.write("rho,delta,alpha,box_reduction_pct,utilization_improvement_pct,box_ids\n")
            for r in results:
                p = r.params
                fh.write(f"{p.rho:g},{p.delta:g},{p.alpha:g},{csvio.fmt(r.box_reduction_pct)},"
                         f"{csvio.fmt(r.utilization_improvement_pct)},{';'.join(r.assortment)}\n")
    with stage("select_model"):
        choice = select_model(results)
    with stage("finalize"):
        merged = train + validation
        selection = finalize(merged, pool, choice.params, cfg["k"], cfg["solver"], cfg["seed"], cfg["threads"])
        csvio.write_selection(out / "selection.csv", selection, pool.ids)
        ev = estimate_effective_volumes(merged, pool, cfg["threads"])
        wv = compute_weights(ev, pool, choice.params.rho)
        csvio.write_weights(out / "weights.csv", pool, wv.ev, wv.w)
    with stage("test"):
        designed = [pool[i] for i in selection.rows]
        cand_r = evaluate_assortment(designed, test, "test", cfg["threads"])
        base_r = evaluate_assortment(baseline, test, "test", cfg["threads"])
        reduction, gain = compare(cand_r, base_r)
        _write_report(out / "final_report.csv", [("designed", cand_r), ("baseline", base_r)],
                      [("rho", f"{choice.params.rho:g}"), ("delta", f"{choice.params.delta:g}"),
                       ("alpha", f"{choice.params.alpha:g}"),
                       ("selection_fallback", str(choice.sacrifices_boxes).lower()),
                       ("selection_drops_items", str(choice.drops_items).lower()),
                       ("box_reduction_pct", csvio.fmt(reduction)),
                       ("utilization_improvement_pct", csvio.fmt(gain)),
                       ("utilization_improvement_definition", "relative")])
    with stage("manifest"):
        config_blob = json.dumps(cfg, sort_keys=True)
        artifacts = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
        manifest = {
            "seed": cfg["seed"],
            "config": cfg,
            "config_sha256": hashlib.sha256(config_blob.encode()).hexdigest(),
            "versions": {"boxdesign": __version__, "python": platform.python_version(),
                         "numpy": np.__version__},
            "split_sizes": {"train": len(train), "validation": len(validation), "test": len(test)},
            "grid_size": len(grid),
            "artifacts": {p.name: _sha256(p) for p in artifacts},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    print(f"designed {', '.join(b.id for b in designed)} with rho={choice.params.rho:g}, "
          f"delta={choice.params.delta:g}, alpha={choice.params.alpha:g}; test: boxes {reduction:+.2f}%, "
          f"utilization {gain:+.2f}%")
    return 0


COMMANDS = {"pack": cmd_pack, "weights": cmd_weights, "costs": cmd_costs, "select": cmd_select,
            "evaluate": cmd_evaluate, "design": cmd_design}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BOXDESIGN_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        with stage("config"):
            cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except StageError as exc:
        print(f"boxdesign {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
