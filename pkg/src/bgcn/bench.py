"""Single trials, multi-trial benchmarks and the accuracy table."""
from __future__ import annotations

import dataclasses
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources

from threadpoolctl import threadpool_limits

from .data import Dataset, load_dataset, make_random_split, row_normalize
from .graph import gcn_adjacency
from .model import (ModelConfig, accuracy, predict_deterministic, predict_mc, save_checkpoint,
                    train_bgcn, train_gcn)

log = logging.getLogger(__name__)

VARIANTS = ("gcn", "bgcn-nrws")
TABLE_COLUMNS = (5, 10, 20)
PLACEHOLDER = "\u2014"  # em dash for empty cells


@dataclass
class TrialResult:
    dataset: str
    labels_per_class: int
    variant: str
    seed: int
    test_accuracy: float
    val_accuracy: float
    wall_time: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def variant_config(variant: str, base: ModelConfig, seed: int) -> ModelConfig:
    if variant == "gcn":
        return base.replace(vi_layer=False, seed=seed)
    if variant == "bgcn-nrws":
        return base.replace(vi_layer=True, seed=seed)
    raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")


def run_trial(ds: Dataset, variant: str, labels_per_class: int, seed: int,
              base: ModelConfig, normalize: bool = True, val_size: int = 500,
              test_size: int = 1000, checkpoint=None) -> TrialResult:
    """Train and evaluate one model on the random split drawn with ``seed``."""
    t0 = time.perf_counter()
    split = make_random_split(ds, labels_per_class, seed, val_size, test_size)
    cfg = variant_config(variant, base, seed)
    x = row_normalize(ds.features) if normalize else ds.features
    a = gcn_adjacency(ds.graph)
    if variant == "gcn":
        ens = train_gcn(ds.graph, x, ds.labels, ds.num_classes, split.train_idx, cfg)
        probs = predict_deterministic(ens.snapshots[0], a, x)
    else:
        ens = train_bgcn(ds.graph, x, ds.labels, ds.num_classes, split.train_idx, cfg)
        probs = predict_mc(ens, a, x)
    if checkpoint is not None:
        save_checkpoint(ens, checkpoint)
    return TrialResult(ds.name, labels_per_class, variant, seed,
                       accuracy(probs, ds.labels, split.test_idx),
                       accuracy(probs, ds.labels, split.val_idx),
                       max(time.perf_counter() - t0, 1e-9))


# worker-process state for parallel benchmarks
_WORKER_DS: Dataset | None = None


def _init_worker(dataset: str | Dataset) -> None:
    global _WORKER_DS
    _WORKER_DS = dataset if isinstance(dataset, Dataset) else load_dataset(dataset)


def _trial_task(args):
    variant, lpc, seed, base, normalize, val_size, test_size = args
    try:
        with threadpool_limits(1):
            return run_trial(_WORKER_DS, variant, lpc, seed, base, normalize, val_size, test_size)
    except Exception as exc:  # recorded and excluded by the caller
        return {"variant": variant, "labels_per_class": lpc, "seed": seed,
                "error": f"{type(exc).__name__}: {exc}"}


def run_benchmark(dataset: str | Dataset, variants, labels_per_class, trials: int,
                  base_seed: int, base: ModelConfig, jobs: int = 1, normalize: bool = True,
                  val_size: int = 500, test_size: int = 1000):
    """Run every (variant, labels, seed) trial; returns ``(results, failures)``.

    Seeds are ``base_seed .. base_seed + trials - 1`` and are shared across
    variants, so cells are paired run for run.
    """
    tasks = [(v, lpc, base_seed + t, base, normalize, val_size, test_size)
             for v in variants for lpc in labels_per_class for t in range(trials)]
    if jobs <= 1:
        _init_worker(dataset)
        outcomes = [_trial_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(dataset,)) as ex:
            outcomes = list(ex.map(_trial_task, tasks))
    results = [o for o in outcomes if isinstance(o, TrialResult)]
    failures = [o for o in outcomes if not isinstance(o, TrialResult)]
    for f in failures:
        log.warning("trial failed: %s", f)
    return results, failures


def summarize(results: list[TrialResult], failures: list[dict], dataset: str, variants,
              labels_per_class, trials: int, config: dict) -> dict:
    cells = []
    for v in variants:
        for lpc in labels_per_class:
            cell = sorted((r for r in results if r.variant == v and r.labels_per_class == lpc),
                          key=lambda r: r.seed)
            accs = [r.test_accuracy for r in cell]
            failed = sum(1 for f in failures
                         if f["variant"] == v and f["labels_per_class"] == lpc)
            cells.append({
                "variant": v,
                "labels_per_class": lpc,
                "mean": statistics.fmean(accs) if accs else None,
                "std": statistics.stdev(accs) if len(accs) > 1 else (0.0 if accs else None),
                "trials": trials,
                "completed": len(accs),
                "failed": failed,
                "seeds": [r.seed for r in cell],
                "accuracies": accs,
            })
    return {"dataset": dataset, "trials": trials, "cells": cells, "config": config,
            "failures": failures}


def format_percent(x: float) -> str:
    """Fraction -> percent with one decimal, rounding half away from zero."""
    d = Decimal(repr(float(x))) * 100
    return str(d.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def format_cell(mean: float | None, std: float | None) -> str:
    if mean is None:
        return PLACEHOLDER
    return f"{format_percent(mean)} ± {format_percent(std or 0.0)}"


def emit_table(summaries, columns=TABLE_COLUMNS) -> str:
    """Rows are variants, columns labels-per-class; cells ``mean ± std`` in percent."""
    if isinstance(summaries, dict):
        summaries = [summaries]
    if not summaries:
        raise ValueError("emit_table needs at least one summary")
    cells = {}
    rows = []
    for s in summaries:
        for c in s["cells"]:
            cells[(c["variant"], c["labels_per_class"])] = c
            if c["variant"] not in rows:
                rows.append(c["variant"])
    cols = sorted(set(columns) | {lpc for _, lpc in cells})
    header = ["Random Split"] + [f"{c} labels" for c in cols]
    body = []
    for v in rows:
        line = [v]
        for lpc in cols:
            c = cells.get((v, lpc))
            line.append(format_cell(c["mean"], c["std"]) if c else PLACEHOLDER)
        body.append(line)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: " | ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                                for i, (cell, w) in enumerate(zip(r, widths)))
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep, *(fmt(r) for r in body)])


def load_schema(name: str) -> dict:
    return json.loads(resources.files("bgcn").joinpath("schemas", name).read_text())


def config_echo(base: ModelConfig, **extra) -> dict:
    d = dataclasses.asdict(base)
    d.update(extra)
    return d


def failure_fraction(failures, total: int) -> float:
    return len(failures) / total if total else 0.0
