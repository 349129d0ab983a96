"""Command line front end: convert, train, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys

from threadpoolctl import threadpool_limits

from . import __version__
from .bench import (VARIANTS, config_echo, emit_table, failure_fraction, run_benchmark,
                    run_trial, summarize)
from .data import DatasetError, load_dataset, load_raw, save_canonical
from ._container import FormatError
from .model import ModelConfig, TrainingError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
MAX_FAILED_FRACTION = 0.10


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {v}")
    return v


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    d = ModelConfig()
    p.add_argument("--dataset", required=True,
                   help="cora, citeseer, pubmed (looked up under $BGCN_DATA_DIR) or a file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=_positive_int, default=d.total_epochs)
    p.add_argument("--pretrain-epochs", type=int, default=d.pretrain_epochs)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--dropout-keep", type=_probability, default=d.dropout_keep)
    p.add_argument("--hidden1", type=_positive_int, default=d.hidden1)
    p.add_argument("--hidden2", type=_positive_int, default=d.hidden2)
    p.add_argument("--walk-steps", type=_positive_int, default=d.walk_steps)
    p.add_argument("--mc-v", type=_positive_int, default=d.V)
    p.add_argument("--mc-graphs", type=_positive_int, default=d.num_graphs)
    p.add_argument("--mc-s", type=_positive_int, default=d.S)
    p.add_argument("--kl-weight", type=float, default=None,
                   help="weight on the VI layer's KL term (default 1/num_nodes)")
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--predict-on-sampled-graphs", action="store_true",
                   help="average predictions over sampled adjacencies instead of G_obs")
    p.add_argument("--no-row-normalize", action="store_true")
    p.add_argument("--val-size", type=int, default=500)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--strict-determinism", action="store_true",
                   help="single-threaded BLAS so results are reproducible bit for bit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgcn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="raw citation files -> canonical dataset file")
    c.add_argument("features", help="<name>.content or Pubmed-Diabetes.NODE.paper.tab")
    c.add_argument("cites", help="<name>.cites or Pubmed-Diabetes.DIRECTED.cites.tab")
    c.add_argument("--out", required=True)
    c.add_argument("--name", help="dataset tag (default: from the features file name)")

    t = sub.add_parser("train", help="run one trial and print a JSON line")
    _add_model_flags(t)
    t.add_argument("--variant", choices=VARIANTS, default="bgcn-nrws")
    t.add_argument("--labels-per-class", type=_positive_int, default=20)
    t.add_argument("--checkpoint", help="write the trained model here")

    b = sub.add_parser("bench", help="repeated trials, summary JSON and accuracy table")
    _add_model_flags(b)
    b.add_argument("--variant", choices=VARIANTS, action="append",
                   help="repeatable; default: both variants")
    b.add_argument("--labels-per-class", type=_positive_int, nargs="+", default=[5, 10, 20])
    b.add_argument("--trials", type=_positive_int, default=50)
    b.add_argument("--jobs", type=_positive_int, default=1)
    b.add_argument("--trials-out", help="also write every TrialResult as JSON lines here")
    return parser


def _model_config(args, parser) -> ModelConfig:
    try:
        return ModelConfig(
            hidden1=args.hidden1, hidden2=args.hidden2, dropout_keep=args.dropout_keep,
            lr=args.lr, weight_decay=args.weight_decay, total_epochs=args.epochs,
            pretrain_epochs=args.pretrain_epochs, V=args.mc_v, num_graphs=args.mc_graphs,
            S=args.mc_s, walk_steps=args.walk_steps, kl_weight=args.kl_weight,
            predict_on_sampled_graphs=args.predict_on_sampled_graphs, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def cmd_convert(args) -> int:
    ds = load_raw(args.features, args.cites, args.name)
    save_canonical(ds, args.out)
    s = ds.stats()
    print(f"{s['name']}: n={s['n']} d={s['d']} K={s['K']} edges={s['edges']} "
          f"skipped_citations={s['skipped_edges']}")
    return EXIT_OK


def cmd_train(args, cfg: ModelConfig) -> int:
    ds = load_dataset(args.dataset)
    limits = threadpool_limits(1) if args.strict_determinism else contextlib.nullcontext()
    with limits:
        res = run_trial(ds, args.variant, args.labels_per_class, args.seed, cfg,
                        not args.no_row_normalize, args.val_size, args.test_size,
                        checkpoint=args.checkpoint)
    with _output(args.out) as fh:
        fh.write(res.to_json() + "\n")
    return EXIT_OK


def cmd_bench(args, cfg: ModelConfig) -> int:
    variants = args.variant or list(VARIANTS)
    ds = load_dataset(args.dataset)
    results, failures = run_benchmark(ds, variants, args.labels_per_class, args.trials,
                                      args.seed, cfg, args.jobs, not args.no_row_normalize,
                                      args.val_size, args.test_size)
    echo = config_echo(cfg, base_seed=args.seed, jobs=args.jobs,
                       row_normalize=not args.no_row_normalize,
                       val_size=args.val_size, test_size=args.test_size)
    summary = summarize(results, failures, ds.name, variants, args.labels_per_class,
                        args.trials, echo)
    if args.trials_out:
        with open(args.trials_out, "w") as fh:
            for r in sorted(results, key=lambda r: (r.variant, r.labels_per_class, r.seed)):
                fh.write(r.to_json() + "\n")
    table = emit_table(summary)
    with _output(args.out) as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(table, file=sys.stdout if args.out else sys.stderr)
    total = len(results) + len(failures)
    if failure_fraction(failures, total) > MAX_FAILED_FRACTION:
        print(f"error: {len(failures)} of {total} trials failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "convert":
            return cmd_convert(args)
        cfg = _model_config(args, parser)
        if args.command == "train":
            return cmd_train(args, cfg)
        return cmd_bench(args, cfg)
    except (OSError, DatasetError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
