"""Command-line entry point: ``dgnnflow {bench,crosscheck,sweep,stats,gen-weights}``."""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import DgnnError
from ..models import ModelKind, init_weights
from .bench import RunManifest, ablation_sweep, bench, crosscheck, default_workers, prepare, render_table
from .weights_io import save_weights

_MODELS = {"evolvegcn": "evolvegcn", "gcrn-m2": "gcrn-m2", "stacked": "stacked"}


def _common() -> argparse.ArgumentParser:
    gnn, rnn = default_workers()
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--dataset", default="synthetic",
                   help="edge-list file, or synthetic[:TxN[xD]] (default: synthetic)")
    p.add_argument("--format", default="bc-alpha",
                   help="column mapping: bc-alpha, uci, csv, tsv, ws, or src=0,dst=1,weight=2,time=3[,delim=..]")
    p.add_argument("--model", choices=sorted(_MODELS), default="evolvegcn")
    p.add_argument("--executor", choices=["seq", "v1", "v2"], default="seq")
    p.add_argument("--ablation", choices=["baseline", "o1", "o2"], default="o2")
    p.add_argument("--splitter-seconds", type=int, default=1_814_400)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--gnn-workers", type=int, default=gnn)
    p.add_argument("--rnn-workers", type=int, default=rnn)
    p.add_argument("--queue-depth", type=int, default=64)
    p.add_argument("--block-size", type=int, default=8, help="nodes per FIFO item")
    p.add_argument("--weights", help="DGNW weight file (gen-weights writes here)")
    p.add_argument("--reference-weights", help="trusted weights for the crosscheck oracle")
    p.add_argument("--feedback", action="store_true",
                   help="gcrn-m2: feed stored hidden state back as node features")
    p.add_argument("--report", choices=["json", "table"], default="table")
    p.add_argument("--output", help="also write the JSON report to this file")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgnnflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("bench", parents=[common], help="preprocess, run and time one configuration")
    sub.add_parser("crosscheck", parents=[common], help="compare against sequential and the dense oracle")
    sw = sub.add_parser("sweep", parents=[common], help="Baseline/O1/O2 ablation and worker splits")
    sw.add_argument("--repeats", type=int, default=5)
    sw.add_argument("--splits", default="", help="worker splits, e.g. 1:3,2:2,3:1")
    sub.add_parser("stats", parents=[common], help="snapshot statistics only")
    sub.add_parser("gen-weights", parents=[common], help="write seeded weights to --weights")
    return parser


def _manifest(a) -> RunManifest:
    return RunManifest(dataset=a.dataset, format=a.format, model=a.model, executor=a.executor,
                       ablation=a.ablation, splitter_seconds=a.splitter_seconds,
                       feature_dim=a.feature_dim, hidden_dim=a.hidden_dim, seed=a.seed,
                       gnn_workers=a.gnn_workers, rnn_workers=a.rnn_workers,
                       queue_depth=a.queue_depth, block_size=a.block_size, weights=a.weights,
                       reference_weights=a.reference_weights, feedback=a.feedback)


def _emit(report: dict, a) -> None:
    text = json.dumps(report, indent=2)
    if a.output:
        with open(a.output, "w") as fh:
            fh.write(text + "\n")
    print(text if a.report == "json" else render_table(report))


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        if a.command == "gen-weights":
            if not a.weights:
                raise DgnnError("gen-weights needs --weights <file>")
            w = init_weights(ModelKind.parse(a.model), a.feature_dim, a.hidden_dim, a.seed)
            save_weights(w, a.weights)
            print(f"wrote {len(w)} tensors to {a.weights}")
            return 0
        m = _manifest(a)
        if a.command == "stats":
            p = prepare(m)
            _emit({"manifest": m.as_dict(), "stats": p.stats, "preprocess_ms": p.preprocess_ms}, a)
        elif a.command == "bench":
            _emit(bench(m), a)
        elif a.command == "crosscheck":
            rep = crosscheck(m)
            _emit(rep, a)
            return 0 if rep["crosscheck"]["pass"] else 1
        elif a.command == "sweep":
            splits = [tuple(int(x) for x in s.split(":")) for s in a.splits.split(",") if s]
            _emit(ablation_sweep(m, repeats=a.repeats, splits=splits), a)
    except DgnnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
