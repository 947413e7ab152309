"""Command-line entry point: ``geri {convert,train,evaluate,benchmark,grid}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from geri._rng import sub_seed
from geri.benchmark import DEFAULT_MAX_NODES, format_timings, run_benchmark
from geri.evaluation import MULTI_CLASS, MULTI_LABEL, SplitSpec, evaluate, parse_labels
from geri.graph import (
    HeteroNetwork,
    build_hetero,
    is_hetero_file,
    parse_info_network,
    read_hetero,
    write_hetero,
)
from geri.io import read_embeddings, target_matrix, write_embeddings
from geri.pipeline import GRID_VALUES, embed, grid_search
from geri.sgns import TrainConfig, walk_start_nodes
from geri.walks import WalkConfig, preprocess_bias, simulate_walks, write_walks

log = logging.getLogger("geri")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _add_inputs(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network input")
    g.add_argument("--edges", required=True, help="edge list 'src dst [weight]', or a converted #hetero file")
    g.add_argument("--node-text", help="node text 'node word count' (not needed for #hetero input)")
    g.add_argument("--edge-text", help="edge text 'node_i node_j word count'")


def _add_walk(p: argparse.ArgumentParser, with_pqr: bool = True) -> None:
    g = p.add_argument_group("random walks")
    if with_pqr:
        g.add_argument("--p", type=float, default=1.0, help="return parameter")
        g.add_argument("--q", type=float, default=1.0, help="out-target parameter")
        g.add_argument("--r", type=float, default=1.0, help="out-bridge parameter")
    g.add_argument("--walk-length", type=int, default=150, help="nodes per walk (l)")
    g.add_argument("--walks-per-node", type=int, default=10, help="walks started from each node (gamma)")
    g.add_argument("--window", type=int, default=10, help="context window size (tau)")
    g.add_argument(
        "--bias-mode", choices=("auto", "precompute", "rejection"), default="auto",
        help="second-step sampling: per-edge alias tables or rejection sampling",
    )


def _add_train(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--dim", type=int, default=128, help="embedding dimension (d)")
    g.add_argument("--negatives", type=int, default=5, help="negative samples per pair (k)")
    g.add_argument("--lambda1", type=float, default=1.0, help="learning-rate scale for bridge centers")
    g.add_argument("--lr", type=float, default=0.025, help="initial learning rate")
    g.add_argument("--workers", type=int, default=1, help="training threads; 1 is bit-reproducible")
    g.add_argument("--walk-starts", choices=("all", "targets"), default="all", help="nodes that start walks")
    g.add_argument("--two-matrix", action="store_true", help="separate context vectors (ablation)")


def _add_split(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evaluation")
    g.add_argument("--labels", required=True, help="label file 'node label [label ...]'")
    g.add_argument("--train-fraction", type=float, default=0.5, help="share of labeled nodes used for training")
    g.add_argument("--repeats", type=int, default=10, help="random splits averaged")
    g.add_argument("--C", type=float, default=100.0, help="inverse L2 strength of the logistic regression")
    g.add_argument("--uniform-split", action="store_true", help="split uniformly instead of stratified by label")
    g.add_argument(
        "--label-mode", choices=(MULTI_CLASS, MULTI_LABEL), default=None,
        help="inferred from the label file when omitted",
    )
    g.add_argument(
        "--threshold", type=float, default=None,
        help="multilabel: predict labels with probability above this instead of the top-k rule",
    )


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed for every random component")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="geri", description="Graph embedding with text-derived bridge nodes.", formatter_class=fmt
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("convert", help="build the heterogeneous network and write it", formatter_class=fmt)
    _add_inputs(p)
    p.add_argument("--output", required=True, help="destination #hetero file")

    p = sub.add_parser("train", help="learn embeddings", formatter_class=fmt)
    _add_inputs(p)
    _add_walk(p)
    _add_train(p)
    _add_seed(p)
    p.add_argument("--output", required=True, help="embedding file")
    p.add_argument("--binary", action="store_true", help="write float32 vectors instead of text")
    p.add_argument("--emit-bridges", action="store_true", help="append bridge rows named w<word>")
    p.add_argument("--walks-output", help="also write the first pass of walks here, one per line")

    p = sub.add_parser("evaluate", help="score embeddings on node classification", formatter_class=fmt)
    p.add_argument("--embeddings", required=True, help="embedding file written by 'train'")
    _add_split(p)
    _add_seed(p)
    p.add_argument("--output", help="TSV report (stdout when omitted)")

    p = sub.add_parser("benchmark", help="time training on Erdos-Renyi graphs", formatter_class=fmt)
    p.add_argument("--counts", default="1000,10000,100000", help="comma-separated node counts")
    p.add_argument("--degree", type=float, default=10.0, help="expected degree")
    p.add_argument("--repeats", type=int, default=10, help="timed runs averaged per node count")
    p.add_argument("--max-nodes", type=int, default=DEFAULT_MAX_NODES, help="refuse node counts above this")
    _add_walk(p)
    _add_train(p)
    _add_seed(p)
    p.add_argument("--output", help="TSV timings (stdout when omitted)")

    p = sub.add_parser("grid", help="grid-search (p, q, r) on validation data", formatter_class=fmt)
    _add_inputs(p)
    _add_walk(p, with_pqr=False)
    _add_train(p)
    _add_split(p)
    _add_seed(p)
    p.add_argument(
        "--grid", default=",".join(f"{v:g}" for v in GRID_VALUES),
        help="comma-separated values tried for each of p, q and r",
    )
    p.add_argument("--output", help="TSV report (stdout when omitted)")
    p.add_argument("--validation-output", help="TSV of mean validation Micro-F1 per configuration")
    return parser


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--{what} expects comma-separated numbers, got {text!r}") from None


def _load_network(args) -> HeteroNetwork:
    path = Path(args.edges)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    if is_hetero_file(path):
        return read_hetero(path)
    if not args.node_text:
        raise UsageError("--node-text is required unless --edges is a converted #hetero file")
    return build_hetero(parse_info_network(path, args.node_text, args.edge_text))


def _walk_config(args, **over) -> WalkConfig:
    kw = dict(
        walk_length=args.walk_length, walks_per_node=args.walks_per_node, window=args.window,
        seed=args.seed, bias_mode=args.bias_mode,
    )
    if hasattr(args, "p"):
        kw.update(p=args.p, q=args.q, r=args.r)
    kw.update(over)
    return WalkConfig(**kw)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        dim=args.dim, negatives=args.negatives, lr=args.lr, lambda1=args.lambda1, seed=args.seed,
        workers=args.workers, walk_starts=args.walk_starts, two_matrix=args.two_matrix,
    )


def _split(args) -> SplitSpec:
    return SplitSpec(args.train_fraction, args.repeats, args.seed, stratified=not args.uniform_split)


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_convert(args) -> None:
    net = _load_network(args)
    write_hetero(net, args.output)
    print(f"targets={net.target_count} bridges={net.bridge_count} nodes={net.n_nodes} edges={net.n_edges}")


def cmd_train(args) -> None:
    wcfg, tcfg = _walk_config(args), _train_config(args)
    net = _load_network(args)
    emb = embed(net, wcfg, tcfg)
    write_embeddings(emb, args.output, binary=args.binary, emit_bridges=args.emit_bridges)
    if args.walks_output:
        bias = preprocess_bias(net, wcfg)
        # same streams as the trainer's first pass
        starts = walk_start_nodes(net, tcfg.walk_starts)
        walks = simulate_walks(bias, starts, wcfg.walk_length, sub_seed(tcfg.seed, "walks"))
        write_walks(walks, net, args.walks_output)
    s = emb.stats
    print(
        f"wrote {args.output}: {net.n_nodes} nodes, dim {tcfg.dim}, {s.get('pairs', 0)} pairs, "
        f"{s.get('dead_end_walks', 0)} dead-end walks, {s.get('seconds', 0.0):.2f}s"
    )


def cmd_evaluate(args) -> None:
    split = _split(args)
    path = Path(args.embeddings)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    names, X = read_embeddings(path)
    labels = parse_labels(args.labels, args.label_mode)
    report = evaluate(target_matrix(names, X), labels, split, args.C, args.threshold)
    _emit(report.to_tsv(), args.output)
    print(report.summary())


def cmd_benchmark(args) -> None:
    counts = [int(c) for c in _floats(args.counts, "counts")]
    if not counts:
        raise UsageError("--counts is empty")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    rows = run_benchmark(
        counts, args.degree, args.repeats, _walk_config(args), _train_config(args), args.seed, args.max_nodes
    )
    _emit(format_timings(rows), args.output)


def cmd_grid(args) -> None:
    values = _floats(args.grid, "grid")
    if not values:
        raise UsageError("--grid is empty")
    wcfg, tcfg, split = _walk_config(args), _train_config(args), _split(args)
    for v in values:
        _walk_config(args, p=v)  # rejects non-positive grid values up front
    net = _load_network(args)
    labels = parse_labels(args.labels, args.label_mode)
    result = grid_search(net, labels, wcfg, tcfg, split, args.C, values)
    _emit(result.report.to_tsv(), args.output)
    if args.validation_output:
        Path(args.validation_output).write_text(result.to_tsv(), encoding="utf-8")
    print(result.report.summary())


COMMANDS = {
    "convert": cmd_convert,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "grid": cmd_grid,
}


def _configure_logging() -> None:
    level = os.environ.get("GERI_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError, MemoryError) as exc:
        print(f"geri {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"geri {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
