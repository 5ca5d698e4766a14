"""Command-line front end.

Exit codes: 0 success, 1 invalid input or arguments, 2 numeric failure in a solver.
"""

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import data_io, plotting
from .errors import HyperloreError, NumericError, SingularityError
from .evaluation import compress, format_sweep_tsv, map_rank_sweep, map_score
from .losses import LossKind
from .product import expand
from .solver import TrConfig
from .svd import first_row_gap, spatial_error

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2

METHODS = [k.value for k in LossKind]


class InputError(HyperloreError):
    pass


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tr_config(args):
    try:
        return TrConfig(
            max_outer_iters=args.max_iters,
            grad_tol=args.grad_tol,
            seed=args.seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _check_rank(r, n, m, method):
    limit = min(n, m) if method == LossKind.SPATIAL_EUCLIDEAN.value else n
    if not 1 <= r <= limit:
        raise InputError(f"--rank must lie in [1, {limit}], got {r}")


def cmd_compress(args):
    xbar, labels = data_io.read_embeddings(args.input, args.model)
    n, m = xbar.shape[0] - 1, xbar.shape[1]
    _check_rank(args.rank, n, m, args.method)
    cfg = _tr_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace.tsv", "w", encoding="utf-8") if args.trace else nullcontext() as trace:
        f, loss, report = compress(args.method, xbar, args.rank, cfg=cfg, init=args.init,
                                   labels=labels, trace=trace)
    data_io.write_factorization(f, out, method=args.method, loss=loss)
    payload = {
        "input": str(args.input),
        "method": args.method,
        "rank": args.rank,
        "n": n,
        "m": m,
        "loss": loss,
        "spatial_loss": spatial_error(f, xbar),
        "max_first_row_gap": float(first_row_gap(f, xbar).max()),
        "stored_floats": f.stored_floats,
        "dense_floats": (n + 1) * m,
        "solve": None if report is None else report.to_dict(include_timing=args.timing),
    }
    _write_json(out / "report.json", payload)
    if report is not None and not args.no_plot:
        plotting.plot_convergence(report, out / "convergence.png",
                                  title=f"{args.method}, r = {args.rank}")
    print(f"loss {loss:.6e}  rank {args.rank}  method {args.method}  -> {out}")
    return EXIT_OK


def _load_for_evaluation(args):
    if args.factorization:
        f = data_io.read_factorization(args.factorization)
        return expand(f), f.labels
    return data_io.read_embeddings(args.embeddings, args.model)


def cmd_evaluate(args):
    xbar, labels = _load_for_evaluation(args)
    graph = data_io.read_edges(args.edges, labels)
    result = map_score(xbar, graph, aggregation=args.aggregation)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    _write_json(args.out, result.to_dict())
    print(f"MAP {result.map:.4f}  mean rank {result.mean_rank:.2f}  "
          f"nodes {result.nodes_evaluated}")
    return EXIT_OK


def _parse_ranks(text, n):
    ranks = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "n":
            ranks.append(n)
            continue
        try:
            ranks.append(int(tok))
        except ValueError:
            raise InputError(f"bad rank {tok!r} in --ranks") from None
    if not ranks:
        raise InputError("--ranks is empty")
    return ranks


def _parse_methods(text):
    methods = [t.strip() for t in text.split(",") if t.strip()]
    for meth in methods:
        if meth not in METHODS:
            raise InputError(f"unknown method {meth!r}; choose from {', '.join(METHODS)}")
    if not methods:
        raise InputError("--methods is empty")
    return methods


def cmd_sweep(args):
    xbar, labels = data_io.read_embeddings(args.input, args.model)
    n, m = xbar.shape[0] - 1, xbar.shape[1]
    graph = data_io.read_edges(args.edges, labels)
    ranks = _parse_ranks(args.ranks, n)
    methods = _parse_methods(args.methods)
    for r in ranks:
        for meth in methods:
            _check_rank(r, n, m, meth)
    cfg = _tr_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = map_rank_sweep(xbar, graph, ranks, methods, cfg=cfg, init=args.init)
    dataset = args.dataset or Path(args.input).stem
    (out / "sweep.tsv").write_text(format_sweep_tsv(rows, dataset), encoding="utf-8")
    _write_json(out / "sweep.json", {
        "dataset": dataset,
        "rows": [dict(row.to_dict(include_timing=args.timing), dataset=dataset) for row in rows],
    })
    if not args.no_plot:
        plotting.plot_sweep(rows, out / "map_vs_rank.png", title=dataset)
    sys.stdout.write(format_sweep_tsv(rows, dataset))
    return EXIT_OK


def cmd_convert(args):
    xbar, labels = data_io.read_embeddings(args.input, args.from_model)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    data_io.write_embeddings(args.out, xbar, labels, model=args.to_model)
    print(f"converted {len(labels)} embeddings from {args.from_model} to {args.to_model}")
    return EXIT_OK


def cmd_synthesize(args):
    try:
        xbar, graph, planted, gold = data_io.synthesize_tree(
            args.branching, args.depth, args.ambient_dim, args.edge_length,
            seed=args.seed, copies=args.copies,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    for p in (args.out_embeddings, args.out_edges):
        Path(p).parent.mkdir(parents=True, exist_ok=True)
    data_io.write_embeddings(args.out_embeddings, xbar, graph.labels, model=args.model)
    data_io.write_edges(args.out_edges, graph)
    print(f"{len(graph.labels)} nodes  {len(graph.edges)} edges  planted rank {planted}  "
          f"gold MAP {gold:.4f}")
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--max-iters", type=int, default=500, help="outer trust-region iterations")
    p.add_argument("--grad-tol", type=float, default=1e-6, help="stop below this gradient norm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=["svd-warm", "random"], default="svd-warm")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock times in JSON output (breaks byte-reproducibility)")
    p.add_argument("--no-plot", action="store_true", help="skip writing figures")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hyperlore",
        description="Low-rank factorization of hyperbolic embeddings.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap on BLAS worker threads (default: $HYPERLORE_THREADS or all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="factor an embedding file")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=["poincare", "hyperboloid"], default="poincare")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--method", choices=METHODS, default="svd")
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--trace", action="store_true", help="write per-iteration trace.tsv")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("evaluate", help="MAP of graph reconstruction")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings")
    src.add_argument("--factorization")
    p.add_argument("--model", choices=["poincare", "hyperboloid"], default="poincare")
    p.add_argument("--edges", required=True)
    p.add_argument("--aggregation", choices=["node", "edge"], default="node")
    p.add_argument("--out", required=True, help="JSON result path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="MAP table over ranks and methods")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=["poincare", "hyperboloid"], default="poincare")
    p.add_argument("--edges", required=True)
    p.add_argument("--ranks", required=True, help="comma-separated; 'n' means full dimension")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--dataset", default=None, help="name for the table (default: input stem)")
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("convert", help="convert between Poincare and hyperboloid files")
    p.add_argument("--input", required=True)
    p.add_argument("--from", dest="from_model", choices=["poincare", "hyperboloid"], required=True)
    p.add_argument("--to", dest="to_model", choices=["poincare", "hyperboloid"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("synthesize", help="write a planted low-rank tree embedding")
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--ambient-dim", type=int, default=50)
    p.add_argument("--edge-length", type=float, default=data_io.DEFAULT_EDGE_LENGTH)
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=["poincare", "hyperboloid"], default="hyperboloid",
                   help="coordinates of the written embedding file")
    p.add_argument("--out-embeddings", required=True)
    p.add_argument("--out-edges", required=True)
    p.set_defaults(func=cmd_synthesize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    try:
        if threads is None:
            threads = data_io.threads_from_env()
        if threads is not None and threads < 1:
            raise InputError("--threads must be positive")
        with threadpool_limits(limits=threads) if threads else nullcontext():
            return args.func(args)
    except (NumericError, SingularityError) as exc:
        print(f"hyperlore: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (HyperloreError, ValueError, OSError) as exc:
        print(f"hyperlore: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
