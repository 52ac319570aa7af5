"""Command-line entry point: ``msscval {generate,kmeans,validate,exact}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import exact
from .anticluster import PartitionError
from .certify import RunConfig, emit_report, validate
from .core import ClusteringError, Clustering
from .data import DataError, generate_synthetic, ingest_csv, read_labels, write_labels, write_points
from .kmeans import KMeansConfig, multistart

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGRADED = 0, 1, 2, 3

log = logging.getLogger("msscval")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msscval", description="Certify lower bounds for minimum sum-of-squares clustering")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample a Gaussian-mixture instance")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--k", type=_positive_int, required=True)
    g.add_argument("--sigma", type=float, required=True)
    g.add_argument("--dim", type=_positive_int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="points CSV")
    g.add_argument("--labels-out", help="optional CSV of generating components")

    km = sub.add_parser("kmeans", help="multi-start k-means++ / Lloyd")
    km.add_argument("--input", required=True)
    km.add_argument("--header", action="store_true", help="input has a header row")
    km.add_argument("--k", type=_positive_int, required=True)
    km.add_argument("--restarts", type=_positive_int, default=1000)
    km.add_argument("--seed", type=int, default=0)
    km.add_argument("--labels-out", required=True)

    v = sub.add_parser("validate", help="certify a clustering through an anticlustering decomposition")
    v.add_argument("--input", required=True)
    v.add_argument("--header", action="store_true")
    v.add_argument("--labels", help="clustering to validate; k-means multistart is used if omitted")
    v.add_argument("--k", type=_positive_int, required=True)
    v.add_argument("--t", type=_positive_int, required=True, help="number of anticlusters")
    v.add_argument("--r", type=_positive_int, default=15, help="candidate initial partitions")
    v.add_argument("--restarts", type=_positive_int, default=1000, help="k-means restarts when --labels is omitted")
    v.add_argument("--eps-gamma", type=float, default=0.001, help="target LB+ gap, in percent")
    v.add_argument("--time-limit", type=float, help="swap phase limit in seconds (default 4*T minutes)")
    v.add_argument("--budget", type=float, default=60.0, help="seconds per subset certification")
    v.add_argument("--threads", type=_positive_int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report-out")
    v.add_argument("--format", choices=("json", "text"), default="text")

    e = sub.add_parser("exact", help="solve a small instance with branch-and-bound")
    e.add_argument("--input", required=True)
    e.add_argument("--header", action="store_true")
    e.add_argument("--k", type=_positive_int, required=True)
    e.add_argument("--budget", type=float, default=60.0)
    e.add_argument("--labels-out")
    return p


def _generate(args):
    ds, labels = generate_synthetic(args.n, args.k, args.sigma, np.random.default_rng(args.seed), d=args.dim)
    write_points(args.out, ds.points)
    if args.labels_out:
        write_labels(args.labels_out, labels)
    print(f"wrote {ds.n} points in {ds.d} dimensions to {args.out}")
    return EXIT_OK


def _kmeans(args):
    ds = ingest_csv(args.input, args.header)
    cl = multistart(ds, KMeansConfig(args.k, restarts=args.restarts, seed=args.seed))
    write_labels(args.labels_out, cl.assignment)
    print(f"SSE {cl.sse:.10g} over {args.restarts} restarts; labels written to {args.labels_out}")
    return EXIT_OK


def _validate(args):
    ds = ingest_csv(args.input, args.header)
    config = RunConfig(
        k=args.k, t=args.t, restarts_kmeans=args.restarts, restarts_anticluster=args.r,
        eps_gamma=args.eps_gamma / 100.0, swap_time_limit=args.time_limit,
        certify_budget=args.budget, threads=args.threads, seed=args.seed,
    )
    if args.labels:
        labels = read_labels(args.labels)
        if len(labels) != ds.n:
            raise DataError(f"{len(labels)} labels for {ds.n} points", args.labels)
        clustering = Clustering.from_assignment(ds, labels, args.k)
    else:
        clustering = multistart(ds, config.kmeans())
    cert = validate(ds, clustering, config)
    report = emit_report(cert, args.format)
    if args.report_out:
        Path(args.report_out).write_text(report + "\n")
    print(report if args.format == "text" or not args.report_out else emit_report(cert, "text"))
    return EXIT_DEGRADED if cert.degraded else EXIT_OK


def _exact(args):
    ds = ingest_csv(args.input, args.header)
    res = exact.solve(ds, args.k, time_budget=args.budget)
    out = asdict(res)
    out.pop("labels")
    print(json.dumps(out, indent=2))
    if args.labels_out:
        write_labels(args.labels_out, res.labels)
    return EXIT_OK


COMMANDS = {"generate": _generate, "kmeans": _kmeans, "validate": _validate, "exact": _exact}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, ClusteringError, PartitionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
