"""Command line: ``apdtree {gen,build,eval,bench}``.

Data (CSV, summaries) goes to stdout or ``--out``; diagnostics and the
resolved-config banner go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time

import numpy as np

from .datasets import DatasetFormatError, SyntheticSpec, gen_synthetic, load_any, save_dataset
from .evaluation import run_experiment
from .rules import SplitRule
from .tree import THREADS_ENV, TreeConfig, build_tree, default_workers, save_tree

log = logging.getLogger("apdtree")

BENCH_HEADER = ("rule", "t", "build_ms_mean", "build_ms_min")


class UsageError(Exception):
    pass


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def seed_int(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def parse_int_list(text):
    """``"1,2,5..7"`` -> ``[1, 2, 5, 6, 7]``; ranges are inclusive."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {part}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out or min(out) < 0:
        raise argparse.ArgumentTypeError(f"expected non-negative integers, got {text!r}")
    return out


def _add_data_args(p):
    p.add_argument("--data", required=True, help="dataset file (native, IDX3 images or delimited text)")
    p.add_argument("--format", default="auto", choices=["auto", "native", "idx", "delimited"])
    p.add_argument("--delimiter", default=None, help="field separator for delimited text (default: whitespace)")
    p.add_argument("--skip-columns", type=parse_int_list, default=[],
                   help="zero-based delimited columns to drop, e.g. 0,1,2")
    p.add_argument("--scale-pixels", action="store_true", help="map IDX pixels from [0,255] to [0,1]")


def _add_tree_args(p):
    p.add_argument("--seed", type=seed_int, default=0)
    p.add_argument("--outlier-c", type=positive_float, default=10.0)
    p.add_argument("--min-leaf-size", type=positive_int, default=1)
    p.add_argument("--threads", type=positive_int, default=None,
                   help=f"worker cap (default: ${THREADS_ENV} or 1); output does not depend on it")


def build_parser():
    parser = argparse.ArgumentParser(prog="apdtree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--n", type=positive_int, default=10_000)
    g.add_argument("--dim", type=positive_int, default=1_000)
    g.add_argument("--seed", type=seed_int, default=0)
    g.add_argument("--out", required=True)

    b = sub.add_parser("build", help="build and save one tree")
    _add_data_args(b)
    b.add_argument("--rule", choices=["rp", "apd", "pca"], default="apd")
    b.add_argument("--t", type=nonneg_int, default=None, help="power iterations (apd only; default 1)")
    b.add_argument("--pca-tol", type=positive_float, default=1e-10)
    b.add_argument("--depth", type=nonneg_int, default=4)
    b.add_argument("--out", required=True)
    _add_tree_args(b)

    e = sub.add_parser("eval", help="VQ-error sweep over rules and depths, as CSV")
    _add_data_args(e)
    e.add_argument("--rules", default="rp,apd,pca")
    e.add_argument("--t", type=parse_int_list, default=None, help="apd iteration counts (default 1,2,3)")
    e.add_argument("--depths", type=parse_int_list, default=parse_int_list("0..4"))
    e.add_argument("--runs", type=positive_int, default=15)
    e.add_argument("--out", default=None)
    _add_tree_args(e)

    k = sub.add_parser("bench", help="time tree builds for t = 0..t-max and PCA, as CSV")
    _add_data_args(k)
    k.add_argument("--depth", type=nonneg_int, default=4)
    k.add_argument("--reps", type=int, default=5)
    k.add_argument("--t-max", type=nonneg_int, default=4)
    k.add_argument("--out", default=None)
    _add_tree_args(k)
    return parser


def _load(args):
    return load_any(args.data, args.format, args.delimiter, args.skip_columns, args.scale_pixels)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _workers(args):
    return args.threads if args.threads is not None else default_workers()


def resolve_rule(name, t, tol=1e-10):
    if name == "pca":
        if t is not None:
            raise UsageError("--t applies only to --rule apd; PCA has no iteration count")
        return SplitRule.pca(tol)
    if name == "rp":
        if t not in (None, 0):
            raise UsageError("--rule rp takes no power iterations (use --rule apd --t N)")
        return SplitRule.rp()
    return SplitRule.apd(1 if t is None else t)


def resolve_rules(rules_text, t_values):
    names = [r.strip() for r in rules_text.split(",") if r.strip()]
    bad = set(names) - {"rp", "apd", "pca"}
    if not names or bad:
        raise UsageError(f"--rules must list rp, apd and/or pca, got {rules_text!r}")
    if t_values is not None and "apd" not in names:
        raise UsageError("--t given but --rules does not include apd")
    rules = []
    for name in dict.fromkeys(names):
        if name == "apd":
            rules.extend(SplitRule.apd(t) for t in (t_values or [1, 2, 3]))
        else:
            rules.append(resolve_rule(name, None))
    return rules


def clamp_depths(depths, n):
    limit = int(math.floor(math.log2(n))) if n > 1 else 0
    over = sorted(d for d in depths if d > limit)
    if over:
        log.warning("depths %s exceed log2(n) = %d for n = %d; clamped", over, limit, n)
    return sorted(set(min(d, limit) for d in depths))


def cmd_gen(args):
    spec = SyntheticSpec(args.n, args.dim, args.seed)
    log.info("gen: n=%d dim=%d seed=%d out=%s", spec.n, spec.dim, spec.seed, args.out)
    data = gen_synthetic(spec)
    save_dataset(data, args.out)
    print(f"n={data.n} dim={data.dim} seed={spec.seed} out={args.out}")


def cmd_build(args):
    rule = resolve_rule(args.rule, args.t, args.pca_tol)
    data = _load(args)
    cfg = TreeConfig(rule, args.depth, args.min_leaf_size, args.outlier_c, args.seed)
    workers = _workers(args)
    log.info("build: data=%s n=%d dim=%d rule=%s depth=%d seed=%d outlier_c=%r "
             "min_leaf_size=%d threads=%d", args.data, data.n, data.dim, rule.label,
             cfg.max_depth, cfg.master_seed, cfg.outlier_c, cfg.min_leaf_size, workers)
    t0 = time.perf_counter()
    tree = build_tree(data, cfg, workers=workers)
    ms = (time.perf_counter() - t0) * 1e3
    save_tree(tree, args.out)
    print(f"nodes={tree.node_count} leaves={len(tree.leaves())} depth={tree.depth} "
          f"build_ms={ms:.3f} out={args.out}")


def cmd_eval(args):
    rules = resolve_rules(args.rules, args.t)
    data = _load(args)
    depths = clamp_depths(args.depths, data.n)
    workers = _workers(args)
    log.info("eval: data=%s n=%d dim=%d rules=%s depths=%s runs=%d seed=%d outlier_c=%r "
             "min_leaf_size=%d threads=%d", args.data, data.n, data.dim,
             ",".join(r.label for r in rules), depths, args.runs, args.seed,
             args.outlier_c, args.min_leaf_size, workers)
    report = run_experiment(data, rules, depths, args.runs, args.seed,
                            min_leaf_size=args.min_leaf_size, outlier_c=args.outlier_c,
                            workers=workers)
    _emit(report.to_csv(), args.out)


def bench_builds(data, depth, reps, t_max, seed, outlier_c=10.0, min_leaf_size=1, workers=1):
    """Time tree builds; returns rows ``(rule, t, mean_ms, min_ms)``.

    One untimed warmup build precedes each configuration.
    """
    rules = [SplitRule.apd(t) for t in range(t_max + 1)] + [SplitRule.pca()]
    rows = []
    for rule in rules:
        times = []
        for rep in range(reps + 1):
            cfg = TreeConfig(rule, depth, min_leaf_size, outlier_c, seed + rep)
            t0 = time.perf_counter()
            build_tree(data, cfg, workers=workers)
            if rep:
                times.append((time.perf_counter() - t0) * 1e3)
        rows.append((rule.kind.value, rule.iterations, float(np.mean(times)), float(np.min(times))))
    return rows


def cmd_bench(args):
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    data = _load(args)
    workers = _workers(args)
    log.info("bench: data=%s n=%d dim=%d depth=%d reps=%d t_max=%d seed=%d threads=%d",
             args.data, data.n, data.dim, args.depth, args.reps, args.t_max, args.seed, workers)
    rows = bench_builds(data, args.depth, args.reps, args.t_max, args.seed,
                        args.outlier_c, args.min_leaf_size, workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for rule, t, mean_ms, min_ms in rows:
        w.writerow([rule, t, repr(mean_ms), repr(min_ms)])
    _emit(buf.getvalue(), args.out)


COMMANDS = {"gen": cmd_gen, "build": cmd_build, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(name)s: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"apdtree {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DatasetFormatError, OSError, ValueError) as exc:
        print(f"apdtree {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
