"""Command-line entry point: ``gen``, ``gt``, ``build`` and ``eval``.

Exit codes: 0 success, 1 usage or validation error, 2 I/O or file-format error.
Every subcommand accepts ``--config FILE`` holding ``key = value`` lines
(``#`` starts a comment); keys are option names and explicit flags win.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
import warnings
from pathlib import Path

from .dataset import (FormatError, compute_groundtruth, compute_range_groundtruth, gaussian_mixture,
                      is_range_groundtruth, load_groundtruth, load_range_groundtruth, load_vectors,
                      write_groundtruth, write_range_groundtruth, write_vectors)
from .diskann import DiskannParams, batch_build
from .evaluate import SweepConfig, pareto_frontier, run_sweep, write_csv
from .graph import GraphInvariantError, load_graph, save_graph
from .hcnng import HcnngParams, build_hcnng
from .hnsw import HnswParams, build_hnsw, load_index, save_index
from .metrics import Metric
from .presets import ALGORITHMS, PRESETS, preset
from .pynndescent import PynndParams, build_pynndescent

log = logging.getLogger("graphann")

EXIT_USAGE = 1
EXIT_IO = 2

# build flag -> params field, per algorithm
OVERRIDES = {
    "diskann": {"R": "R", "L": "L", "alpha": "alpha", "seed": "seed"},
    "hnsw": {"m": "m", "efc": "efc", "alpha": "alpha", "seed": "level_seed"},
    "hcnng": {"T": "T", "Ls": "Ls", "s": "s", "k_mst": "k_mst", "seed": "seed"},
    "pynnd": {"K": "K", "T_init": "T_init", "Ls": "Ls", "alpha": "alpha", "delta": "delta",
              "max_rounds": "max_rounds", "batch_count": "batch_count", "seed": "seed"},
}
DEFAULTS = {"diskann": DiskannParams(), "hnsw": HnswParams(), "hcnng": HcnngParams(),
            "pynnd": PynndParams()}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphann", description="Graph-based ANN indexes: build and benchmark.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    g = common(sub.add_parser("gen", help="write a seeded Gaussian-mixture dataset"))
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--clusters", type=int, default=10)
    g.add_argument("--spread", type=float, default=1.5)
    g.add_argument("--queries", type=int, default=0, help="held-out queries to draw")
    g.add_argument("--queries-out")
    g.add_argument("--out")

    t = common(sub.add_parser("gt", help="brute-force ground truth"))
    t.add_argument("--base")
    t.add_argument("--queries")
    t.add_argument("--k", type=int, default=100)
    t.add_argument("--radius", type=float, help="range mode; Euclidean radius for l2")
    t.add_argument("--metric", default="l2")
    t.add_argument("--elem", choices=["u8", "i8", "f32"])
    t.add_argument("--out")

    b = common(sub.add_parser("build", help="build an index"))
    b.add_argument("--algo")
    b.add_argument("--base")
    b.add_argument("--out")
    b.add_argument("--preset", choices=sorted(PRESETS))
    b.add_argument("--metric")
    b.add_argument("--elem", choices=["u8", "i8", "f32"])
    b.add_argument("--threads", type=int)
    for name in ("R", "L", "m", "efc", "T", "Ls", "s", "k_mst", "K", "T_init", "max_rounds",
                 "batch_count"):
        b.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int)
    b.add_argument("--alpha", type=float)
    b.add_argument("--delta", type=float)

    e = common(sub.add_parser("eval", help="sweep search parameters and write CSV"))
    e.add_argument("--index")
    e.add_argument("--base")
    e.add_argument("--queries")
    e.add_argument("--gt")
    e.add_argument("--metric")
    e.add_argument("--elem", choices=["u8", "i8", "f32"])
    e.add_argument("--beams", type=_int_list, default="10,20,50,100")
    e.add_argument("--ks", type=_int_list, default="10")
    e.add_argument("--epsilons", type=_float_list, default="0")
    e.add_argument("--threads", type=int)
    e.add_argument("--repetitions", type=int, default=1)
    e.add_argument("--radius", type=float, help="range mode; Euclidean radius for l2")
    e.add_argument("--pareto", action="store_true")
    e.add_argument("--dataset", help="dataset label for the CSV")
    e.add_argument("--out")
    p._subs = sub.choices  # used to apply config files per subcommand
    return p


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sp = parser._subs[args.cmd]
        dests = {a.dest: a for a in sp._actions}
        for key, value in cfg.items():
            if key not in dests or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for '{args.cmd}'")
            if isinstance(dests[key], argparse._StoreTrueAction):
                cfg[key] = value.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def cmd_gen(args) -> int:
    _need(args, "n", "d", "out")
    if args.n < 1 or args.d < 1 or args.clusters < 1:
        raise UsageError("--n, --d and --clusters must be positive")
    if args.queries and not args.queries_out:
        raise UsageError("--queries needs --queries-out")
    base, queries = gaussian_mixture(args.n, args.d, args.clusters, args.seed, args.spread,
                                     args.queries)
    write_vectors(base, args.out, "bin")
    if queries is not None:
        write_vectors(queries, args.queries_out, "bin")
    print(f"wrote {args.out}: n={base.n} d={base.d}")
    return 0


def cmd_gt(args) -> int:
    _need(args, "base", "queries", "out")
    metric = Metric.parse(args.metric)
    base = load_vectors(args.base, elem=args.elem)
    queries = load_vectors(args.queries, elem=args.elem)
    if queries.d != base.d:
        raise UsageError(f"dimension mismatch: base d={base.d}, queries d={queries.d}")
    if args.radius is not None:
        gt = compute_range_groundtruth(base, queries, float(metric.to_internal(args.radius)), metric)
        write_range_groundtruth(gt, args.out, metric)
        print(f"wrote {args.out}: {len(gt)} queries, mean in-range {gt.sizes().mean():.2f}")
    else:
        gt = compute_groundtruth(base, queries, args.k, metric)
        write_groundtruth(gt, args.out, metric)
        print(f"wrote {args.out}: {len(gt)} queries, k={gt.k}")
    return 0


def resolve_params(args):
    """Preset (or defaults), then explicit flags field by field, then ``--seed``."""
    algo = args.algo
    params = preset(args.preset, algo) if args.preset else DEFAULTS[algo]
    changes = {}
    for flag, fld in OVERRIDES[algo].items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[fld] = value
    if algo == "hnsw" and args.L is not None and args.efc is None:
        changes["efc"] = args.L
    return dataclasses.replace(params, **changes)


def cmd_build(args) -> int:
    _need(args, "algo", "base", "out")
    if args.algo not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {args.algo!r}; choose from {', '.join(ALGORITHMS)}")
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    params = resolve_params(args)
    metric = Metric.parse(args.metric or (PRESETS[args.preset]["metric"] if args.preset else "l2"))
    ds = load_vectors(args.base, elem=args.elem)
    t0 = time.perf_counter()
    if args.algo == "diskann":
        index = batch_build(ds, params, args.threads, metric)
    elif args.algo == "hnsw":
        index = build_hnsw(ds, params, args.threads, metric, seed=args.seed)
    elif args.algo == "hcnng":
        index = build_hcnng(ds, params, args.threads, metric)
    else:
        index = build_pynndescent(ds, params, args.threads, metric)
    seconds = time.perf_counter() - t0
    if args.algo == "hnsw":
        index.check(params.m)
        save_index(index, args.out)
    else:
        index.check(index.cap)
        save_graph(index, args.out)
    meta = {"algorithm": args.algo, "metric": metric.value, "n": ds.n, "build_seconds": seconds,
            "threads": args.threads or os.cpu_count(), "seed": args.seed,
            "params": dataclasses.asdict(params)}
    Path(str(args.out) + ".json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    print(f"build_seconds={seconds:.3f}")
    return 0


def load_any_index(path):
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == b"ANNG":
        return load_graph(path)
    if magic == b"ANNH":
        return load_index(path)
    raise FormatError(f"{path}: not a graph or HNSW index file")


def cmd_eval(args) -> int:
    _need(args, "index", "base", "queries", "gt", "out")
    sweep = SweepConfig(args.beams, args.ks, args.epsilons, args.threads, args.repetitions)
    meta_path = Path(str(args.index) + ".json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    metric = Metric.parse(args.metric or meta.get("metric", "l2"))
    index = load_any_index(args.index)
    base = load_vectors(args.base, elem=args.elem)
    queries = load_vectors(args.queries, elem=args.elem)
    if queries.d != base.d:
        raise UsageError(f"dimension mismatch: base d={base.d}, queries d={queries.d}")
    if index.n != base.n:
        raise UsageError(f"index has {index.n} points but base has {base.n}")
    if args.radius is not None:
        truth = load_range_groundtruth(args.gt, float(metric.to_internal(args.radius)), metric)
    else:
        if is_range_groundtruth(args.gt):
            raise UsageError("range ground truth given without --radius")
        truth = load_groundtruth(args.gt, metric)
    if len(truth) != queries.n:
        raise UsageError(f"ground truth has {len(truth)} queries, query file has {queries.n}")
    report = run_sweep(index, base, queries, truth, sweep, metric,
                       algorithm=meta.get("algorithm", type(index).__name__),
                       dataset=args.dataset or Path(args.base).stem, n=base.n,
                       build_seconds=meta.get("build_seconds", 0.0),
                       build_params=meta.get("params", {}))
    rows = pareto_frontier(report) if args.pareto else report.rows
    write_csv(report, args.out, rows)
    for r in rows:
        print(f"L={r.beam} k={r.k} eps={r.epsilon:g} recall={r.recall:.4f} qps={r.qps:.0f} "
              f"comps={r.dist_comps:.1f}")
    return 0


COMMANDS = {"gen": cmd_gen, "gt": cmd_gt, "build": cmd_build, "eval": cmd_eval}


def main(argv=None) -> int:
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.cmd](args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, FormatError):
            print(f"graphann: format error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"graphann: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"graphann: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GraphInvariantError as exc:
        print(f"graphann: invariant violated: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
