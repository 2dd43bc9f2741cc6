"""Build all four indexes on a seeded Gaussian mixture and sweep the beam width.

    python3 scripts/desk_benchmark.py --n 10000 --d 16 --out results/

Writes one CSV per algorithm and prints the recall/QPS table.
"""

import argparse
import pathlib
import time
import warnings

warnings.filterwarnings("ignore", message="The TBB threading layer")

from graphann import (DiskannParams, HcnngParams, HnswParams, PynndParams, SweepConfig, batch_build,
                      build_hcnng, build_hnsw, build_pynndescent, compute_groundtruth, gaussian_mixture,
                      run_sweep)
from graphann.evaluate import write_csv

BUILDERS = {
    "diskann": lambda ds, w: batch_build(ds, DiskannParams(R=32, L=64, alpha=1.2), w),
    "hnsw": lambda ds, w: build_hnsw(ds, HnswParams(m=16, efc=64), w),
    "hcnng": lambda ds, w: build_hcnng(ds, HcnngParams(T=10, Ls=500, s=3), w),
    "pynnd": lambda ds, w: build_pynndescent(ds, PynndParams(K=20), w),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--clusters", type=int, default=10)
    ap.add_argument("--queries", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--beams", default="10,20,50,100,200")
    ap.add_argument("--algos", default=",".join(BUILDERS))
    ap.add_argument("--out", type=pathlib.Path, default=None)
    args = ap.parse_args()

    base, queries = gaussian_mixture(args.n, args.d, args.clusters, args.seed, n_queries=args.queries)
    gt = compute_groundtruth(base, queries, 10)
    sweep = SweepConfig(beams=tuple(int(b) for b in args.beams.split(",")), threads=1)

    small, _ = gaussian_mixture(400, args.d, 4, 0)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'algo':8} {'build_s':>8} {'L':>5} {'recall':>7} {'qps':>9} {'comps/n':>8}")
    for algo in args.algos.split(","):
        BUILDERS[algo](small, args.workers)  # compile outside the timed build
        t0 = time.perf_counter()
        index = BUILDERS[algo](base, args.workers)
        secs = time.perf_counter() - t0
        rep = run_sweep(index, base, queries, gt, sweep, algorithm=algo, dataset="desk", n=base.n,
                        build_seconds=secs)
        for r in sorted(rep.rows, key=lambda r: r.beam):
            print(f"{algo:8} {secs:8.2f} {r.beam:5d} {r.recall:7.4f} {r.qps:9.0f} {r.dist_comps / base.n:8.4f}")
        if args.out:
            write_csv(rep, args.out / f"{algo}.csv")


if __name__ == "__main__":
    main()
