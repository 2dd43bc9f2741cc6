"""Mean DiskANN degree and recall as the pruning parameter alpha varies."""

import argparse
import warnings

import numpy as np

warnings.filterwarnings("ignore", message="The TBB threading layer")

from graphann import DiskannParams, SearchParams, batch_build, compute_groundtruth, gaussian_mixture, measure_qps
from graphann.evaluate import mean_recall


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--alphas", default="1.0,1.1,1.2,1.3,1.4")
    ap.add_argument("--R", type=int, default=32)
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--beam", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    base, queries = gaussian_mixture(args.n, args.d, 10, args.seed, n_queries=1000)
    gt = compute_groundtruth(base, queries, 10)
    print(f"{'alpha':>6} {'degree':>7} {'max':>4} {'recall@L':>9} {'comps':>7}")
    for a in (float(x) for x in args.alphas.split(",")):
        g = batch_build(base, DiskannParams(R=args.R, L=args.L, alpha=a))
        m = measure_qps(g, base, queries, SearchParams(L=args.beam, k=10), threads=1)
        rec = mean_recall(gt, [r.ids for r in m.results], 10)
        print(f"{a:6.2f} {g.mean_degree():7.3f} {int(np.max(g.degrees())):4d} {rec:9.4f} {m.dist_comps:7.1f}")


if __name__ == "__main__":
    main()
