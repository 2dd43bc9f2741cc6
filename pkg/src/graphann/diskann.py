"""DiskANN-style incremental construction with prefix-doubling batches.

Each batch runs in two barrier-separated phases. Phase 1 searches the graph
as it stood at the previous barrier and prunes the visited set into new
out-lists (buffered, then published). Phase 2 groups the resulting back-edges
by target with :func:`graphann.semisort.semisort` and merges every group in a
separate task, pruning when the degree bound is exceeded. Every vertex slot
range has a single writer per phase, so no locks are needed and the result
does not depend on the worker count.
"""

from __future__ import annotations

import contextlib
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .graph import GraphInvariantError, NeighborGraph
from .metrics import Metric, dist
from .prune import PruneParams, alpha_prune, dists_to, prune_kernel
from .search import DEFAULT_SEED, SearchParams, beam_search, beam_search_kernel
from .semisort import semisort

MERGE_PRUNE = 0
MERGE_TRUNCATE = 1


@dataclass(frozen=True)
class DiskannParams:
    R: int = 64
    L: int = 128
    alpha: float = 1.2
    seed: int = 0

    def __post_init__(self):
        if self.R < 1 or self.L < 1:
            raise ValueError("R and L must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.L < self.R:
            warnings.warn(f"build beam L={self.L} is smaller than degree bound R={self.R}")


@contextlib.contextmanager
def worker_threads(workers: int | None):
    """Temporarily set the numba thread count (capped at the pool size)."""
    old = numba.get_num_threads()
    if workers is not None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))
    try:
        yield numba.get_num_threads()
    finally:
        numba.set_num_threads(old)


def choose_start(ds, metric=Metric.EUCLIDEAN_SQUARED) -> int:
    """Point closest (Euclidean) to the centroid; ties go to the smaller id."""
    data = ds.data.astype(np.float32, copy=False)
    centroid = data.mean(axis=0, dtype=np.float64).astype(np.float32)
    d = dists_to(centroid, np.arange(len(data), dtype=np.int64), data, 0)
    return int(np.argmin(d))


def prefix_doubling_batches(n: int, start: int = 1) -> list[tuple[int, int]]:
    """Index ranges ``[2^i, 2^(i+1))`` clipped to ``n``, from ``start``."""
    out = []
    lo = start
    while lo < n:
        hi = min(2 * lo, n)
        out.append((lo, hi))
        lo = hi
    return out


@numba.njit(parallel=True, cache=True)
def insert_batch_kernel(ids, deg, cap, data, pts, starts, L, R, alpha, metric, seed, literal):
    B = pts.shape[0]
    out_ids = np.full((B, R), -1, dtype=np.int64)
    out_deg = np.zeros(B, dtype=np.int64)
    for t in numba.prange(B):
        p = pts[t]
        q = data[p]
        _, _, vis, visd, _ = beam_search_kernel(ids, deg, cap, data, q, starts[t], L, 1, 0.0,
                                                metric, seed)
        sel = prune_kernel(p, q, vis, visd, data, R, alpha, metric, literal)
        out_ids[t, :sel.shape[0]] = sel
        out_deg[t] = sel.shape[0]
    return out_ids, out_deg


@numba.njit(cache=True)
def publish_kernel(ids, deg, cap, pts, out_ids, out_deg):
    for t in range(pts.shape[0]):
        p = pts[t]
        for j in range(out_deg[t]):
            ids[p * cap + j] = out_ids[t, j]
        deg[p] = out_deg[t]


@numba.njit(nogil=True, cache=True)
def _dedupe_keep_first(c):
    order = np.argsort(c, kind="mergesort")
    keep = np.ones(c.shape[0], dtype=np.bool_)
    for t in range(1, c.shape[0]):
        if c[order[t]] == c[order[t - 1]]:
            keep[order[t]] = False
    return c[keep]


@numba.njit(parallel=True, cache=True)
def merge_groups_kernel(ids, deg, cap, data, group_keys, offsets, vals, R, alpha, metric, mode):
    """Append each group's values to its key's out-list; shrink lists over ``R``."""
    for g in numba.prange(group_keys.shape[0]):
        b = group_keys[g]
        old = deg[b]
        c = np.empty(old + offsets[g + 1] - offsets[g], dtype=np.int64)
        for j in range(old):
            c[j] = ids[b * cap + j]
        c[old:] = vals[offsets[g]:offsets[g + 1]]
        c = _dedupe_keep_first(c)
        if c.shape[0] > R:
            cd = np.empty(c.shape[0], dtype=np.float32)
            for j in range(c.shape[0]):
                cd[j] = dist(data[b], data[c[j]], metric)
            if mode == 0:
                c = prune_kernel(b, data[b], c, cd, data, R, alpha, metric, False)
            else:
                by_id = np.argsort(c, kind="mergesort")
                order = by_id[np.argsort(cd[by_id], kind="mergesort")]
                c = c[order[:R]]
        for j in range(c.shape[0]):
            ids[b * cap + j] = c[j]
        deg[b] = c.shape[0]


def insert_batch(g: NeighborGraph, view, pts, starts, L, R, alpha, metric_code,
                 seed=DEFAULT_SEED, literal=False, semisort_seed=0):
    """Run both phases for one batch of vertices ``pts``."""
    pts = np.ascontiguousarray(pts, dtype=np.int64)
    out_ids, out_deg = insert_batch_kernel(g.ids, g.deg, g.cap, view, pts, starts, L, R,
                                           np.float32(alpha), metric_code, seed, literal)
    publish_kernel(g.ids, g.deg, g.cap, pts, out_ids, out_deg)
    mask = np.arange(R)[None, :] < out_deg[:, None]
    targets = out_ids[mask]
    sources = np.repeat(pts, out_deg)
    if len(targets) == 0:
        return
    _, vals, offsets, keys = semisort(targets, sources, g.n, semisort_seed)
    merge_groups_kernel(g.ids, g.deg, g.cap, view, keys, offsets, vals, R,
                        np.float32(alpha), metric_code, MERGE_PRUNE)


def insertion_order(n: int, start: int, seed: int) -> np.ndarray:
    order = np.random.default_rng(seed).permutation(n).astype(np.int64)
    i = int(np.flatnonzero(order == start)[0])
    order[0], order[i] = order[i], order[0]
    return order


def batch_build(ds, params: DiskannParams = DiskannParams(), workers: int | None = None,
                metric=Metric.EUCLIDEAN_SQUARED, literal_prune: bool = False) -> NeighborGraph:
    metric = Metric.parse(metric)
    view = ds.view()
    start = choose_start(ds, metric)
    g = NeighborGraph(ds.n, params.R, start=start)
    order = insertion_order(ds.n, start, params.seed)
    with worker_threads(workers):
        for i, (lo, hi) in enumerate(prefix_doubling_batches(ds.n)):
            pts = order[lo:hi]
            starts = np.full((len(pts), 1), start, dtype=np.int64)
            insert_batch(g, view, pts, starts, params.L, params.R, params.alpha, metric.code,
                         literal=literal_prune, semisort_seed=params.seed + i)
            if g.deg.max() > params.R:
                raise GraphInvariantError("degree bound exceeded after batch")
    g.meta.update(algorithm="diskann", R=params.R, L=params.L, alpha=params.alpha)
    return g


def insert_point(g: NeighborGraph, ds, j: int, params: DiskannParams,
                 metric=Metric.EUCLIDEAN_SQUARED) -> list[tuple[int, int]]:
    """Set ``N_out(j)`` from a search on ``g``; return back-edges ``(q, j)`` unapplied."""
    res = beam_search(g, ds, metric, ds.view()[j], SearchParams(L=params.L, k=1))
    nbrs = alpha_prune(j, res.visited_ids, res.visited_dists, PruneParams(params.R, params.alpha),
                       ds, metric)
    g.set_neighbors(j, nbrs)
    return [(int(q), j) for q in nbrs]
