"""Nearest-neighbor descent with capped undirection and a final alpha-prune.

The initial graph takes, per vertex, the K nearest distinct leaf-mates seen
across ``T_init`` random cluster trees. Each round then rebuilds a capped
undirected adjacency (out-edges plus at most ``2K - outdeg`` sampled
in-edges), gathers every vertex's one- and two-hop neighborhood over it, and
keeps the K closest candidates. Rounds stop once the fraction of changed
edges falls to ``delta`` or ``max_rounds`` is reached.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .diskann import choose_start, worker_threads
from .graph import NeighborGraph
from .hcnng import cluster_leaves
from .metrics import Metric, dist
from .prune import prune_kernel


@dataclass(frozen=True)
class PynndParams:
    K: int = 40
    T_init: int = 10
    Ls: int = 100
    alpha: float = 1.2
    delta: float = 0.001
    max_rounds: int = 30
    batch_count: int | None = None
    memory_budget: int = 1 << 30
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.T_init < 1 or self.Ls < 2:
            raise ValueError("need K >= 1, T_init >= 1, Ls >= 2")
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def batches_for(self, n: int) -> int:
        if self.batch_count is not None:
            return max(1, min(self.batch_count, n))
        # candidate buffer per vertex: ids (8 B) + distances (4 B)
        per_vertex = 12 * (2 * self.K + 4 * self.K * self.K)
        return max(1, int(np.ceil(n * per_vertex / self.memory_budget)))


@numba.njit(nogil=True, cache=True)
def _merge_sorted(ids, ds, cnt, K, cand, cd):
    """Merge candidates into a sorted (dist, id) list of at most K distinct ids."""
    m = cnt + cand.shape[0]
    all_i = np.empty(m, dtype=np.int64)
    all_d = np.empty(m, dtype=np.float32)
    all_i[:cnt] = ids[:cnt]
    all_d[:cnt] = ds[:cnt]
    all_i[cnt:] = cand
    all_d[cnt:] = cd
    by_id = np.argsort(all_i, kind="mergesort")
    order = by_id[np.argsort(all_d[by_id], kind="mergesort")]
    out = 0
    for t in range(m):
        i = all_i[order[t]]
        dup = False
        for r in range(out):
            if ids[r] == i:
                dup = True
                break
        if dup:
            continue
        ids[out] = i
        ds[out] = all_d[order[t]]
        out += 1
        if out == K:
            break
    return out


@numba.njit(parallel=True, cache=True)
def _init_tree_kernel(data, flat, offsets, nbr, nd, cnt, K, metric):
    # every vertex sits in exactly one leaf, so writes are disjoint
    for li in numba.prange(offsets.shape[0] - 1):
        leaf = flat[offsets[li]:offsets[li + 1]]
        m = leaf.shape[0]
        if m < 2:
            continue
        cand = np.empty(m - 1, dtype=np.int64)
        cd = np.empty(m - 1, dtype=np.float32)
        for a in range(m):
            p = leaf[a]
            c = 0
            for b in range(m):
                if b != a:
                    cand[c] = leaf[b]
                    cd[c] = dist(data[p], data[leaf[b]], metric)
                    c += 1
            cnt[p] = _merge_sorted(nbr[p], nd[p], cnt[p], K, cand, cd)


def init_knn_graph(ds, params: PynndParams, metric=Metric.EUCLIDEAN_SQUARED):
    """Return ``(nbr, dist, count)`` arrays of the initial K-NN approximation."""
    metric = Metric.parse(metric)
    view = ds.view()
    n, K = ds.n, params.K
    nbr = np.full((n, K), -1, dtype=np.int64)
    nd = np.full((n, K), np.inf, dtype=np.float32)
    cnt = np.zeros(n, dtype=np.int64)
    for t in range(params.T_init):
        leaves = cluster_leaves(view, np.arange(n), params.Ls, params.seed * 7_919 + t, metric)
        offsets = np.zeros(len(leaves) + 1, dtype=np.int64)
        np.cumsum([len(l) for l in leaves], out=offsets[1:])
        _init_tree_kernel(view, np.concatenate(leaves), offsets, nbr, nd, cnt, K, metric.code)
    return nbr, nd, cnt


@numba.njit(inline="always", nogil=True)
def _mix(seed, a, b):
    x = np.uint64(seed) ^ (np.uint64(a) * np.uint64(0x9E3779B97F4A7C15))
    x = x ^ (np.uint64(b) * np.uint64(0xC2B2AE3D27D4EB4F))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@numba.njit(parallel=True, cache=True)
def _undirect_kernel(nbr, cnt, in_src, in_off, K, seed):
    n = nbr.shape[0]
    U = np.full((n, 2 * K), -1, dtype=np.int64)
    ucnt = np.zeros(n, dtype=np.int64)
    for v in numba.prange(n):
        c = cnt[v]
        U[v, :c] = nbr[v, :c]
        room = 2 * K - c
        lo = in_off[v]
        hi = in_off[v + 1]
        # in-edges not already out-edges
        fresh = np.empty(hi - lo, dtype=np.int64)
        f = 0
        for t in range(lo, hi):
            u = in_src[t]
            seen = False
            for r in range(c):
                if nbr[v, r] == u:
                    seen = True
                    break
            if not seen:
                fresh[f] = u
                f += 1
        if f > room:
            # uniform sample without replacement: keep the smallest hashed priorities
            keys = np.empty(f, dtype=np.uint64)
            for t in range(f):
                keys[t] = _mix(seed, v, fresh[t])
            fresh = fresh[:f][np.argsort(keys)[:room]]
            f = room
        U[v, c:c + f] = fresh[:f]
        ucnt[v] = c + f
    return U, ucnt


def _reverse_csr(nbr, cnt):
    n = len(cnt)
    mask = np.arange(nbr.shape[1])[None, :] < cnt[:, None]
    src = np.repeat(np.arange(n), cnt)
    dst = nbr[mask]
    order = np.argsort(dst, kind="stable")
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=offsets[1:])
    return src[order].astype(np.int64), offsets


def undirect_capped(nbr, cnt, K: int, seed: int = 0):
    """Per-vertex union of out-edges and sampled in-edges, at most ``2K`` entries.

    Returns ``(U, ucnt)`` with ``U`` of shape ``(n, 2K)`` padded by -1.
    """
    in_src, in_off = _reverse_csr(np.asarray(nbr), np.asarray(cnt))
    return _undirect_kernel(np.asarray(nbr, dtype=np.int64), np.asarray(cnt, dtype=np.int64),
                            in_src, in_off, K, seed)


@numba.njit(parallel=True, cache=True)
def _descent_kernel(data, nbr, nd, cnt, U, ucnt, lo, hi, K, metric, new_nbr, new_nd, new_cnt, changed):
    for p in numba.prange(lo, hi):
        size = ucnt[p]
        for a in range(ucnt[p]):
            size += ucnt[U[p, a]]
        cand = np.empty(size, dtype=np.int64)
        c = 0
        for a in range(ucnt[p]):
            u = U[p, a]
            cand[c] = u
            c += 1
            for b in range(ucnt[u]):
                cand[c] = U[u, b]
                c += 1
        cand = np.unique(cand[:c])
        keep = np.empty(cand.shape[0], dtype=np.int64)
        kd = np.empty(cand.shape[0], dtype=np.float32)
        f = 0
        for t in range(cand.shape[0]):
            w = cand[t]
            if w == p:
                continue
            known = False
            for r in range(cnt[p]):
                if nbr[p, r] == w:
                    known = True
                    break
            if known:
                continue
            keep[f] = w
            kd[f] = dist(data[p], data[w], metric)
            f += 1
        ids = nbr[p].copy()
        ds_ = nd[p].copy()
        c2 = _merge_sorted(ids, ds_, cnt[p], K, keep[:f], kd[:f])
        new_nbr[p] = ids
        new_nd[p] = ds_
        new_cnt[p] = c2
        diff = 0
        for a in range(c2):
            hit = False
            for b in range(cnt[p]):
                if nbr[p, b] == ids[a]:
                    hit = True
                    break
            if not hit:
                diff += 1
        changed[p] = diff


def descent_round(ds, nbr, nd, cnt, params: PynndParams, metric=Metric.EUCLIDEAN_SQUARED,
                  round_seed: int = 0):
    """One descent round. Returns ``(nbr, nd, cnt, changed_fraction)``.

    The changed fraction is the share of the new directed edges absent from
    the previous round's edge set.
    """
    metric = Metric.parse(metric)
    view = ds.view()
    n, K = ds.n, params.K
    U, ucnt = undirect_capped(nbr, cnt, K, round_seed)
    new_nbr = np.full_like(nbr, -1)
    new_nd = np.full_like(nd, np.inf)
    new_cnt = np.zeros_like(cnt)
    changed = np.zeros(n, dtype=np.int64)
    bounds = np.linspace(0, n, params.batches_for(n) + 1).astype(np.int64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        _descent_kernel(view, nbr, nd, cnt, U, ucnt, lo, hi, K, metric.code,
                        new_nbr, new_nd, new_cnt, changed)
    total = int(new_cnt.sum())
    frac = changed.sum() / total if total else 0.0
    return new_nbr, new_nd, new_cnt, float(frac)


@numba.njit(parallel=True, cache=True)
def _final_prune_kernel(data, nbr, nd, cnt, ids, deg, cap, alpha, metric):
    for p in numba.prange(nbr.shape[0]):
        sel = prune_kernel(p, data[p], nbr[p, :cnt[p]], nd[p, :cnt[p]], data, cap, alpha, metric,
                           False)
        for j in range(sel.shape[0]):
            ids[p * cap + j] = sel[j]
        deg[p] = sel.shape[0]


def to_graph(nbr, cnt, start: int = 0) -> NeighborGraph:
    n, K = nbr.shape
    g = NeighborGraph(n, K, start=start)
    g.ids[:] = np.where(nbr >= 0, nbr, 0).ravel()
    g.deg[:] = cnt
    return g


def build_pynndescent(ds, params: PynndParams = PynndParams(), workers: int | None = None,
                      metric=Metric.EUCLIDEAN_SQUARED, trace: list | None = None) -> NeighborGraph:
    """Descent to convergence, then alpha-prune each vertex's list.

    ``trace`` (if given) receives the sorted per-vertex distance matrix after
    initialization and after every round.
    """
    metric = Metric.parse(metric)
    if ds.n < 2:
        raise ValueError("pyNNDescent needs at least two points")
    view = ds.view()
    with worker_threads(workers):
        nbr, nd, cnt = init_knn_graph(ds, params, metric)
        if trace is not None:
            trace.append(nd.copy())
        rounds, frac, converged = 0, 1.0, False
        while rounds < params.max_rounds:
            nbr, nd, cnt, frac = descent_round(ds, nbr, nd, cnt, params, metric,
                                               round_seed=params.seed * 104_729 + rounds)
            rounds += 1
            if trace is not None:
                trace.append(nd.copy())
            if frac <= params.delta:
                converged = True
                break
        if not converged:
            warnings.warn(f"descent stopped after {rounds} rounds with {frac:.4f} of edges changing")
        g = NeighborGraph(ds.n, params.K, start=choose_start(ds, metric))
        _final_prune_kernel(view, nbr, nd, cnt, g.ids, g.deg, params.K, np.float32(params.alpha),
                            metric.code)
    g.meta.update(algorithm="pynndescent", K=params.K, rounds=rounds, converged=converged,
                  last_changed_fraction=frac)
    return g
