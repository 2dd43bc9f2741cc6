"""Beam search over a :class:`NeighborGraph`.

The kernel follows the classic greedy search (expand the closest unexpanded
beam entry, merge its out-neighbors, keep the ``L`` best) with two additions:

* duplicate suppression through an approximate visited table of ``L**2``
  single-id buckets; a collision overwrites the bucket, so an evicted id may be
  scored twice but an absent id is never reported present;
* for ``epsilon > 0``, expansion stops at the first candidate farther than
  ``d_k + epsilon*|d_k|`` where ``d_k`` is the current k-th best distance.
  ``epsilon == 0`` disables the cutoff.

The exact set of expanded vertices is always returned; builders prune it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .graph import NeighborGraph
from .metrics import DistanceCounter, Metric, dist, distance

DEFAULT_SEED = 0x2545F491
_HASH_MUL = 2654435761


@dataclass(frozen=True)
class SearchParams:
    L: int = 10
    k: int = 10
    epsilon: float = 0.0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.L < 1 or self.k < 1:
            raise ValueError("L and k must be positive")
        if self.k > self.L:
            raise ValueError(f"k={self.k} exceeds beam width L={self.L}")
        if not 0.0 <= self.epsilon <= 0.25:
            raise ValueError("epsilon must lie in [0, 0.25]")


@dataclass
class SearchResult:
    ids: np.ndarray
    dists: np.ndarray
    visited_ids: np.ndarray
    visited_dists: np.ndarray
    dist_comps: int


def table_bits(L: int) -> int:
    return max(4, int(np.ceil(np.log2(max(L * L, 2)))))


class ApproxVisitedSet:
    """Single-slot hash table with one-sided (false-negative only) errors."""

    def __init__(self, L: int, seed: int = DEFAULT_SEED):
        self.bits = table_bits(L)
        self.seed = seed & 0xFFFFFFFF
        self.table = np.full(1 << self.bits, -1, dtype=np.int64)

    def _slot(self, v: int) -> int:
        return (((v ^ self.seed) * _HASH_MUL) & 0xFFFFFFFF) >> (32 - self.bits)

    def __contains__(self, v: int) -> bool:
        return self.table[self._slot(v)] == v

    def add(self, v: int) -> None:
        self.table[self._slot(v)] = v


@numba.njit(inline="always", nogil=True)
def _slot(v, seed, bits):
    x = (np.uint64(v) ^ np.uint64(seed)) * np.uint64(_HASH_MUL)
    x = x & np.uint64(0xFFFFFFFF)
    return np.int64(x >> np.uint64(32 - bits))


@numba.njit(inline="always", nogil=True)
def _less(d1, i1, d2, i2):
    return d1 < d2 or (d1 == d2 and i1 < i2)


@numba.njit(nogil=True, cache=True)
def beam_search_kernel(ids, deg, cap, data, q, starts, L, k, eps, metric, seed):
    """Returns (top ids, top dists, visited ids, visited dists, dist_comps)."""
    bits = max(4, np.int64(np.ceil(np.log2(max(L * L, 2)))))
    table = np.full(1 << bits, -1, dtype=np.int64)
    b_id = np.empty(L, dtype=np.int64)
    b_d = np.empty(L, dtype=np.float32)
    b_exp = np.zeros(L, dtype=np.bool_)
    bn = 0
    vcap = 2 * L + 16
    v_id = np.empty(vcap, dtype=np.int64)
    v_d = np.empty(vcap, dtype=np.float32)
    nv = 0
    dc = 0
    cur = 0

    for si in range(starts.shape[0]):
        s = starts[si]
        if s < 0:
            continue
        h = _slot(s, seed, bits)
        if table[h] == s:
            continue
        table[h] = s
        ds_ = dist(q, data[s], metric)
        dc += 1
        if bn == L and not _less(ds_, s, b_d[L - 1], b_id[L - 1]):
            continue
        pos = bn if bn < L else L - 1
        while pos > 0 and _less(ds_, s, b_d[pos - 1], b_id[pos - 1]):
            pos -= 1
        if pos < bn and b_id[pos] == s:
            continue
        last = bn if bn < L else L - 1
        for t in range(last, pos, -1):
            b_id[t] = b_id[t - 1]
            b_d[t] = b_d[t - 1]
            b_exp[t] = b_exp[t - 1]
        b_id[pos] = s
        b_d[pos] = ds_
        b_exp[pos] = False
        if bn < L:
            bn += 1

    while True:
        while cur < bn and b_exp[cur]:
            cur += 1
        if cur >= bn:
            break
        if eps > 0.0 and bn >= k:
            dk = b_d[k - 1]
            if b_d[cur] > dk + eps * abs(dk):
                break
        b_exp[cur] = True
        p = b_id[cur]
        if nv == vcap:
            vcap *= 2
            ni = np.empty(vcap, dtype=np.int64)
            nd = np.empty(vcap, dtype=np.float32)
            ni[:nv] = v_id[:nv]
            nd[:nv] = v_d[:nv]
            v_id, v_d = ni, nd
        v_id[nv] = p
        v_d[nv] = b_d[cur]
        nv += 1
        base = p * cap
        for j in range(deg[p]):
            u = ids[base + j]
            h = _slot(u, seed, bits)
            if table[h] == u:
                continue
            table[h] = u
            du = dist(q, data[u], metric)
            dc += 1
            if bn == L and not _less(du, u, b_d[L - 1], b_id[L - 1]):
                continue
            # binary search for the insertion slot in (dist, id) order
            lo = 0
            hi = bn
            while lo < hi:
                mid = (lo + hi) >> 1
                if _less(b_d[mid], b_id[mid], du, u):
                    lo = mid + 1
                else:
                    hi = mid
            pos = lo
            if pos < bn and b_id[pos] == u:
                continue
            last = bn if bn < L else L - 1
            for t in range(last, pos, -1):
                b_id[t] = b_id[t - 1]
                b_d[t] = b_d[t - 1]
                b_exp[t] = b_exp[t - 1]
            b_id[pos] = u
            b_d[pos] = du
            b_exp[pos] = False
            if bn < L:
                bn += 1
            if pos < cur:
                cur = pos

    kk = min(k, bn)
    return b_id[:kk].copy(), b_d[:kk].copy(), v_id[:nv].copy(), v_d[:nv].copy(), dc


def as_query(q, view: np.ndarray) -> np.ndarray:
    q = np.asarray(q)
    if q.ndim != 1 or q.shape[0] != view.shape[1]:
        raise ValueError(f"query dimension {q.shape} does not match dataset d={view.shape[1]}")
    return np.ascontiguousarray(q, dtype=view.dtype)


def _view(ds):
    return ds if isinstance(ds, np.ndarray) else ds.view()


def beam_search(g: NeighborGraph, ds, metric, q, params: SearchParams,
                counter: DistanceCounter | None = None, starts=None) -> SearchResult:
    metric = Metric.parse(metric)
    view = _view(ds)
    qv = as_query(q, view)
    if g.n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return SearchResult(empty, np.zeros(0, np.float32), empty, np.zeros(0, np.float32), 0)
    st = np.array([g.start] if starts is None else starts, dtype=np.int64)
    top, topd, vis, visd, dc = beam_search_kernel(
        g.ids, g.deg, g.cap, view, qv, st, params.L, params.k, params.epsilon,
        metric.code, params.seed)
    if counter is not None:
        counter.add(dc)
    return SearchResult(top, topd, vis, visd, int(dc))


def range_search(g: NeighborGraph, ds, metric, q, r: float, params: SearchParams,
                 counter: DistanceCounter | None = None, starts=None) -> np.ndarray:
    """Ids among the expanded vertices within internal-scale radius ``r``."""
    res = beam_search(g, ds, metric, q, params, counter, starts)
    return filter_range(res, r)


def filter_range(res: SearchResult, r: float) -> np.ndarray:
    keep = res.visited_dists <= r
    order = np.lexsort((res.visited_ids[keep], res.visited_dists[keep]))
    return res.visited_ids[keep][order]


def beam_search_reference(g: NeighborGraph, ds, metric, q, params: SearchParams,
                          counter: DistanceCounter, starts=None) -> SearchResult:
    """Plain-Python twin of :func:`beam_search`.

    Every distance goes through :func:`graphann.metrics.distance`, so a hook on
    ``counter`` observes each evaluation. Used to cross-check the kernel.
    """
    metric = Metric.parse(metric)
    view = _view(ds)
    qv = as_query(q, view)
    table = ApproxVisitedSet(params.L, params.seed)
    L, k, eps = params.L, params.k, params.epsilon
    beam: list[list] = []  # [dist, id, expanded]
    visited = []
    before = counter.count

    def offer(u):
        if u in table:
            return
        table.add(u)
        du = np.float32(distance(metric, qv, view[u], counter))
        key = (du, u)
        if len(beam) == L and not key < (beam[-1][0], beam[-1][1]):
            return
        if any(b[1] == u for b in beam):
            return
        beam.append([du, u, False])
        beam.sort(key=lambda b: (b[0], b[1]))
        del beam[L:]

    for s in ([g.start] if starts is None else starts):
        if s >= 0:
            offer(int(s))
    while True:
        nxt = next((b for b in beam if not b[2]), None)
        if nxt is None:
            break
        if eps > 0 and len(beam) >= k:
            dk = beam[k - 1][0]
            if nxt[0] > dk + eps * abs(dk):
                break
        nxt[2] = True
        visited.append((nxt[1], nxt[0]))
        for u in g.out_neighbors(nxt[1]):
            offer(int(u))
    top = beam[:k]
    return SearchResult(
        np.array([b[1] for b in top], dtype=np.int64),
        np.array([b[0] for b in top], dtype=np.float32),
        np.array([v[0] for v in visited], dtype=np.int64),
        np.array([v[1] for v in visited], dtype=np.float32),
        counter.count - before,
    )
