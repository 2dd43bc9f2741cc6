"""HCNNG: union of degree-bounded spanning forests over random cluster leaves.

Each tree recursively splits the point set by two random pivots until the
leaves hold at most ``Ls`` points. Inside a leaf, Kruskal runs over the edges
to each point's ``k_mst`` nearest leaf-mates, accepting an edge only if it
joins two components and both endpoints are below the degree cap ``s``.
Trees run one after another; leaves of a tree are processed in parallel and
their (bidirected) edges merged into the graph grouped by source vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .diskann import MERGE_TRUNCATE, choose_start, merge_groups_kernel, worker_threads
from .graph import NeighborGraph
from .metrics import Metric, dist
from .semisort import semisort


@dataclass(frozen=True)
class HcnngParams:
    T: int = 30
    Ls: int = 1000
    s: int = 3
    k_mst: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.Ls < 2 or self.s < 1:
            raise ValueError("need T >= 1, Ls >= 2, s >= 1")

    @property
    def knn(self) -> int:
        return self.k_mst if self.k_mst is not None else max(3 * self.s, 10)

    @property
    def cap(self) -> int:
        return self.T * self.s


@numba.njit(nogil=True, cache=True)
def _split_side(data, subset, a, b, metric):
    side = np.empty(subset.shape[0], dtype=np.bool_)
    pa = data[a]
    pb = data[b]
    for i in range(subset.shape[0]):
        x = data[subset[i]]
        side[i] = dist(x, pa, metric) <= dist(x, pb, metric)
    return side


def cluster_leaves(ds, subset, Ls: int, seed: int = 0, metric=Metric.EUCLIDEAN_SQUARED) -> list[np.ndarray]:
    """Two-pivot random partition of ``subset`` into leaves of size <= ``Ls``.

    Ties go to the first pivot. If a split leaves one side empty the subset
    is halved by position instead, which guarantees termination.
    """
    metric = Metric.parse(metric)
    view = ds if isinstance(ds, np.ndarray) else ds.view()
    rng = np.random.default_rng(seed)
    leaves = []
    stack = [np.asarray(subset, dtype=np.int64)]
    while stack:
        cur = stack.pop()
        if len(cur) <= Ls:
            leaves.append(cur)
            continue
        i, j = rng.choice(len(cur), size=2, replace=False)
        side = _split_side(view, cur, cur[i], cur[j], metric.code)
        left, right = cur[side], cur[~side]
        if len(left) == 0 or len(right) == 0:
            half = len(cur) // 2
            left, right = cur[:half], cur[half:]
        stack.append(right)
        stack.append(left)
    return leaves


@numba.njit(inline="always", nogil=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(nogil=True, cache=True)
def _leaf_knn(data, leaf, k, metric):
    """Indices (into ``leaf``) and distances of each point's k nearest leaf-mates."""
    m = leaf.shape[0]
    k = min(k, m - 1)
    nb = np.empty((m, k), dtype=np.int64)
    nd = np.empty((m, k), dtype=np.float32)
    row = np.empty(m, dtype=np.float32)
    for i in range(m):
        for j in range(m):
            row[j] = dist(data[leaf[i]], data[leaf[j]], metric)
        row[i] = np.inf
        order = np.argsort(row, kind="mergesort")[:k]
        nb[i] = order
        nd[i] = row[order]
    return nb, nd


@numba.njit(nogil=True, cache=True)
def _leaf_mst(data, leaf, s, k, metric):
    """Degree-capped Kruskal over kNN candidate edges; returns ((E, 2) global ids, weights)."""
    m = leaf.shape[0]
    if m < 2:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.float32)
    nb, nd = _leaf_knn(data, leaf, k, metric)
    kk = nb.shape[1]
    eu = np.empty(m * kk, dtype=np.int64)
    ev = np.empty(m * kk, dtype=np.int64)
    ew = np.empty(m * kk, dtype=np.float32)
    for i in range(m):
        for j in range(kk):
            a = i
            b = nb[i, j]
            eu[i * kk + j] = min(a, b)
            ev[i * kk + j] = max(a, b)
            ew[i * kk + j] = nd[i, j]
    # order by (weight, min id, max id); stable passes from the last key
    o = np.argsort(ev, kind="mergesort")
    o = o[np.argsort(eu[o], kind="mergesort")]
    o = o[np.argsort(ew[o], kind="mergesort")]
    parent = np.arange(m)
    degree = np.zeros(m, dtype=np.int64)
    out_e = np.empty((m - 1, 2), dtype=np.int64)
    out_w = np.empty(m - 1, dtype=np.float32)
    cnt = 0
    pu = -1
    pv = -1
    for t in range(o.shape[0]):
        a = eu[o[t]]
        b = ev[o[t]]
        if a == pu and b == pv:
            continue  # same edge listed from both endpoints
        pu = a
        pv = b
        if degree[a] >= s or degree[b] >= s:
            continue
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        parent[ra] = rb
        degree[a] += 1
        degree[b] += 1
        out_e[cnt, 0] = leaf[a]
        out_e[cnt, 1] = leaf[b]
        out_w[cnt] = ew[o[t]]
        cnt += 1
        if cnt == m - 1:
            break
    return out_e[:cnt].copy(), out_w[:cnt].copy()


@numba.njit(parallel=True, cache=True)
def _forest_kernel(data, flat, offsets, s, k, metric):
    nl = offsets.shape[0] - 1
    counts = np.zeros(nl, dtype=np.int64)
    edges = np.empty((flat.shape[0], 2), dtype=np.int64)
    for i in numba.prange(nl):
        e, _ = _leaf_mst(data, flat[offsets[i]:offsets[i + 1]], s, k, metric)
        # a leaf of size m yields at most m - 1 edges: slots [offsets[i], offsets[i+1]) suffice
        edges[offsets[i]:offsets[i] + e.shape[0]] = e
        counts[i] = e.shape[0]
    return edges, counts


def leaf_mst(ds, leaf, s: int, k_mst: int, metric=Metric.EUCLIDEAN_SQUARED):
    """Return ``(edges, weights)`` of the degree-capped spanning forest of ``leaf``."""
    metric = Metric.parse(metric)
    view = ds if isinstance(ds, np.ndarray) else ds.view()
    return _leaf_mst(view, np.asarray(leaf, dtype=np.int64), s, k_mst, metric.code)


def tree_edges(ds, params: HcnngParams, tree: int, metric=Metric.EUCLIDEAN_SQUARED):
    """Leaves and forest edges produced by one clustering tree."""
    metric = Metric.parse(metric)
    view = ds.view()
    leaves = cluster_leaves(view, np.arange(ds.n), params.Ls, params.seed * 1_000_003 + tree, metric)
    offsets = np.zeros(len(leaves) + 1, dtype=np.int64)
    np.cumsum([len(l) for l in leaves], out=offsets[1:])
    edges, counts = _forest_kernel(view, np.concatenate(leaves), offsets, params.s, params.knn,
                                   metric.code)
    keep = np.arange(len(edges)) - np.repeat(offsets[:-1], np.diff(offsets)) < np.repeat(counts, np.diff(offsets))
    return leaves, edges[keep]


def build_hcnng(ds, params: HcnngParams = HcnngParams(), workers: int | None = None,
                metric=Metric.EUCLIDEAN_SQUARED, trace: list | None = None) -> NeighborGraph:
    """Merge ``T`` trees' forests into one graph of capacity ``T*s``.

    ``trace`` (if given) receives ``(leaves, edges)`` per tree for auditing.
    """
    metric = Metric.parse(metric)
    view = ds.view()
    g = NeighborGraph(ds.n, params.cap, start=choose_start(ds, metric))
    with worker_threads(workers):
        for t in range(params.T):
            leaves, edges = tree_edges(ds, params, t, metric)
            if trace is not None:
                trace.append((leaves, edges))
            if len(edges) == 0:
                continue
            src = np.concatenate([edges[:, 0], edges[:, 1]])
            dst = np.concatenate([edges[:, 1], edges[:, 0]])
            _, vals, offsets, keys = semisort(src, dst, ds.n, params.seed + t)
            merge_groups_kernel(g.ids, g.deg, g.cap, view, keys, offsets, vals, g.cap,
                                np.float32(1.0), metric.code, MERGE_TRUNCATE)
    g.meta.update(algorithm="hcnng", T=params.T, Ls=params.Ls, s=params.s, k_mst=params.knn)
    return g
