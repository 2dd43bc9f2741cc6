"""Hierarchical NSW built layer by layer with the prefix-doubling batch insert.

Levels follow ``floor(-ln(u) / ln(m))`` with ``u`` drawn per point from a
counter-based generator, so a point's level depends only on ``(seed, id)``.
Layers are built strictly top-down; within a layer, members are inserted in
batches exactly as in :mod:`graphann.diskann`, each insertion searching from
the greedy descent through the finished upper layers and from the entry.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .dataset import FormatError
from .diskann import insert_batch, prefix_doubling_batches, worker_threads
from .graph import GraphInvariantError, NeighborGraph
from .metrics import DistanceCounter, Metric
from .search import SearchParams, SearchResult, as_query, beam_search, beam_search_kernel

MAGIC = b"ANNH"
VERSION = 1


@dataclass(frozen=True)
class HnswParams:
    m: int = 32
    efc: int = 128
    alpha: float = 0.82
    level_seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.efc < 1:
            raise ValueError("efc must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass
class HnswIndex:
    layers: list  # NeighborGraph per layer, top first; last is the bottom layer
    levels: np.ndarray
    entry: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def bottom(self) -> NeighborGraph:
        return self.layers[-1]

    def layer_members(self, depth: int) -> np.ndarray:
        """Ids present in ``layers[depth]`` (depth 0 is the top)."""
        level = len(self.layers) - 1 - depth
        return np.flatnonzero(self.levels >= level)

    def check(self, m: int | None = None) -> None:
        top = len(self.layers) - 1
        if self.n == 0:
            return
        if self.levels[self.entry] != self.levels.max():
            raise GraphInvariantError("entry is not a top-level point")
        for depth, layer in enumerate(self.layers):
            level = top - depth
            bound = None if m is None else (2 * m if level == 0 else m)
            layer.check(bound)
            absent = self.levels < level
            if np.any(layer.deg[absent] > 0):
                raise GraphInvariantError(f"layer {level}: edges on a non-member")
            for v in np.flatnonzero(~absent):
                if np.any(self.levels[layer.out_neighbors(v)] < level):
                    raise GraphInvariantError(f"layer {level}: edge to a non-member")
        # nesting: membership is defined by level, so layer l+1 members are in layer l

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(np.array([VERSION, self.n, len(self.layers), self.entry], dtype="<u4").tobytes())
        buf.write(self.levels.astype("<u4").tobytes())
        for layer in self.layers:
            blob = layer.to_bytes()
            buf.write(np.array([len(blob)], dtype="<u8").tobytes())
            buf.write(blob)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "HnswIndex":
        if len(raw) < 20 or raw[:4] != MAGIC:
            raise FormatError("not an HNSW index file")
        version, n, nl, entry = (int(x) for x in np.frombuffer(raw, dtype="<u4", count=4, offset=4))
        if version != VERSION:
            raise FormatError(f"unsupported index version {version}")
        pos = 20 + 4 * n
        if len(raw) < pos:
            raise FormatError("truncated level table")
        levels = np.frombuffer(raw, dtype="<u4", count=n, offset=20).astype(np.int32)
        layers = []
        for _ in range(nl):
            if len(raw) < pos + 8:
                raise FormatError("truncated layer header")
            size = int(np.frombuffer(raw, dtype="<u8", count=1, offset=pos)[0])
            pos += 8
            layers.append(NeighborGraph.from_bytes(raw[pos:pos + size]))
            pos += size
        if pos != len(raw):
            raise FormatError("trailing bytes after last layer")
        return cls(layers, levels, entry)


def save_index(index: HnswIndex, path) -> None:
    Path(path).write_bytes(index.to_bytes())


def load_index(path) -> HnswIndex:
    return HnswIndex.from_bytes(Path(path).read_bytes())


def _uniform(seed: int, ids) -> np.ndarray:
    """Uniform in (0, 1] from a splitmix64 hash of ``(seed, id)``."""
    with np.errstate(over="ignore"):
        x = np.asarray(ids, dtype=np.uint64) + np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * np.uint64(0x9E3779B97F4A7C15)
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return ((x >> np.uint64(11)).astype(np.float64) + 1.0) / float(1 << 53)


def level_from_uniform(u, m: int):
    # the epsilon keeps exact powers of 1/m on the upper side of the floor
    return np.floor(-np.log(u) / np.log(m) + 1e-12).astype(np.int32)


def assign_level(point_id: int, m: int, seed: int = 0) -> int:
    if m < 2:
        raise ValueError("m must be >= 2")
    return int(level_from_uniform(_uniform(seed, [point_id]), m)[0])


def assign_levels(n: int, m: int, seed: int = 0) -> np.ndarray:
    return level_from_uniform(_uniform(seed, np.arange(n)), m)


def pick_entry(levels: np.ndarray) -> int:
    return int(np.argmax(levels))  # first maximum: ties go to the smaller id


@numba.njit(parallel=True, cache=True)
def _descend_kernel(ids, deg, cap, data, pts, cur, metric, seed):
    out = np.empty_like(cur)
    for t in numba.prange(pts.shape[0]):
        st = np.empty(1, dtype=np.int64)
        st[0] = cur[t]
        top, _, _, _, _ = beam_search_kernel(ids, deg, cap, data, data[pts[t]], st, 1, 1, 0.0,
                                             metric, seed)
        out[t] = top[0]
    return out


def build_hnsw(ds, params: HnswParams = HnswParams(), workers: int | None = None,
               metric=Metric.EUCLIDEAN_SQUARED, levels: np.ndarray | None = None,
               seed: int = 0) -> HnswIndex:
    """Build the layered index. ``levels`` overrides the random level draw."""
    metric = Metric.parse(metric)
    view = ds.view()
    n = ds.n
    levels = assign_levels(n, params.m, params.level_seed) if levels is None else np.asarray(levels, np.int32)
    entry = pick_entry(levels)
    top = int(levels[entry])
    rng = np.random.default_rng(seed)
    layers = []
    with worker_threads(workers):
        for level in range(top, -1, -1):
            cap = 2 * params.m if level == 0 else params.m
            g = NeighborGraph(n, cap, start=entry)
            members = np.flatnonzero(levels >= level)
            members = members[members != entry]
            order = np.concatenate([[entry], rng.permutation(members)]).astype(np.int64)
            for i, (lo, hi) in enumerate(prefix_doubling_batches(len(order))):
                pts = order[lo:hi]
                cur = np.full(len(pts), entry, dtype=np.int64)
                for upper in layers:
                    cur = _descend_kernel(upper.ids, upper.deg, upper.cap, view, pts, cur,
                                          metric.code, 0x2545F491)
                starts = np.stack([cur, np.full(len(pts), entry, dtype=np.int64)], axis=1)
                insert_batch(g, view, pts, np.ascontiguousarray(starts), params.efc, cap,
                             params.alpha, metric.code, semisort_seed=seed + i)
                if g.deg.max() > cap:
                    raise GraphInvariantError("degree bound exceeded after batch")
            layers.append(g)
    index = HnswIndex(layers, levels, entry)
    index.meta.update(algorithm="hnsw", m=params.m, efc=params.efc, alpha=params.alpha)
    return index


def search_hnsw(index: HnswIndex, ds, metric, q, params: SearchParams,
                counter: DistanceCounter | None = None) -> SearchResult:
    """Beam-1 descent through the upper layers, then a full beam search below."""
    metric = Metric.parse(metric)
    view = ds if isinstance(ds, np.ndarray) else ds.view()
    qv = as_query(q, view)
    cur = index.entry
    dc = 0
    st = np.empty(1, dtype=np.int64)
    for layer in index.layers[:-1]:
        st[0] = cur
        top, _, _, _, c = beam_search_kernel(layer.ids, layer.deg, layer.cap, view, qv, st, 1, 1,
                                             0.0, metric.code, params.seed)
        cur = int(top[0])
        dc += c
    res = beam_search(index.bottom, view, metric, qv, params, starts=[cur])
    res.dist_comps += dc
    if counter is not None:
        counter.add(res.dist_comps)
    return res
