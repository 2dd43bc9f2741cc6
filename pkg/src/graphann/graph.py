"""Flat fixed-capacity adjacency shared by every builder.

Vertex ``v`` owns slots ``[v*cap, v*cap + deg[v])`` of ``ids``; slots past the
degree are garbage and never read.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import FormatError

MAGIC = b"ANNG"
VERSION = 1


class GraphInvariantError(AssertionError):
    pass


@dataclass
class NeighborGraph:
    n: int
    cap: int
    ids: np.ndarray = None
    deg: np.ndarray = None
    start: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 0 or self.cap < 0:
            raise ValueError("n and cap must be nonnegative")
        if self.ids is None:
            self.ids = np.zeros(self.n * self.cap, dtype=np.int32)
        if self.deg is None:
            self.deg = np.zeros(self.n, dtype=np.int32)

    def _check_vertex(self, v):
        if not 0 <= v < self.n:
            raise IndexError(f"vertex {v} outside [0, {self.n})")

    def out_neighbors(self, v: int) -> np.ndarray:
        self._check_vertex(v)
        base = v * self.cap
        return self.ids[base:base + self.deg[v]]

    def set_neighbors(self, v: int, nbrs) -> None:
        self._check_vertex(v)
        nbrs = np.asarray(nbrs, dtype=np.int64).ravel()
        if len(nbrs) > self.cap:
            raise GraphInvariantError(f"{len(nbrs)} neighbors exceed capacity {self.cap}")
        if len(nbrs) and (nbrs.min() < 0 or nbrs.max() >= self.n):
            raise GraphInvariantError("neighbor id out of range")
        if np.any(nbrs == v):
            raise GraphInvariantError("self-loop")
        if len(np.unique(nbrs)) != len(nbrs):
            raise GraphInvariantError("duplicate neighbor")
        base = v * self.cap
        self.ids[base:base + len(nbrs)] = nbrs
        self.deg[v] = len(nbrs)

    def degrees(self) -> np.ndarray:
        return self.deg

    def mean_degree(self) -> float:
        return float(self.deg.mean()) if self.n else 0.0

    def adjacency(self) -> list[np.ndarray]:
        return [self.out_neighbors(v) for v in range(self.n)]

    def edges(self) -> set[tuple[int, int]]:
        return {(v, int(u)) for v in range(self.n) for u in self.out_neighbors(v)}

    def structurally_equal(self, other: "NeighborGraph") -> bool:
        if (self.n, self.cap, self.start) != (other.n, other.cap, other.start):
            return False
        if not np.array_equal(self.deg, other.deg):
            return False
        return all(np.array_equal(self.out_neighbors(v), other.out_neighbors(v)) for v in range(self.n))

    def check(self, max_degree: int | None = None) -> None:
        """Raise :class:`GraphInvariantError` on any broken invariant."""
        bound = self.cap if max_degree is None else min(max_degree, self.cap)
        if self.n and not 0 <= self.start < self.n:
            raise GraphInvariantError("start vertex out of range")
        if np.any(self.deg < 0) or np.any(self.deg > bound):
            raise GraphInvariantError(f"degree outside [0, {bound}]")
        for v in range(self.n):
            nb = self.out_neighbors(v)
            if len(nb) == 0:
                continue
            if nb.min() < 0 or nb.max() >= self.n:
                raise GraphInvariantError(f"vertex {v}: neighbor id out of range")
            if np.any(nb == v):
                raise GraphInvariantError(f"vertex {v}: self-loop")
            if len(np.unique(nb)) != len(nb):
                raise GraphInvariantError(f"vertex {v}: duplicate neighbor")

    def reachable_from_start(self) -> int:
        """Number of vertices reachable from ``start`` by BFS."""
        if self.n == 0:
            return 0
        seen = np.zeros(self.n, dtype=bool)
        seen[self.start] = True
        todo = deque([self.start])
        while todo:
            v = todo.popleft()
            for u in self.out_neighbors(v):
                if not seen[u]:
                    seen[u] = True
                    todo.append(u)
        return int(seen.sum())

    # serialization

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(np.array([VERSION, self.n, self.cap, self.start], dtype="<u4").tobytes())
        buf.write(self.deg.astype("<u4").tobytes())
        if self.n:
            live = np.arange(self.cap)[None, :] < self.deg[:, None]
            buf.write(self.ids.reshape(self.n, self.cap)[live].astype("<u4").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "NeighborGraph":
        if len(raw) < 20 or raw[:4] != MAGIC:
            raise FormatError("not a graph file")
        version, n, cap, start = (int(x) for x in np.frombuffer(raw, dtype="<u4", count=4, offset=4))
        if version != VERSION:
            raise FormatError(f"unsupported graph version {version}")
        if len(raw) < 20 + 4 * n:
            raise FormatError("truncated degree array")
        deg = np.frombuffer(raw, dtype="<u4", count=n, offset=20).astype(np.int64)
        if np.any(deg > cap):
            raise FormatError("stored degree exceeds capacity")
        total = int(deg.sum())
        if len(raw) != 20 + 4 * n + 4 * total:
            raise FormatError("graph file size does not match degree array")
        if n and start >= n:
            raise FormatError("start vertex out of range")
        live_ids = np.frombuffer(raw, dtype="<u4", count=total, offset=20 + 4 * n).astype(np.int32)
        if total and live_ids.max() >= n:
            raise FormatError("neighbor id out of range")
        ids = np.zeros(n * cap, dtype=np.int32)
        if n:
            live = np.arange(cap)[None, :] < deg[:, None]
            ids.reshape(n, cap)[live] = live_ids
        return cls(n, cap, ids, deg.astype(np.int32), start)


def save_graph(g: NeighborGraph, path) -> None:
    Path(path).write_bytes(g.to_bytes())


def load_graph(path) -> NeighborGraph:
    return NeighborGraph.from_bytes(Path(path).read_bytes())


def from_adjacency(adj, start: int = 0, cap: int | None = None) -> NeighborGraph:
    """Build a graph from a list of neighbor lists (test and tooling helper)."""
    cap = max((len(a) for a in adj), default=0) if cap is None else cap
    g = NeighborGraph(len(adj), cap, start=start)
    for v, a in enumerate(adj):
        g.set_neighbors(v, a)
    return g
