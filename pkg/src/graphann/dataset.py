"""Vector datasets and ground truth in BigANN-ecosystem file formats.

Supported vector files:

* ``*vecs`` (``fvecs``, ``bvecs``, ``ivecs``-style): every row prefixed by a
  4-byte little-endian dimension.
* BigANN binary (``fbin``, ``u8bin``, ``i8bin``): header ``n, d`` as two
  little-endian u32, then ``n*d`` values.

Ground-truth files follow the BigANN convention: ``nq, k`` header, ``nq*k``
u32 ids, then ``nq*k`` f32 distances. Range ground truth uses the BigANN
range layout: ``nq, total`` header, ``nq`` u32 counts, ``total`` ids,
``total`` f32 distances. Euclidean distances are stored unsquared on disk.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numba
import numpy as np

from .metrics import Metric, compute_view, dist


class FormatError(ValueError):
    pass


ELEM_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("u1"), "i8": np.dtype("i1")}


@dataclass(frozen=True)
class VectorDataset:
    data: np.ndarray  # (n, d) row-major

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError("dataset must be 2-d")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("dataset needs n >= 1 and d >= 1")
        if self.data.dtype not in (np.float32, np.uint8, np.int8):
            raise ValueError(f"unsupported element type {self.data.dtype}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def elem(self) -> str:
        return {np.dtype(np.float32): "f32", np.dtype(np.uint8): "u8", np.dtype(np.int8): "i8"}[self.data.dtype]

    @cached_property
    def _view(self) -> np.ndarray:
        return compute_view(self.data)

    def view(self) -> np.ndarray:
        return self._view

    def __len__(self):
        return self.n


@dataclass
class GroundTruth:
    ids: np.ndarray  # (nq, k) int32
    dists: np.ndarray  # (nq, k) float32, internal metric scale

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def __len__(self):
        return self.ids.shape[0]


@dataclass
class RangeGroundTruth:
    offsets: np.ndarray  # (nq + 1,) int64
    ids: np.ndarray
    dists: np.ndarray
    radius: float  # internal metric scale

    def __len__(self):
        return len(self.offsets) - 1

    def row(self, i: int) -> np.ndarray:
        return self.ids[self.offsets[i]:self.offsets[i + 1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)


def _guess_format(path: Path):
    name = path.name.lower()
    if name.endswith("vecs"):
        return "vecs"
    if name.endswith("bin"):
        return "bin"
    raise FormatError(f"cannot infer format of {path}")


def _guess_elem(path: Path, fmt: str):
    name = path.name.lower()
    if fmt == "vecs":
        if name.endswith("fvecs"):
            return "f32"
        if name.endswith("bvecs"):
            return "u8"
        raise FormatError(f"cannot infer element type of {path}; pass elem=")
    for suffix, elem in (("fbin", "f32"), ("u8bin", "u8"), ("i8bin", "i8")):
        if name.endswith(suffix):
            return elem
    return "f32"  # plain .bin


def load_vectors(path, fmt: str | None = None, elem: str | None = None) -> VectorDataset:
    path = Path(path)
    fmt = fmt or _guess_format(path)
    elem = elem or _guess_elem(path, fmt)
    dtype = ELEM_DTYPES[elem]
    raw = path.read_bytes()
    if fmt == "bin":
        if len(raw) < 8:
            raise FormatError("truncated header")
        n, d = np.frombuffer(raw, dtype="<u4", count=2)
        n, d = int(n), int(d)
        if n == 0 or d == 0:
            raise FormatError("n and d must be positive")
        body = len(raw) - 8
        if body != n * d * dtype.itemsize:
            raise FormatError(f"expected {n * d * dtype.itemsize} data bytes, found {body}")
        data = np.frombuffer(raw, dtype=dtype, offset=8).reshape(n, d)
    elif fmt == "vecs":
        if len(raw) < 4:
            raise FormatError("truncated file")
        d = int(np.frombuffer(raw, dtype="<u4", count=1)[0])
        if d == 0:
            raise FormatError("dimension must be positive")
        row = 4 + d * dtype.itemsize
        if len(raw) % row:
            raise FormatError("file size is not a whole number of rows")
        n = len(raw) // row
        rows = np.frombuffer(raw, dtype=np.uint8).reshape(n, row)
        dims = rows[:, :4].copy().view("<u4").ravel()
        if np.any(dims != d):
            bad = int(np.flatnonzero(dims != d)[0])
            raise FormatError(f"row {bad} has dimension {dims[bad]}, expected {d}")
        data = rows[:, 4:].copy().view(dtype).reshape(n, d)
    else:
        raise FormatError(f"unknown format {fmt!r}")
    return VectorDataset(np.ascontiguousarray(data, dtype=dtype.newbyteorder("=")))


def write_vectors(ds: VectorDataset, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or _guess_format(path)
    data = np.ascontiguousarray(ds.data, dtype=ELEM_DTYPES[ds.elem])
    with open(path, "wb") as f:
        if fmt == "bin":
            f.write(np.array([ds.n, ds.d], dtype="<u4").tobytes())
            f.write(data.tobytes())
        elif fmt == "vecs":
            rows = np.empty((ds.n, 4 + ds.d * data.itemsize), dtype=np.uint8)
            rows[:, :4] = np.full((ds.n, 1), ds.d, dtype="<u4").view(np.uint8)
            rows[:, 4:] = data.view(np.uint8).reshape(ds.n, -1)
            f.write(rows.tobytes())
        else:
            raise FormatError(f"unknown format {fmt!r}")


def slice_dataset(ds: VectorDataset, m: int) -> VectorDataset:
    if not 1 <= m <= ds.n:
        raise ValueError(f"slice size {m} outside [1, {ds.n}]")
    return VectorDataset(ds.data[:m])


def gaussian_mixture(n: int, d: int, clusters: int, seed: int = 0, spread: float = 1.5,
                     n_queries: int = 0):
    """Seeded mixture of unit-variance Gaussians around random centers.

    Centers are drawn from N(0, spread^2 I). Base points and queries use
    independent streams, so base rows do not depend on ``n_queries`` and
    queries are held out from the same mixture. Returns ``(base, queries)``;
    ``queries`` is None when ``n_queries == 0``.
    """
    if n < 1 or d < 1 or clusters < 1:
        raise ValueError("n, d and clusters must be positive")
    center_ss, base_ss, query_ss = np.random.SeedSequence(seed).spawn(3)
    centers = np.random.default_rng(center_ss).normal(0.0, spread, size=(clusters, d))

    def draw(ss, m):
        rng = np.random.default_rng(ss)
        labels = rng.integers(0, clusters, size=m)
        return (centers[labels] + rng.standard_normal((m, d))).astype(np.float32)

    base = VectorDataset(draw(base_ss, n))
    queries = VectorDataset(draw(query_ss, n_queries)) if n_queries else None
    return base, queries


@numba.njit(parallel=True, cache=True)
def _dist_matrix(base, queries, metric):
    out = np.empty((queries.shape[0], base.shape[0]), dtype=np.float32)
    for i in numba.prange(queries.shape[0]):
        for j in range(base.shape[0]):
            out[i, j] = dist(queries[i], base[j], metric)
    return out


def _check_dims(ds, queries):
    if queries.d != ds.d:
        raise ValueError(f"dimension mismatch: base d={ds.d}, queries d={queries.d}")


def _query_blocks(ds, queries, metric, block=256):
    base, qv = ds.view(), queries.view()
    if qv.dtype != base.dtype:
        base, qv = base.astype(np.float32), qv.astype(np.float32)
    for s in range(0, queries.n, block):
        yield s, _dist_matrix(base, qv[s:s + block], metric.code)


def compute_groundtruth(ds: VectorDataset, queries: VectorDataset, k: int,
                        metric: Metric | str = Metric.EUCLIDEAN_SQUARED) -> GroundTruth:
    """Exact k-NN by brute force; ties go to the smaller id."""
    metric = Metric.parse(metric)
    _check_dims(ds, queries)
    if not 1 <= k <= ds.n:
        raise ValueError(f"k={k} outside [1, {ds.n}]")
    ids = np.empty((queries.n, k), dtype=np.int32)
    dists = np.empty((queries.n, k), dtype=np.float32)
    for s, D in _query_blocks(ds, queries, metric):
        for r, row in enumerate(D):
            if k < ds.n:
                kth = np.partition(row, k - 1)[k - 1]
                cand = np.flatnonzero(row <= kth)
            else:
                cand = np.arange(ds.n)
            top = cand[np.argsort(row[cand], kind="stable")[:k]]
            ids[s + r] = top
            dists[s + r] = row[top]
    return GroundTruth(ids, dists)


def compute_range_groundtruth(ds: VectorDataset, queries: VectorDataset, r: float,
                              metric: Metric | str = Metric.EUCLIDEAN_SQUARED) -> RangeGroundTruth:
    """Exact in-range sets. ``r`` is in the internal metric scale."""
    metric = Metric.parse(metric)
    _check_dims(ds, queries)
    if metric is Metric.EUCLIDEAN_SQUARED and not r > 0:
        raise ValueError("radius must be positive")
    ids, dists, counts = [], [], []
    for _, D in _query_blocks(ds, queries, metric):
        for row in D:
            hit = np.flatnonzero(row <= r)
            hit = hit[np.argsort(row[hit], kind="stable")]
            ids.append(hit.astype(np.int32))
            dists.append(row[hit])
            counts.append(len(hit))
    offsets = np.zeros(queries.n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
    return RangeGroundTruth(offsets, cat(ids, np.int32), cat(dists, np.float32), float(r))


def write_groundtruth(gt: GroundTruth, path, metric: Metric | str = Metric.EUCLIDEAN_SQUARED) -> None:
    metric = Metric.parse(metric)
    with open(path, "wb") as f:
        f.write(np.array(gt.ids.shape, dtype="<u4").tobytes())
        f.write(gt.ids.astype("<u4").tobytes())
        f.write(metric.to_external(gt.dists).astype("<f4").tobytes())


def load_groundtruth(path, metric: Metric | str = Metric.EUCLIDEAN_SQUARED) -> GroundTruth:
    metric = Metric.parse(metric)
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError("truncated ground-truth header")
    nq, k = (int(x) for x in np.frombuffer(raw, dtype="<u4", count=2))
    if len(raw) != 8 + 8 * nq * k:
        raise FormatError("ground-truth size does not match header")
    ids = np.frombuffer(raw, dtype="<u4", count=nq * k, offset=8).astype(np.int32).reshape(nq, k)
    d = np.frombuffer(raw, dtype="<f4", count=nq * k, offset=8 + 4 * nq * k).reshape(nq, k)
    return GroundTruth(ids, metric.to_internal(d))


def write_range_groundtruth(gt: RangeGroundTruth, path, metric: Metric | str = Metric.EUCLIDEAN_SQUARED) -> None:
    metric = Metric.parse(metric)
    with open(path, "wb") as f:
        f.write(np.array([len(gt), len(gt.ids)], dtype="<u4").tobytes())
        f.write(gt.sizes().astype("<u4").tobytes())
        f.write(gt.ids.astype("<u4").tobytes())
        f.write(metric.to_external(gt.dists).astype("<f4").tobytes())


def load_range_groundtruth(path, radius: float, metric: Metric | str = Metric.EUCLIDEAN_SQUARED) -> RangeGroundTruth:
    metric = Metric.parse(metric)
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError("truncated range ground-truth header")
    nq, total = (int(x) for x in np.frombuffer(raw, dtype="<u4", count=2))
    if len(raw) != 8 + 4 * nq + 8 * total:
        raise FormatError("range ground-truth size does not match header")
    counts = np.frombuffer(raw, dtype="<u4", count=nq, offset=8).astype(np.int64)
    if counts.sum() != total:
        raise FormatError("range counts do not sum to total")
    offsets = np.zeros(nq + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    ids = np.frombuffer(raw, dtype="<u4", count=total, offset=8 + 4 * nq).astype(np.int32)
    d = np.frombuffer(raw, dtype="<f4", count=total, offset=8 + 4 * nq + 4 * total)
    return RangeGroundTruth(offsets, ids, metric.to_internal(d), float(radius))


def is_range_groundtruth(path) -> bool:
    """Distinguish the two ground-truth layouts by their size arithmetic."""
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        a, b = (int(x) for x in np.frombuffer(f.read(8), dtype="<u4"))
    return size != 8 + 8 * a * b and size == 8 + 4 * a + 8 * b
