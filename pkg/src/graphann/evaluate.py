"""Recall, range recall, throughput and distance-comparison measurement."""

from __future__ import annotations

import csv
import itertools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import GroundTruth, RangeGroundTruth
from .graph import NeighborGraph
from .hnsw import HnswIndex, search_hnsw
from .metrics import Metric
from .search import SearchParams, SearchResult, beam_search, filter_range

log = logging.getLogger(__name__)

CSV_HEADER = ["algorithm", "dataset", "n", "build_seconds", "beam", "k", "epsilon", "recall",
              "qps", "latency_ms", "dist_comps"]


@dataclass(frozen=True)
class SweepConfig:
    beams: tuple = (10, 20, 50, 100)
    ks: tuple = (10,)
    epsilons: tuple = (0.0,)
    threads: int | None = None
    repetitions: int = 1

    def __post_init__(self):
        if not (self.beams and self.ks and self.epsilons):
            raise ValueError("sweep lists must be nonempty")
        if any(e < 0 or e > 0.25 for e in self.epsilons):
            raise ValueError("epsilon values must lie in [0, 0.25]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def points(self):
        return [SearchParams(L=b, k=k, epsilon=e)
                for b, k, e in itertools.product(self.beams, self.ks, self.epsilons)]


@dataclass
class EvalRow:
    beam: int
    k: int
    epsilon: float
    recall: float
    qps: float
    latency_ms: float
    dist_comps: float


@dataclass
class EvalReport:
    rows: list
    algorithm: str = ""
    dataset: str = ""
    n: int = 0
    build_seconds: float = 0.0
    build_params: dict = field(default_factory=dict)
    threads: int = 1

    def best_for_recall(self, target: float):
        """Fastest row with recall >= target, or None."""
        ok = [r for r in self.rows if r.recall >= target]
        return max(ok, key=lambda r: r.qps) if ok else None


def recall_k_at_n(truth_ids, truth_dists, result, k: int) -> float:
    """|K ∩ N| / k with ties at the k-th truth distance counted as hits.

    ``truth_ids``/``truth_dists`` is one ground-truth row of depth >= k; any
    id deeper in the row whose distance equals the k-th distance is accepted.
    """
    truth_ids = np.asarray(truth_ids)
    if len(truth_ids) < k:
        raise ValueError(f"ground truth depth {len(truth_ids)} < k={k}")
    accepted = set(truth_ids[:k].tolist())
    if truth_dists is not None:
        truth_dists = np.asarray(truth_dists)
        kth = truth_dists[k - 1]
        accepted.update(truth_ids[k:][truth_dists[k:] == kth].tolist())
    hits = len(accepted.intersection(np.asarray(result).tolist()))
    return min(hits, k) / k


def mean_recall(gt: GroundTruth, results, k: int) -> float:
    return float(np.mean([recall_k_at_n(gt.ids[i], gt.dists[i], r, k) for i, r in enumerate(results)]))


def range_recall(truth: RangeGroundTruth, results) -> float | None:
    """Mean of |V_i ∩ L_i| / |V_i| over queries with nonempty truth.

    Returns None when every truth set is empty.
    """
    if len(results) != len(truth):
        raise ValueError("results are not aligned with the ground truth")
    scores = []
    for i, res in enumerate(results):
        v = truth.row(i)
        if len(v) == 0:
            continue
        scores.append(len(np.intersect1d(v, np.asarray(res))) / len(v))
    return float(np.mean(scores)) if scores else None


def make_searcher(index, ds, metric):
    metric = Metric.parse(metric)
    view = ds if isinstance(ds, np.ndarray) else ds.view()
    if isinstance(index, HnswIndex):
        return lambda q, p: search_hnsw(index, view, metric, q, p)
    if isinstance(index, NeighborGraph):
        return lambda q, p: beam_search(index, view, metric, q, p)
    raise TypeError(f"unsupported index type {type(index).__name__}")


@dataclass
class QpsResult:
    qps: float
    latency_ms: float
    dist_comps: float
    results: list  # SearchResult per query, from the last repetition
    dist_comps_each: np.ndarray


def _run_once(searcher, queries, params, threads):
    nq = len(queries)
    out: list[SearchResult | None] = [None] * nq
    lat = np.zeros(nq)

    def work(lo, hi):
        for i in range(lo, hi):
            t0 = time.perf_counter()
            out[i] = searcher(queries[i], params)
            lat[i] = time.perf_counter() - t0

    bounds = np.linspace(0, nq, threads + 1).astype(int)
    t0 = time.perf_counter()
    if threads == 1:
        work(0, nq)
    else:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, bounds[:-1], bounds[1:]))
    return time.perf_counter() - t0, lat, out


def measure_qps(index, ds, queries, params: SearchParams, threads: int | None = None,
                repetitions: int = 1, metric=Metric.EUCLIDEAN_SQUARED) -> QpsResult:
    """Best-of-``repetitions`` QPS; mean latency and distance comparisons."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    threads = threads or os.cpu_count() or 1
    searcher = make_searcher(index, ds, metric)
    qdata = queries if isinstance(queries, np.ndarray) else queries.data
    if len(qdata):
        searcher(qdata[0], params)  # warm-up: keep compilation out of the timed region
    best, lats, comps, results = 0.0, [], [], None
    for _ in range(repetitions):
        wall, lat, results = _run_once(searcher, qdata, params, threads)
        best = max(best, len(qdata) / max(wall, 1e-12))
        lats.append(lat)
        comps.append([r.dist_comps for r in results])
    comps = np.asarray(comps, dtype=np.int64)
    return QpsResult(best, float(np.mean(lats)) * 1e3, float(comps.mean()), results, comps[-1])


def run_sweep(index, ds, queries, truth, sweep: SweepConfig, metric=Metric.EUCLIDEAN_SQUARED,
              **meta) -> EvalReport:
    """One row per (beam, k, epsilon); recall is range recall for range truth."""
    if isinstance(truth, GroundTruth) and truth.k < max(sweep.ks):
        raise ValueError(f"ground truth depth {truth.k} < max k {max(sweep.ks)}")
    rows = []
    for params in sweep.points():
        m = measure_qps(index, ds, queries, params, sweep.threads, sweep.repetitions, metric)
        if isinstance(truth, RangeGroundTruth):
            found = [filter_range(r, truth.radius) for r in m.results]
            rec = range_recall(truth, found)
            rec = float("nan") if rec is None else rec
        else:
            rec = mean_recall(truth, [r.ids for r in m.results], params.k)
        rows.append(EvalRow(params.L, params.k, params.epsilon, rec, m.qps, m.latency_ms, m.dist_comps))
        log.info("L=%d k=%d eps=%.3f recall=%.4f qps=%.0f comps=%.1f", params.L, params.k,
                 params.epsilon, rec, m.qps, m.dist_comps)
    rows.sort(key=lambda r: (r.recall, r.qps))
    return EvalReport(rows, threads=sweep.threads or os.cpu_count() or 1, **meta)


def pareto_frontier(rows) -> list:
    """Rows not dominated in (recall, qps), recall ascending, duplicates collapsed."""
    if isinstance(rows, EvalReport):
        rows = rows.rows
    uniq = {(r.recall, r.qps): r for r in reversed(rows)}
    pts = list(uniq.values())
    front = [r for r in pts
             if not any(o.recall >= r.recall and o.qps >= r.qps and (o.recall, o.qps) != (r.recall, r.qps)
                        for o in pts)]
    return sorted(front, key=lambda r: (r.recall, r.qps))


def write_csv(report: EvalReport, path, rows=None) -> None:
    rows = report.rows if rows is None else rows
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([report.algorithm, report.dataset, report.n, f"{report.build_seconds:.3f}",
                        r.beam, r.k, r.epsilon, f"{r.recall:.6f}", f"{r.qps:.1f}",
                        f"{r.latency_ms:.4f}", f"{r.dist_comps:.2f}"])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
