import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import graphann.evaluate as ev
from graphann.dataset import (GroundTruth, RangeGroundTruth, VectorDataset, compute_groundtruth,
                              compute_range_groundtruth, gaussian_mixture)
from graphann.evaluate import (CSV_HEADER, EvalReport, EvalRow, SweepConfig, measure_qps,
                               pareto_frontier, range_recall, read_csv, recall_k_at_n, run_sweep,
                               write_csv)
from graphann.graph import from_adjacency
from graphann.metrics import DistanceCounter
from graphann.search import SearchParams, beam_search_reference

TRUTH = np.arange(20)
TRUTH_D = np.arange(20, dtype=np.float32)


def test_recall_examples():
    assert recall_k_at_n(TRUTH, TRUTH_D, TRUTH[:10], 10) == 1.0
    assert recall_k_at_n(TRUTH, TRUTH_D, [0, 1, 2, 3, 4, 50, 51, 52, 53, 54], 10) == 0.5


def test_recall_tie_tolerance():
    d = TRUTH_D.copy()
    d[10] = d[9]  # d_10 == d_11
    result = list(range(9)) + [10]
    assert recall_k_at_n(TRUTH, d, result, 10) == 1.0
    assert recall_k_at_n(TRUTH, TRUTH_D, result, 10) == 0.9


def test_recall_depth_checked():
    with pytest.raises(ValueError):
        recall_k_at_n(TRUTH[:5], TRUTH_D[:5], TRUTH[:5], 10)


@given(st.permutations(list(range(10))), st.lists(st.integers(0, 30), min_size=10, max_size=10, unique=True))
def test_recall_permutation_invariant(perm, result):
    r = np.array(result)
    assert recall_k_at_n(TRUTH, TRUTH_D, r, 10) == recall_k_at_n(TRUTH, TRUTH_D, r[perm], 10)


def rgt(rows, radius=1.0):
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=offsets[1:])
    ids = np.concatenate([np.asarray(r, dtype=np.int32) for r in rows]) if rows else np.zeros(0, np.int32)
    return RangeGroundTruth(offsets, ids, np.zeros(len(ids), np.float32), radius)


def test_range_recall_examples():
    t = rgt([[1, 2], [3]])
    assert range_recall(t, [[1, 2], [3]]) == 1.0
    assert range_recall(rgt([[1, 2, 3, 4], []]), [[1, 2], [9]]) == 0.5
    assert range_recall(t, [[1, 2, 7, 8], [3, 5]]) == 1.0
    assert range_recall(rgt([[], []]), [[1], []]) is None
    with pytest.raises(ValueError):
        range_recall(t, [[1]])


@given(st.lists(st.tuples(st.sets(st.integers(0, 30), max_size=8), st.sets(st.integers(0, 30), max_size=12)),
                min_size=1, max_size=10))
def test_range_recall_oracle(case):
    truth = [sorted(a) for a, _ in case]
    found = [sorted(b) for _, b in case]
    scores = [len(set(t) & set(f)) / len(t) for t, f in zip(truth, found) if t]
    got = range_recall(rgt(truth), found)
    if scores:
        assert got == pytest.approx(sum(scores) / len(scores))
    else:
        assert got is None


def test_qps_arithmetic(monkeypatch):
    walls = iter([0.5])
    monkeypatch.setattr(ev, "_run_once", lambda s, q, p, t: (next(walls), np.full(len(q), 1e-3),
                                                             [_fake() for _ in q]))
    m = measure_qps(from_adjacency([[]]), np.zeros((1, 1), np.float32), np.zeros((1000, 1), np.float32),
                    SearchParams(L=1, k=1), threads=1)
    assert m.qps == pytest.approx(2000)


def test_qps_best_of_repetitions(monkeypatch):
    walls = iter([1.0, 0.5, 0.8])
    monkeypatch.setattr(ev, "_run_once", lambda s, q, p, t: (next(walls), np.full(len(q), 1e-3),
                                                             [_fake() for _ in q]))
    m = measure_qps(from_adjacency([[]]), np.zeros((1, 1), np.float32), np.zeros((1000, 1), np.float32),
                    SearchParams(L=1, k=1), threads=1, repetitions=3)
    assert m.qps == pytest.approx(2000)
    assert m.latency_ms == pytest.approx(1.0)


def _fake():
    return ev.SearchResult(np.zeros(1, np.int64), np.zeros(1, np.float32), np.zeros(1, np.int64),
                           np.zeros(1, np.float32), 3)


def complete(n):
    return from_adjacency([[u for u in range(n) if u != v] for v in range(n)])


@pytest.fixture(scope="module")
def tiny():
    ds, q = gaussian_mixture(300, 5, 3, seed=4, n_queries=40)
    return ds, q, compute_groundtruth(ds, q, 20)


def test_brute_force_index_counts(tiny):
    ds, q, _ = tiny
    g = complete(ds.n)
    params = SearchParams(L=ds.n, k=10)
    m = measure_qps(g, ds, q, params, threads=2)
    for i, x in enumerate(q.data):
        c = DistanceCounter()
        beam_search_reference(g, ds, "l2", x, params, c)
        assert m.dist_comps_each[i] == c.count >= ds.n
    assert m.dist_comps == pytest.approx(np.mean(m.dist_comps_each))


def test_threads_do_not_change_results(tiny):
    ds, q, _ = tiny
    g = complete(ds.n)
    a = measure_qps(g, ds, q, SearchParams(L=30, k=10), threads=1)
    b = measure_qps(g, ds, q, SearchParams(L=30, k=10), threads=3)
    assert [r.ids.tolist() for r in a.results] == [r.ids.tolist() for r in b.results]


def test_sweep_shapes(tiny):
    ds, q, gt = tiny
    g = complete(ds.n)
    one = run_sweep(g, ds, q, gt, SweepConfig(beams=(20,), ks=(10,)))
    assert len(one.rows) == 1
    rep = run_sweep(g, ds, q, gt, SweepConfig(beams=(10, 20, ds.n), ks=(5, 10), epsilons=(0.0, 0.1)))
    assert len(rep.rows) == 12
    assert [r.recall for r in rep.rows] == sorted(r.recall for r in rep.rows)
    full = [r for r in rep.rows if r.beam == ds.n and r.epsilon == 0.0]
    assert all(r.recall == 1.0 for r in full)
    assert all(0 <= r.recall <= 1 and r.qps > 0 and r.dist_comps >= r.k for r in rep.rows)
    with pytest.raises(ValueError):
        run_sweep(g, ds, q, gt, SweepConfig(beams=(30,), ks=(25,)))


def test_sweep_range_mode(tiny):
    ds, q, _ = tiny
    truth = compute_range_groundtruth(ds, q, 3.0)
    rep = run_sweep(complete(ds.n), ds, q, truth, SweepConfig(beams=(ds.n,), ks=(1,)))
    assert rep.rows[0].recall == 1.0


def test_sweep_config_validation():
    for bad in (dict(beams=()), dict(epsilons=(0.3,)), dict(repetitions=0)):
        with pytest.raises(ValueError):
            SweepConfig(**bad)


def row(r, q):
    return EvalRow(10, 10, 0.0, r, q, 1.0, 100.0)


def test_pareto_examples():
    assert [(r.recall, r.qps) for r in pareto_frontier([row(.9, 100), row(.8, 50)])] == [(.9, 100)]
    assert len(pareto_frontier([row(.9, 100)] * 3)) == 1
    assert [(r.recall, r.qps) for r in pareto_frontier([row(.9, 100), row(.8, 200)])] == [(.8, 200), (.9, 100)]


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(1, 1e6)), min_size=1, max_size=30))
def test_pareto_nondominated(points):
    rows = [row(r, q) for r, q in points]
    front = pareto_frontier(rows)
    for f in front:
        assert not any(o.recall >= f.recall and o.qps >= f.qps and (o.recall, o.qps) != (f.recall, f.qps)
                       for o in rows)
    for r in rows:
        assert any(f.recall >= r.recall and f.qps >= r.qps for f in front)


def test_csv(tmp_path):
    rep = EvalReport([row(.8, 200), row(.9, 100)], "diskann", "desk", 10000, 1.5)
    write_csv(rep, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    back = read_csv(tmp_path / "r.csv")
    assert len(back) == 2 and back[1]["recall"] == "0.900000" and back[0]["algorithm"] == "diskann"
    assert rep.best_for_recall(0.85).qps == 100 and rep.best_for_recall(0.95) is None
