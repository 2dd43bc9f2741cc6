import warnings

import numpy as np
import pytest

from graphann.dataset import VectorDataset, compute_groundtruth, gaussian_mixture
from graphann.pynndescent import (PynndParams, build_pynndescent, descent_round, init_knn_graph,
                                  undirect_capped)


def line(*xs):
    return VectorDataset(np.array(xs, dtype=np.float32).reshape(-1, 1))


def lists(nbr, cnt):
    return [nbr[v, :cnt[v]].tolist() for v in range(len(cnt))]


def test_undirect_no_in_edges():
    nbr = np.array([[1, 2], [2, -1], [-1, -1]])
    cnt = np.array([2, 1, 0])
    U, c = undirect_capped(nbr, cnt, K=2)
    assert U[0, :c[0]].tolist() == [1, 2]


def test_undirect_cap_arithmetic():
    n, K = 121, 20
    nbr = np.full((n, K), -1)
    cnt = np.zeros(n, dtype=np.int64)
    nbr[0] = np.arange(101, 121)  # out-degree 20
    cnt[0] = K
    for v in range(1, 101):     # in-degree 100 from fresh sources
        nbr[v, 0] = 0
        cnt[v] = 1
    U, c = undirect_capped(nbr, cnt, K, seed=3)
    assert c[0] == 40
    row = U[0, :40]
    assert row[:20].tolist() == list(range(101, 121))
    assert set(row[20:].tolist()) <= set(range(1, 101)) and len(set(row.tolist())) == 40


def test_undirect_sampling_is_spread():
    n, K = 201, 5
    nbr = np.full((n, K), -1)
    cnt = np.zeros(n, dtype=np.int64)
    nbr[1:, 0] = 0
    cnt[1:] = 1
    hits = np.zeros(n)
    for seed in range(400):
        U, c = undirect_capped(nbr, cnt, K, seed=seed)
        hits[U[0, :c[0]]] += 1
    # each of 200 in-edges is kept with probability 10/200
    assert hits[0] == 0
    assert abs(hits[1:].mean() - 400 * 10 / 200) < 1e-9
    assert hits[1:].std() < 10


def test_undirect_symmetric_unchanged():
    nbr = np.array([[1, 2], [0, 2], [0, 1]])
    cnt = np.array([2, 2, 2])
    U, c = undirect_capped(nbr, cnt, K=2)
    assert [set(r) for r in lists(U, c)] == [{1, 2}, {0, 2}, {0, 1}]


def test_descent_hand_example():
    ds = line(0, 1, 2, 3)
    nbr = np.array([[3], [0], [3], [2]])
    nd = np.array([[9], [1], [1], [1]], dtype=np.float32)
    cnt = np.ones(4, dtype=np.int64)
    new, newd, newc, frac = descent_round(ds, nbr, nd, cnt, PynndParams(K=1, Ls=2))
    # 0's two-hop set over {0:3,1} {1:0} {3:2,0} contains 1, the closest point
    assert new[0, 0] == 1
    assert 0 <= frac <= 1


def _brute_changed(old, oc, new, nc):
    changed = sum(len(set(new[v, :nc[v]]) - set(old[v, :oc[v]])) for v in range(len(nc)))
    return changed / nc.sum()


@pytest.fixture(scope="module")
def small():
    return gaussian_mixture(1500, 6, 4, seed=3)[0]


def test_rounds_monotone_and_fraction_oracle(small):
    p = PynndParams(K=8, Ls=40, T_init=2)
    nbr, nd, cnt = init_knn_graph(small, p)
    for r in range(3):
        new, newd, newc, frac = descent_round(small, nbr, nd, cnt, p, round_seed=r)
        assert frac == pytest.approx(_brute_changed(nbr, cnt, new, newc))
        assert np.all(newc >= cnt) and np.all(newc <= p.K)
        # pointwise: the i-th closest neighbor never gets farther
        for v in range(small.n):
            assert np.all(newd[v, :cnt[v]] <= nd[v, :cnt[v]])
        nbr, nd, cnt = new, newd, newc


def test_lists_sorted_distinct_and_exact(small):
    p = PynndParams(K=8, Ls=40, T_init=2)
    nbr, nd, cnt = init_knn_graph(small, p)
    view = small.data
    for v in range(0, small.n, 37):
        ids = nbr[v, :cnt[v]]
        assert v not in ids and len(set(ids.tolist())) == len(ids)
        assert np.all(np.diff(nd[v, :cnt[v]]) >= 0)
        assert np.allclose(nd[v, :cnt[v]], ((view[ids] - view[v]) ** 2).sum(1), rtol=1e-5)


def test_init_single_leaf_is_exact_knn():
    ds, _ = gaussian_mixture(80, 4, 2, seed=5)
    p = PynndParams(K=6, Ls=100, T_init=1)
    nbr, nd, cnt = init_knn_graph(ds, p)
    gt = compute_groundtruth(ds, ds, 7)
    assert nbr.tolist() == gt.ids[:, 1:].tolist()


def test_exact_init_converges_immediately():
    ds, _ = gaussian_mixture(80, 4, 2, seed=5)
    g = build_pynndescent(ds, PynndParams(K=6, Ls=100, T_init=1))
    assert g.meta["rounds"] <= 1 and g.meta["converged"]


def test_delta_one_runs_one_round(small):
    trace = []
    g = build_pynndescent(small, PynndParams(K=8, Ls=40, T_init=2, delta=1.0), trace=trace)
    assert g.meta["rounds"] == 1 and len(trace) == 2


def test_round_cap_warns(small):
    with pytest.warns(UserWarning, match="rounds"):
        g = build_pynndescent(small, PynndParams(K=8, Ls=20, T_init=2, delta=0.0, max_rounds=1))
    assert not g.meta["converged"]


def test_batching_does_not_change_result(small):
    p1 = PynndParams(K=8, Ls=40, T_init=2, batch_count=1)
    p7 = PynndParams(K=8, Ls=40, T_init=2, batch_count=7)
    assert build_pynndescent(small, p1).structurally_equal(build_pynndescent(small, p7))
    assert PynndParams(K=40, memory_budget=1 << 20).batches_for(100_000) > 1


def test_worker_count_does_not_change_graph(small):
    p = PynndParams(K=8, Ls=40, T_init=2)
    assert build_pynndescent(small, p, workers=1).structurally_equal(build_pynndescent(small, p, workers=4))


def test_needs_two_points():
    with pytest.raises(ValueError):
        build_pynndescent(line(1), PynndParams(K=2))


def test_desk_initial_graph_quality(desk):
    p = PynndParams(K=20)
    nbr, _, cnt = init_knn_graph(desk.base, p)
    gt = compute_groundtruth(desk.base, desk.base, 11)
    sample = range(0, desk.base.n, 10)
    hits = [len(set(nbr[v, :cnt[v]].tolist()) & set(gt.ids[v, 1:].tolist())) / 10 for v in sample]
    assert np.mean(hits) >= 0.3


def test_desk_graph(desk):
    g, _, trace = desk.build("pynnd")
    g.check(20)
    print(f"rounds={g.meta['rounds']} converged={g.meta['converged']}")
