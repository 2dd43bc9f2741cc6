import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphann.dataset import VectorDataset, gaussian_mixture
from graphann.hcnng import HcnngParams, build_hcnng, cluster_leaves, leaf_mst


def line(*xs):
    return VectorDataset(np.array(xs, dtype=np.float32).reshape(-1, 1))


def edge_set(edges):
    return {tuple(sorted(map(int, e))) for e in edges}


def test_two_point_leaf():
    e, w = leaf_mst(line(0, 3), [0, 1], s=3, k_mst=5)
    assert edge_set(e) == {(0, 1)} and w.tolist() == [9.0]


def test_unit_path():
    e, w = leaf_mst(line(0, 1, 2, 3), [0, 1, 2, 3], s=3, k_mst=3)
    assert edge_set(e) == {(0, 1), (1, 2), (2, 3)}
    assert w.tolist() == [1.0, 1.0, 1.0]


def test_degree_cap_one_gives_matching():
    e, _ = leaf_mst(line(0, 1, 2, 3), [0, 1, 2, 3], s=1, k_mst=3)
    assert edge_set(e) == {(0, 1), (2, 3)}


def test_single_point_leaf():
    e, _ = leaf_mst(line(0, 1), [1], s=3, k_mst=3)
    assert len(e) == 0


def _components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    acyclic = True
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            acyclic = False
        parent[ra] = rb
    return acyclic, len({find(x) for x in range(n)})


def _exact_mst_weight(pts):
    # Prim over the complete graph, squared distances
    n = len(pts)
    d = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    in_tree = np.zeros(n, bool)
    best = np.full(n, np.inf)
    best[0] = 0
    total = 0.0
    for _ in range(n):
        v = int(np.argmin(np.where(in_tree, np.inf, best)))
        total += best[v]
        in_tree[v] = True
        best = np.minimum(best, d[v])
    return total


@given(st.integers(2, 40), st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_forest_properties(n, seed, s):
    rng = np.random.default_rng(seed)
    ds = VectorDataset(rng.normal(size=(n, 3)).astype(np.float32))
    leaf = rng.permutation(n)
    e, w = leaf_mst(ds, leaf, s=s, k_mst=5)
    acyclic, _ = _components(n, e.tolist())
    assert acyclic
    deg = np.bincount(e.ravel(), minlength=n)
    assert deg.max(initial=0) <= s
    assert np.all(np.diff(w) >= 0)  # accepted in Kruskal order


@given(st.integers(2, 64), st.integers(0, 2**31 - 1))
def test_weight_equals_exact_mst_when_unconstrained(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2)).astype(np.float32)
    # with k = n-1 every edge is a candidate; s = n never binds
    e, w = leaf_mst(VectorDataset(pts), np.arange(n), s=n, k_mst=n - 1)
    assert len(e) == n - 1
    assert float(w.astype(np.float64).sum()) == pytest.approx(_exact_mst_weight(pts.astype(np.float64)), rel=1e-4)


def test_small_subset_is_one_leaf():
    ds = line(*range(10))
    assert [l.tolist() for l in cluster_leaves(ds, [3, 1, 4], Ls=5)] == [[3, 1, 4]]


@given(st.integers(1, 400), st.integers(2, 50), st.integers(0, 1000))
def test_leaves_partition(n, Ls, seed):
    ds = VectorDataset(np.random.default_rng(seed).normal(size=(n, 2)).astype(np.float32))
    leaves = cluster_leaves(ds, np.arange(n), Ls, seed)
    flat = np.concatenate(leaves)
    assert sorted(flat.tolist()) == list(range(n))
    assert max(len(l) for l in leaves) <= Ls


def test_identical_points_terminate():
    ds = VectorDataset(np.ones((100, 3), np.float32))
    leaves = cluster_leaves(ds, np.arange(100), Ls=7, seed=0)
    assert sorted(np.concatenate(leaves).tolist()) == list(range(100))
    assert max(len(l) for l in leaves) <= 7


def test_two_clusters_split_cleanly():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(600, 4)) - 50
    b = rng.normal(size=(600, 4)) + 50
    ds = VectorDataset(np.vstack([a, b]).astype(np.float32))
    truth = [set(range(600)), set(range(600, 1200))]
    hits = 0
    for seed in range(100):
        leaves = cluster_leaves(ds, np.arange(1200), Ls=1000, seed=seed)
        if len(leaves) == 2 and sorted(map(set, leaves), key=min) == truth:
            hits += 1
    # a pivot pair straddles the clusters with probability about 1/2
    assert hits > 30


def test_one_tree_one_leaf_is_bidirected_mst():
    ds, _ = gaussian_mixture(60, 3, 2, seed=4)
    p = HcnngParams(T=1, Ls=100, s=3)
    g = build_hcnng(ds, p)
    e, _ = leaf_mst(ds, np.arange(60), 3, p.knn)
    want = {(int(a), int(b)) for a, b in e} | {(int(b), int(a)) for a, b in e}
    assert g.edges() == want


def test_repeated_trees_dedupe():
    ds, _ = gaussian_mixture(60, 3, 2, seed=4)
    # every tree is one leaf, so every tree yields the same MST
    one = build_hcnng(ds, HcnngParams(T=1, Ls=100, s=3))
    many = build_hcnng(ds, HcnngParams(T=4, Ls=100, s=3))
    assert many.edges() == one.edges()


def test_trace_and_invariants():
    ds, _ = gaussian_mixture(2000, 6, 4, seed=1)
    p = HcnngParams(T=4, Ls=200, s=2)
    trace = []
    g = build_hcnng(ds, p, trace=trace)
    g.check(p.cap)
    assert len(trace) == 4
    for leaves, edges in trace:
        assert sorted(np.concatenate(leaves).tolist()) == list(range(ds.n))
        acyclic, _ = _components(ds.n, edges.tolist())
        assert acyclic
        assert np.bincount(edges.ravel(), minlength=ds.n).max() <= p.s
    union = set()
    for _, edges in trace:
        union |= edge_set(edges)
    assert {tuple(sorted(e)) for e in g.edges()} == union


def test_worker_count_does_not_change_graph():
    ds, _ = gaussian_mixture(2000, 6, 4, seed=1)
    p = HcnngParams(T=3, Ls=300, s=3)
    assert build_hcnng(ds, p, workers=1).structurally_equal(build_hcnng(ds, p, workers=4))


def test_desk_graph(desk):
    g, _, _ = desk.build("hcnng")
    g.check(30)
    assert g.mean_degree() <= 2 * 10 * 3
