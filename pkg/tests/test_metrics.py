import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphann.metrics import DistanceCounter, Metric, distance

vec = arrays(np.float32, 6, elements=st.floats(-100, 100, width=32))


def test_examples():
    assert distance("l2", [0.0, 0.0], [3.0, 4.0]) == 25
    assert distance("mips", [1.0, 2.0], [3.0, 4.0]) == -11
    p = np.array([1.5, -2.0, 7.0], np.float32)
    assert distance(Metric.EUCLIDEAN_SQUARED, p, p) == 0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        distance("l2", [1.0, 2.0], [1.0, 2.0, 3.0])


def test_counter_increments_once_per_call():
    seen = []
    c = DistanceCounter(hook=lambda p, q: seen.append(1))
    for _ in range(7):
        distance("l2", [1.0], [2.0], c)
    assert c.count == 7 and len(seen) == 7
    with pytest.raises(ValueError):
        c.add(-1)


def test_counter_merge():
    a, b = DistanceCounter(3), DistanceCounter(4)
    a.merge(b)
    assert a.count == 7


def test_integer_widening():
    a = np.full(512, 255, np.uint8)
    b = np.zeros(512, np.uint8)
    assert distance("l2", a, b) == 512 * 255 * 255
    c = np.full(4, -128, np.int8)
    assert distance("mips", c, c) == -4 * 128 * 128


@given(vec, vec)
def test_symmetry_and_nonnegativity(p, q):
    assert distance("l2", p, q) == distance("l2", q, p) >= 0
    assert distance("mips", p, q) == distance("mips", q, p)


@given(arrays(np.float32, (12, 3), elements=st.integers(-50, 50).map(float)),
       arrays(np.float32, 3, elements=st.integers(-50, 50).map(float)))
def test_ranking_matches_true_euclidean(pts, q):
    sq = np.array([distance("l2", p, q) for p in pts])
    true = np.sqrt(((pts.astype(np.float64) - q) ** 2).sum(1))
    assert np.array_equal(np.argsort(sq, kind="stable"), np.argsort(true, kind="stable"))


def test_external_scale_round_trip():
    m = Metric.parse("l2")
    assert m.to_external(np.float32(25.0)) == 5.0
    assert m.to_internal(5.0) == 25.0
    assert Metric.parse("ip").to_internal(-3.0) == -3.0
    with pytest.raises(ValueError):
        Metric.parse("cosine")
