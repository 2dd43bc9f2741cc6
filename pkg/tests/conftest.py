import os

# Let worker-count tests use more than one numba thread even on a small box.
# Must run before numba is imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import time
import warnings

import numpy as np
import pytest
from hypothesis import settings

from graphann.dataset import compute_groundtruth, gaussian_mixture
from graphann.diskann import DiskannParams, batch_build
from graphann.evaluate import mean_recall, measure_qps
from graphann.hcnng import HcnngParams, build_hcnng
from graphann.hnsw import HnswParams, build_hnsw
from graphann.pynndescent import PynndParams, build_pynndescent
from graphann.search import SearchParams

warnings.filterwarnings("ignore", message="The TBB threading layer")

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

DESK_N = 10_000
DESK_D = 16
DESK_CLUSTERS = 10
DESK_SEED = 1
DESK_QUERIES = 1000

DESK_PARAMS = {
    "diskann": DiskannParams(R=32, L=64, alpha=1.2),
    "hnsw": HnswParams(m=16, efc=64),
    "hcnng": HcnngParams(T=10, Ls=500, s=3),
    "pynnd": PynndParams(K=20),
}


def _build(algo, ds, workers, trace=None):
    p = DESK_PARAMS[algo]
    if algo == "diskann":
        return batch_build(ds, p, workers)
    if algo == "hnsw":
        return build_hnsw(ds, p, workers)
    if algo == "hcnng":
        return build_hcnng(ds, p, workers, trace=trace)
    return build_pynndescent(ds, p, workers, trace=trace)


class Desk:
    """Desk-scale dataset with lazily built, memoized indexes."""

    def __init__(self):
        self.base, self.queries = gaussian_mixture(DESK_N, DESK_D, DESK_CLUSTERS, DESK_SEED,
                                                   n_queries=DESK_QUERIES)
        self.gt = compute_groundtruth(self.base, self.queries, 100)
        self._built = {}
        self._warm = False

    def warm_up(self):
        # compile every kernel on a small instance so build timings exclude JIT
        if self._warm:
            return
        small, _ = gaussian_mixture(400, DESK_D, 4, 0)
        for algo in DESK_PARAMS:
            _build(algo, small, None)
        self._warm = True

    def build(self, algo, workers=None):
        """Return ``(index, seconds, trace)``; ``workers=None`` means all threads."""
        key = (algo, workers)
        if key not in self._built:
            self.warm_up()
            trace = [] if algo in ("hcnng", "pynnd") else None
            t0 = time.perf_counter()
            index = _build(algo, self.base, workers, trace)
            self._built[key] = (index, time.perf_counter() - t0, trace)
        return self._built[key]

    def recall(self, index, L, k=10, epsilon=0.0):
        m = measure_qps(index, self.base, self.queries, SearchParams(L=L, k=k, epsilon=epsilon),
                        threads=1)
        return mean_recall(self.gt, [r.ids for r in m.results], k), m


@pytest.fixture(scope="session")
def desk():
    return Desk()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = []


@pytest.fixture(scope="session")
def criteria_log():
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
