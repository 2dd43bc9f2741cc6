"""Build parameters per dataset family.

The four billion-scale families use the published per-dataset settings;
``desk`` is the scaled-down configuration used by the acceptance suite.
"""

from __future__ import annotations

from .diskann import DiskannParams
from .hcnng import HcnngParams
from .hnsw import HnswParams
from .metrics import Metric
from .pynndescent import PynndParams

ALGORITHMS = ("diskann", "hnsw", "hcnng", "pynnd")

PRESETS = {
    "bigann": {
        "metric": Metric.EUCLIDEAN_SQUARED,
        "diskann": DiskannParams(R=64, L=128, alpha=1.2),
        "hnsw": HnswParams(m=32, efc=128, alpha=0.82),
        "hcnng": HcnngParams(T=30, Ls=1000, s=3),
        "pynnd": PynndParams(K=40, Ls=100, T_init=10, alpha=1.2),
    },
    "spacev": {
        "metric": Metric.EUCLIDEAN_SQUARED,
        "diskann": DiskannParams(R=64, L=128, alpha=1.2),
        "hnsw": HnswParams(m=32, efc=128, alpha=0.83),
        "hcnng": HcnngParams(T=50, Ls=1000, s=3),
        "pynnd": PynndParams(K=60, Ls=100, T_init=10, alpha=1.2),
    },
    "text2image": {
        "metric": Metric.NEGATIVE_INNER_PRODUCT,
        "diskann": DiskannParams(R=64, L=128, alpha=0.9),
        "hnsw": HnswParams(m=32, efc=128, alpha=1.1),
        "hcnng": HcnngParams(T=30, Ls=1000, s=3),
        "pynnd": PynndParams(K=60, Ls=100, T_init=10, alpha=0.9),
    },
    "ssnpp": {
        "metric": Metric.EUCLIDEAN_SQUARED,
        "diskann": DiskannParams(R=150, L=400, alpha=1.2),
        "hnsw": HnswParams(m=75, efc=400, alpha=0.82),
        "hcnng": HcnngParams(T=50, Ls=1000, s=3),
        "pynnd": PynndParams(K=60, Ls=1000, T_init=10, alpha=1.4),
    },
    "desk": {
        "metric": Metric.EUCLIDEAN_SQUARED,
        "diskann": DiskannParams(R=32, L=64, alpha=1.2),
        "hnsw": HnswParams(m=16, efc=64, alpha=0.82),
        "hcnng": HcnngParams(T=10, Ls=500, s=3),
        "pynnd": PynndParams(K=20, Ls=100, T_init=10, alpha=1.2),
    },
}


def preset(name: str, algo: str):
    try:
        return PRESETS[name][algo]
    except KeyError:
        raise ValueError(f"no preset {name!r} for {algo!r}") from None
