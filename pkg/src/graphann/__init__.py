"""Parallel graph-based approximate nearest neighbor search."""

from .dataset import (FormatError, GroundTruth, RangeGroundTruth, VectorDataset,
                      compute_groundtruth, compute_range_groundtruth, gaussian_mixture,
                      load_vectors, slice_dataset, write_vectors)
from .diskann import DiskannParams, batch_build
from .evaluate import SweepConfig, measure_qps, pareto_frontier, range_recall, recall_k_at_n, run_sweep
from .graph import GraphInvariantError, NeighborGraph, load_graph, save_graph
from .hcnng import HcnngParams, build_hcnng
from .hnsw import HnswIndex, HnswParams, build_hnsw, search_hnsw
from .metrics import DistanceCounter, Metric, distance
from .prune import PruneParams, alpha_prune
from .pynndescent import PynndParams, build_pynndescent
from .search import SearchParams, SearchResult, beam_search, range_search
from .semisort import semisort

__version__ = "0.1.0"
