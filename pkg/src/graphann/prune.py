"""Alpha-pruning of candidate neighbor sets.

Candidates are visited closest-first. Each selected ``p*`` removes every
remaining ``v`` with ``alpha * dist(p*, v) <= dist(p, v)``, so ``alpha > 1``
keeps more edges (denser graph). ``literal=True`` switches to the rule
``dist(v, p*) < alpha * dist(p, p*)`` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .metrics import L2, Metric, dist


@dataclass(frozen=True)
class PruneParams:
    R: int
    alpha: float = 1.2

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("degree bound R must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@numba.njit(nogil=True, cache=True)
def prune_kernel(p, p_vec, cand_ids, cand_d, data, R, alpha, metric, literal):
    m = cand_ids.shape[0]
    # sort by (distance, id)
    by_id = np.argsort(cand_ids, kind="mergesort")
    order = by_id[np.argsort(cand_d[by_id], kind="mergesort")]
    removed = np.zeros(m, dtype=np.bool_)
    out = np.empty(min(R, m), dtype=np.int64)
    cnt = 0
    prev = -1
    for a in range(m):
        i = order[a]
        c = cand_ids[i]
        if c == p or c == prev:
            removed[i] = True
        prev = c
    for a in range(m):
        if cnt == R:
            break
        i = order[a]
        if removed[i]:
            continue
        out[cnt] = cand_ids[i]
        cnt += 1
        dp = cand_d[i]
        if metric == L2 and dp == 0:
            continue  # a duplicate of p never dominates other candidates
        sel = data[cand_ids[i]]
        for b in range(a + 1, m):
            j = order[b]
            if removed[j]:
                continue
            dv = dist(sel, data[cand_ids[j]], metric)
            if literal:
                if dv < alpha * dp:
                    removed[j] = True
            elif alpha * dv <= cand_d[j]:
                removed[j] = True
    return out[:cnt]


@numba.njit(nogil=True, cache=True)
def dists_to(p_vec, cand_ids, data, metric):
    out = np.empty(cand_ids.shape[0], dtype=np.float32)
    for i in range(cand_ids.shape[0]):
        out[i] = dist(p_vec, data[cand_ids[i]], metric)
    return out


def alpha_prune(p: int, cand_ids, cand_dists, params: PruneParams, ds, metric,
                literal: bool = False) -> np.ndarray:
    """Select at most ``params.R`` ids from ``cand_ids`` for vertex ``p``.

    ``cand_dists`` may be None, in which case distances to ``p`` are computed.
    Output is in selection order; ties resolve toward the smaller id.
    """
    metric = Metric.parse(metric)
    view = ds if isinstance(ds, np.ndarray) else ds.view()
    cand_ids = np.asarray(cand_ids, dtype=np.int64)
    if len(cand_ids) == 0:
        return cand_ids
    if cand_dists is None:
        cand_dists = dists_to(view[p], cand_ids, view, metric.code)
    cand_dists = np.asarray(cand_dists, dtype=np.float32)
    return prune_kernel(p, view[p], cand_ids, cand_dists, view, params.R,
                        np.float32(params.alpha), metric.code, literal)
