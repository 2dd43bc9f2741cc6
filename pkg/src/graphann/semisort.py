"""Grouping of (key, value) pairs so equal keys are contiguous.

Keys live in ``[0, key_bound)``. Each key is sent through a seeded affine
bijection of ``[0, 2**b)`` and the pairs are counting-sorted by the hashed
key: one bucket per key, so groups come out contiguous in a pseudo-random
key order rather than sorted order. Values keep their input order inside a
group.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _semisort(keys, values, bits, mul, add):
    size = 1 << bits
    mask = size - 1
    counts = np.zeros(size + 1, dtype=np.int64)
    h = np.empty(keys.shape[0], dtype=np.int64)
    for i in range(keys.shape[0]):
        h[i] = (keys[i] * mul + add) & mask
        counts[h[i] + 1] += 1
    for b in range(size):
        counts[b + 1] += counts[b]
    pos = counts[:-1].copy()
    out_k = np.empty_like(keys)
    out_v = np.empty_like(values)
    for i in range(keys.shape[0]):
        t = pos[h[i]]
        out_k[t] = keys[i]
        out_v[t] = values[i]
        pos[h[i]] += 1
    ngroups = 0
    for b in range(size):
        if counts[b + 1] > counts[b]:
            ngroups += 1
    offsets = np.empty(ngroups + 1, dtype=np.int64)
    group_keys = np.empty(ngroups, dtype=keys.dtype)
    g = 0
    for b in range(size):
        if counts[b + 1] > counts[b]:
            offsets[g] = counts[b]
            group_keys[g] = out_k[counts[b]]
            g += 1
    offsets[ngroups] = keys.shape[0]
    return out_k, out_v, offsets, group_keys


def semisort(keys, values, key_bound: int | None = None, seed: int = 0):
    """Return ``(keys, values, offsets, group_keys)``.

    Group ``g`` spans ``[offsets[g], offsets[g+1])`` and has key ``group_keys[g]``.
    """
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    values = np.ascontiguousarray(values)
    if keys.shape[0] != values.shape[0]:
        raise ValueError("keys and values differ in length")
    if key_bound is None:
        key_bound = int(keys.max()) + 1 if len(keys) else 1
    if len(keys) and (keys.min() < 0 or keys.max() >= key_bound):
        raise ValueError("key outside [0, key_bound)")
    bits = max(1, int(np.ceil(np.log2(max(key_bound, 2)))))
    rng = np.random.default_rng(seed)
    mul = int(rng.integers(0, 1 << 30)) * 2 + 1  # odd => bijective mod 2**bits
    add = int(rng.integers(0, 1 << 30))
    return _semisort(keys, values, bits, mul, add)
