"""Hot numeric kernels, compiled with numba when available.

Set ``CONCON_DISABLE_NUMBA=1`` to force the pure-numpy fallback path
(useful for debugging and for the kernel benchmark in benchmarks/).
Both paths produce identical arrays.
"""

import itertools
import math
import os

import numpy as np

N_TYPES = 96
SCENE_SIZE = 4
TOTAL_SCENES = math.comb(N_TYPES + SCENE_SIZE - 1, SCENE_SIZE)

USE_NUMBA = os.environ.get("CONCON_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def _rank_prefix_table():
    # S[w, j] = sum_{v < w} (# multisets of size j over values >= v),
    # i.e. the prefix sums needed for lexicographic multiset ranking.
    S = np.zeros((N_TYPES + 1, SCENE_SIZE), dtype=np.int64)
    for j in range(SCENE_SIZE):
        for w in range(N_TYPES):
            S[w + 1, j] = S[w, j] + math.comb(N_TYPES - w + j - 1, j)
    return S


RANK_PREFIX = _rank_prefix_table()


def _build_type_table_numpy():
    it = itertools.combinations_with_replacement(range(N_TYPES), SCENE_SIZE)
    flat = np.fromiter(itertools.chain.from_iterable(it), dtype=np.uint8,
                       count=TOTAL_SCENES * SCENE_SIZE)
    return flat.reshape(TOTAL_SCENES, SCENE_SIZE)


def _presence_masks_numpy(types):
    t = types.astype(np.uint64)
    one = np.uint64(1)
    lo = np.zeros(len(types), dtype=np.uint64)
    hi = np.zeros(len(types), dtype=np.uint64)
    for col in range(types.shape[1]):
        c = t[:, col]
        low = c < 64
        lo |= np.where(low, one << c, np.uint64(0))
        hi |= np.where(low, np.uint64(0), one << (c - np.uint64(64)))
    return lo, hi


def _rank_scenes_numpy(types, prefix):
    # Lexicographic rank of each non-decreasing row of `types`.
    t = types.astype(np.int64)
    rank = np.zeros(len(t), dtype=np.int64)
    for i in range(t.shape[1]):
        j = t.shape[1] - 1 - i
        lo = t[:, i - 1] if i > 0 else np.zeros(len(t), dtype=np.int64)
        rank += prefix[t[:, i], j] - prefix[lo, j]
    return rank


if USE_NUMBA:

    @njit(cache=True)
    def _build_type_table_numba(total):
        out = np.empty((total, 4), dtype=np.uint8)
        idx = 0
        for a in range(N_TYPES):
            for b in range(a, N_TYPES):
                for c in range(b, N_TYPES):
                    for d in range(c, N_TYPES):
                        out[idx, 0] = a
                        out[idx, 1] = b
                        out[idx, 2] = c
                        out[idx, 3] = d
                        idx += 1
        return out

    @njit(cache=True)
    def _presence_masks_numba(types):
        n = types.shape[0]
        lo = np.zeros(n, dtype=np.uint64)
        hi = np.zeros(n, dtype=np.uint64)
        for i in range(n):
            for col in range(types.shape[1]):
                t = types[i, col]
                if t < 64:
                    lo[i] |= np.uint64(1) << np.uint64(t)
                else:
                    hi[i] |= np.uint64(1) << np.uint64(t - 64)
        return lo, hi

    @njit(cache=True)
    def _rank_scenes_numba(types, prefix):
        n = types.shape[0]
        k = types.shape[1]
        rank = np.zeros(n, dtype=np.int64)
        for i in range(n):
            lo = 0
            for col in range(k):
                t = types[i, col]
                rank[i] += prefix[t, k - 1 - col] - prefix[lo, k - 1 - col]
                lo = t
        return rank

    def build_type_table():
        return _build_type_table_numba(TOTAL_SCENES)

    def presence_masks(types):
        return _presence_masks_numba(np.ascontiguousarray(types))

    def rank_scenes(types):
        return _rank_scenes_numba(np.ascontiguousarray(types), RANK_PREFIX)

else:

    def build_type_table():
        return _build_type_table_numpy()

    def presence_masks(types):
        return _presence_masks_numpy(types)

    def rank_scenes(types):
        return _rank_scenes_numpy(types, RANK_PREFIX)


# Kept importable on both paths so the benchmark can compare them directly.
numpy_impls = {
    "build_type_table": _build_type_table_numpy,
    "presence_masks": _presence_masks_numpy,
    "rank_scenes": lambda types: _rank_scenes_numpy(types, RANK_PREFIX),
}
