"""Numpy implementation of the pair counting, used when the extension is absent."""
from __future__ import annotations

import numpy as np


def _tie_pairs(sorted_vals: np.ndarray) -> int:
    if sorted_vals.size < 2:
        return 0
    brk = np.flatnonzero(np.diff(sorted_vals) != 0)
    runs = np.diff(np.concatenate(([0], brk + 1, [sorted_vals.size]))).astype(np.int64)
    return int((runs * (runs - 1) // 2).sum())


def _inversions(a: np.ndarray) -> int:
    """Strict inversion count by bottom-up merging, one vectorized pass per level.

    ``a`` holds dense integer ranks in [0, n). Each level keys every element by
    ``block_pair * n + value`` so a single global ``searchsorted`` counts the
    cross-block inversions for all block pairs at once.
    """
    n = a.size
    vals = a.astype(np.int64)
    idx = np.arange(n, dtype=np.int64)
    total = 0
    width = 1
    while width < n:
        pair = idx // (2 * width)
        is_left = (idx // width) % 2 == 0
        keys = pair * n + vals
        left = keys[is_left]  # globally sorted: sorted within blocks, blocks ordered
        right_pair = pair[~is_left]
        upper = np.searchsorted(left, (right_pair + 1) * n, side="left")
        not_greater = np.searchsorted(left, keys[~is_left], side="right")
        total += int((upper - not_greater).sum())
        vals = np.sort(keys, kind="stable") - pair * n
        width *= 2
    return total


def sorted_pair_counts(xs: np.ndarray, ys: np.ndarray):
    n = xs.size
    if n < 2:
        return 0, 0, 0, 0
    n1 = _tie_pairs(xs)
    xy_break = (np.diff(xs) != 0) | (np.diff(ys) != 0)
    brk = np.flatnonzero(xy_break)
    runs = np.diff(np.concatenate(([0], brk + 1, [n]))).astype(np.int64)
    n3 = int((runs * (runs - 1) // 2).sum())
    dense = np.unique(ys, return_inverse=True)[1].ravel()
    swaps = _inversions(dense)
    n2 = _tie_pairs(np.sort(ys))
    return n1, n2, n3, swaps
