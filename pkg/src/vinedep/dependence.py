"""Kendall's tau-b with tie correction, and pairwise tau matrices."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .errors import DataError

if os.environ.get("VINEDEP_PURE_PYTHON"):
    from ._kendall_py import sorted_pair_counts as _sorted_counts
    BACKEND = "python"
else:
    try:
        from ._kendall_ext import sorted_pair_counts as _sorted_counts
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        from ._kendall_py import sorted_pair_counts as _sorted_counts
        BACKEND = "python"


class PairCounts(NamedTuple):
    """Unordered pair classification: concordant, discordant, tied only in x,
    tied only in y, tied in both."""

    concordant: int
    discordant: int
    tied_x: int
    tied_y: int
    tied_xy: int

    @property
    def total(self) -> int:
        return sum(self)

    def tau_b(self) -> float:
        c, d = self.concordant, self.discordant
        den = (c + d + self.tied_x) * (c + d + self.tied_y)
        if den == 0:
            return 0.0
        return (c - d) / math.sqrt(den)


def pair_counts(x, y, counter=None) -> PairCounts:
    """Classify all n(n-1)/2 pairs in O(n log n).

    After sorting lexicographically by (x, y), discordant pairs are exactly the
    strict inversions of the y sequence.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"kendall_tau needs equal-length vectors, got {x.shape} and {y.shape}")
    if np.isnan(x).any() or np.isnan(y).any():
        raise DataError("kendall_tau input contains NaN")
    order = np.lexsort((y, x))
    xs = np.ascontiguousarray(x[order])
    ys = np.ascontiguousarray(y[order])
    n1, n2, n3, swaps = (counter or _sorted_counts)(xs, ys)
    n = x.size
    n0 = n * (n - 1) // 2
    disc = swaps
    conc = n0 - n1 - n2 + n3 - disc
    return PairCounts(int(conc), int(disc), int(n1 - n3), int(n2 - n3), int(n3))


def kendall_tau(x, y) -> float:
    """Kendall's tau-b. Returns 0 when exactly one argument is constant."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise DataError("kendall_tau needs at least two observations")
    counts = pair_counts(x, y)
    n0 = counts.total
    if counts.tied_x + counts.tied_xy == n0 and counts.tied_y + counts.tied_xy == n0:
        raise DataError("kendall_tau is undefined when both inputs are constant")
    return counts.tau_b()


@dataclass
class TauMatrix:
    values: np.ndarray
    names: list[str]

    def __getitem__(self, key):
        i, j = key
        if isinstance(i, str):
            i = self.names.index(i)
        if isinstance(j, str):
            j = self.names.index(j)
        return self.values[i, j]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "tau": self.values.tolist()}

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.names)]
        for name, row in zip(self.names, self.values):
            lines.append(name + "," + ",".join(format(v, ".12g") for v in row))
        return "\n".join(lines) + "\n"


def tau_matrix(u, names=None, threads: int = 1) -> TauMatrix:
    """Pairwise tau-b for every column pair of ``u`` (array or PseudoObs)."""
    if hasattr(u, "matrix"):
        names = names or list(u.column_names)
        u = u.matrix
    u = np.asarray(u, dtype=float)
    d = u.shape[1]
    if d < 2:
        raise DataError("tau_matrix needs at least two columns")
    names = list(names) if names is not None else [f"V{i + 1}" for i in range(d)]
    pairs = list(combinations(range(d), 2))

    def one(pair):
        i, j = pair
        try:
            return kendall_tau(u[:, i], u[:, j])
        except DataError as exc:
            raise DataError(f"tau({names[i]}, {names[j]}): {exc}") from None

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            taus = list(pool.map(one, pairs))
    else:
        taus = [one(p) for p in pairs]
    out = np.eye(d)
    for (i, j), t in zip(pairs, taus):
        out[i, j] = out[j, i] = t
    return TauMatrix(out, names)
