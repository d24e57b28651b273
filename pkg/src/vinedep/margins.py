"""Empirical marginal models and the rank-based probability integral transform."""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

TIE_POLICIES = ("average_rank", "jitter")


@dataclass(frozen=True, eq=False)
class MarginalModel:
    variable: str
    kind: str
    sorted_values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, MarginalModel):
            return NotImplemented
        return (self.variable == other.variable and self.kind == other.kind
                and np.array_equal(self.sorted_values, other.sorted_values))

    __hash__ = None

    @property
    def n(self) -> int:
        return self.sorted_values.shape[0]

    def to_dict(self) -> dict:
        return {"variable": self.variable, "kind": self.kind,
                "sorted_values": self.sorted_values.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "MarginalModel":
        vals = np.asarray(obj["sorted_values"], dtype=float)
        return cls(obj["variable"], obj.get("kind", "continuous"), vals)


@dataclass
class PseudoObs:
    matrix: np.ndarray
    column_names: list[str]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.column_names):
            raise DataError("pseudo-observation matrix does not match its column names")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.column_names.index(name)]


def fit_marginal(column, meta=None, name: str | None = None) -> MarginalModel:
    """Store the sorted sample as an empirical distribution."""
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise DataError("cannot fit a marginal to an empty column")
    if np.isnan(x).any():
        raise DataError("column contains missing values; impute before fitting margins")
    s = np.sort(x)
    s.setflags(write=False)
    diag = {}
    if s[0] == s[-1]:
        diag["degenerate"] = True
        log.warning("variable %s is constant", name or getattr(meta, "name", "?"))
    return MarginalModel(name or getattr(meta, "name", ""), getattr(meta, "kind", "continuous"),
                         s, diag)


def column_rng(seed: int, name: str) -> np.random.Generator:
    # keyed by name so dropping or reordering columns leaves other streams intact
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def pit(column, model: MarginalModel, tie_policy: str = "average_rank",
        seed: int = 0) -> np.ndarray:
    """Rank transform ``column`` against ``model`` onto (0, 1) with denominator n + 1.

    Ties share the average rank, or with ``tie_policy="jitter"`` each tied value
    is drawn uniformly over its group's rank interval (L, R) / (n + 1).
    """
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    x = np.asarray(column, dtype=float)
    s = model.sorted_values
    n = model.n
    lo = np.searchsorted(s, x, side="left").astype(float)
    hi = np.searchsorted(s, x, side="right").astype(float)
    unseen = lo == hi
    if unseen.any():
        outside = (x < s[0]) | (x > s[-1])
        if outside.any():
            log.info("%s: %d value(s) outside the fitted support clamped", model.variable,
                     int(outside.sum()))
    rank = np.where(unseen, np.clip(lo + 0.5, 1.0, n), 0.5 * (lo + hi + 1.0))
    if tie_policy == "jitter":
        tied = (hi - lo) > 1
        if tied.any():
            rng = column_rng(seed, model.variable)
            r = 1.0 - rng.random(x.shape[0])  # in (0, 1]
            rank = np.where(tied, lo + r * (hi - lo), rank)
            # the open upper end must stay open
            rank = np.where(tied & (rank >= hi), np.nextafter(hi, lo), rank)
    return rank / (n + 1.0)


def inverse_pit(u, model: MarginalModel) -> np.ndarray:
    """Type-1 empirical quantile: u -> sorted_values[ceil(u * n)] (1-based)."""
    u = np.asarray(u, dtype=float)
    idx = np.ceil(u * model.n).astype(np.int64) - 1
    return model.sorted_values[np.clip(idx, 0, model.n - 1)]


def to_pseudo_obs(table, tie_policy: str = "jitter", seed: int = 0):
    """Fit empirical margins to every column of a complete table and transform it."""
    if table.n_missing():
        raise DataError("table has missing cells; run curation first")
    models, cols = [], []
    for meta, col in zip(table.metas, table.columns):
        m = fit_marginal(col, meta)
        models.append(m)
        cols.append(pit(col, m, tie_policy, seed))
    u = np.column_stack(cols) if cols else np.empty((table.n_rows, 0))
    return PseudoObs(u, table.names), models
