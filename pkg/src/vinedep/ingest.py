"""Loading and curation of raw CSV tables.

Curation runs in a fixed order: out-of-bound cells are turned into missing
markers, rows whose missing fraction exceeds a threshold are dropped, and the
remaining gaps are filled with per-column medians.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

KINDS = ("continuous", "ordinal", "binary")
MISSING_CODES = frozenset({"", "na", "nan", "null"})


@dataclass(frozen=True)
class VariableMeta:
    name: str
    kind: str = "continuous"
    unit: str = ""
    lower_bound: float | None = None
    upper_bound: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        lo, hi = self.lower_bound, self.upper_bound
        if lo is not None and hi is not None and not lo < hi:
            raise DataError(f"variable {self.name!r}: lower bound {lo} >= upper bound {hi}")

    @property
    def discrete(self) -> bool:
        return self.kind != "continuous"

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "unit": self.unit,
                "lower": self.lower_bound, "upper": self.upper_bound}

    @classmethod
    def from_dict(cls, obj: dict) -> "VariableMeta":
        try:
            name = obj["name"]
        except (KeyError, TypeError):
            raise DataError(f"schema entry without a name: {obj!r}") from None
        return cls(name=str(name), kind=obj.get("kind", "continuous"),
                   unit=obj.get("unit", "") or "",
                   lower_bound=_opt_float(obj.get("lower")),
                   upper_bound=_opt_float(obj.get("upper")))


def _opt_float(x):
    return None if x is None else float(x)


@dataclass
class CurationLog:
    n_out_of_bounds: dict[str, int] = field(default_factory=dict)
    n_rows_dropped: int = 0

    def merge(self, other: "CurationLog") -> "CurationLog":
        counts = dict(self.n_out_of_bounds)
        for k, v in other.n_out_of_bounds.items():
            counts[k] = counts.get(k, 0) + v
        return CurationLog(counts, self.n_rows_dropped + other.n_rows_dropped)

    def to_dict(self) -> dict:
        out = {name: {"n_out_of_bounds": c} for name, c in self.n_out_of_bounds.items()}
        return {"variables": out, "n_rows_dropped": self.n_rows_dropped}


class DataTable:
    """Column-major table; missing cells are NaN.

    Instances are treated as immutable: every curation step returns a new
    table and never writes into the arrays of its input.
    """

    def __init__(self, metas: Sequence[VariableMeta], values: Sequence[np.ndarray],
                 log: CurationLog | None = None, raw: Sequence[np.ndarray] | None = None):
        metas = list(metas)
        cols = [np.asarray(v, dtype=float) for v in values]
        if len(metas) != len(cols):
            raise DataError("metadata and column counts differ")
        names = [m.name for m in metas]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate variable names: {dup}")
        lengths = {c.shape[0] for c in cols}
        if len(lengths) > 1:
            raise DataError(f"columns have differing lengths {sorted(lengths)}")
        for c in cols:
            c.setflags(write=False)
        self.metas = metas
        self.columns = cols
        self.n_rows = cols[0].shape[0] if cols else 0
        self.log = log or CurationLog()
        # source cell text, kept so untouched cells are written back verbatim
        self.raw = list(raw) if raw is not None else None

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.metas]

    @property
    def n_cols(self) -> int:
        return len(self.metas)

    def meta(self, name: str) -> VariableMeta:
        return self.metas[self._index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.columns[self._index(name)]

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"no variable named {name!r}") from None

    def matrix(self) -> np.ndarray:
        return np.column_stack(self.columns) if self.columns else np.empty((0, 0))

    def n_missing(self) -> int:
        return int(sum(np.isnan(c).sum() for c in self.columns))

    def select(self, names: Iterable[str]) -> "DataTable":
        idx = [self._index(n) for n in names]
        raw = [self.raw[i] for i in idx] if self.raw is not None else None
        return DataTable([self.metas[i] for i in idx], [self.columns[i] for i in idx],
                         self.log, raw)

    def drop(self, names: Iterable[str]) -> "DataTable":
        names = set(names)
        for n in names:
            self._index(n)
        return self.select([n for n in self.names if n not in names])

    def take_rows(self, mask: np.ndarray) -> "DataTable":
        raw = [r[mask] for r in self.raw] if self.raw is not None else None
        return DataTable(self.metas, [c[mask] for c in self.columns], self.log, raw)

    def __eq__(self, other):
        if not isinstance(other, DataTable):
            return NotImplemented
        return (self.metas == other.metas and self.n_rows == other.n_rows
                and all(np.array_equal(a, b, equal_nan=True)
                        for a, b in zip(self.columns, other.columns)))

    def __repr__(self):
        return f"DataTable({self.n_rows} rows x {self.n_cols} cols)"


def load_schema(path: str | Path) -> list[VariableMeta]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"schema file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"schema {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise DataError("schema must be a JSON array of variable objects")
    return [VariableMeta.from_dict(o) for o in raw]


def _parse_cell(cell: str) -> float:
    s = cell.strip()
    if s.lower() in MISSING_CODES:
        return math.nan
    try:
        return float(s)
    except ValueError:
        return math.nan


def load_table(path: str | Path, schema: Sequence[VariableMeta] | None = None) -> DataTable:
    """Read a header-first UTF-8 CSV into a :class:`DataTable`.

    Columns not named in ``schema`` are ignored. Without a schema every column
    is loaded, as binary when its observed values are a subset of {0, 1} and
    as continuous otherwise.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} fields, header has {len(header)}")

    if schema is None:
        schema = [VariableMeta(h) for h in header]
        infer = True
    else:
        infer = False
        missing = [m.name for m in schema if m.name not in header]
        if missing:
            raise DataError(f"schema variables absent from header: {missing}")

    metas, cols, raws = [], [], []
    for meta in schema:
        j = header.index(meta.name)
        raw = np.array([r[j] for r in rows], dtype=object)
        col = np.array([_parse_cell(c) for c in raw], dtype=float)
        observed = np.unique(col[~np.isnan(col)])
        if infer and observed.size and np.isin(observed, (0.0, 1.0)).all():
            meta = replace(meta, kind="binary")
        if meta.kind == "binary":
            if observed.size > 2:
                raise DataError(f"binary variable {meta.name!r} has {observed.size} distinct codes")
            if not np.isin(observed, (0.0, 1.0)).all():
                # two arbitrary codes are mapped onto {0, 1} in sorted order
                col = np.where(np.isnan(col), np.nan, (col == observed[-1]).astype(float))
        metas.append(meta)
        cols.append(col)
        raws.append(raw)
    return DataTable(metas, cols, raw=raws)


def apply_bounds(t: DataTable) -> DataTable:
    """Turn every cell strictly outside its variable's closed bound into NaN."""
    counts = {}
    cols = []
    for meta, col in zip(t.metas, t.columns):
        bad = np.zeros(col.shape, dtype=bool)
        with np.errstate(invalid="ignore"):
            if meta.lower_bound is not None:
                bad |= col < meta.lower_bound
            if meta.upper_bound is not None:
                bad |= col > meta.upper_bound
        n_bad = int(bad.sum())
        if n_bad:
            col = np.where(bad, np.nan, col)
            log.info("%s: %d value(s) outside [%s, %s]", meta.name, n_bad,
                     meta.lower_bound, meta.upper_bound)
        counts[meta.name] = n_bad
        cols.append(col)
    return DataTable(t.metas, cols, t.log.merge(CurationLog(counts)), t.raw)


def filter_missing_rows(t: DataTable, row_threshold: float = 0.05) -> DataTable:
    """Drop rows whose fraction of missing cells exceeds ``row_threshold``.

    The number of dropped rows is added to the table's curation log.
    """
    if not 0.0 <= row_threshold <= 1.0:
        raise DataError(f"row_threshold must lie in [0, 1], got {row_threshold}")
    if t.n_cols == 0:
        return t
    frac = np.isnan(t.matrix()).sum(axis=1) / t.n_cols
    keep = frac <= row_threshold
    n_drop = int((~keep).sum())
    if n_drop == t.n_rows:
        raise DataError(f"all {t.n_rows} rows exceed the missingness threshold {row_threshold}")
    out = t.take_rows(keep)
    out.log = t.log.merge(CurationLog({}, n_drop))
    return out


def _median(values: np.ndarray, kind: str) -> float:
    s = np.sort(values)
    n = s.size
    if n % 2:
        return float(s[n // 2])
    if kind == "continuous":
        return float(0.5 * (s[n // 2 - 1] + s[n // 2]))
    # lower-central order statistic keeps imputed codes on the observed support
    return float(s[n // 2 - 1])


def impute_median(t: DataTable) -> DataTable:
    cols = []
    for meta, col in zip(t.metas, t.columns):
        miss = np.isnan(col)
        if miss.all():
            raise DataError(f"variable {meta.name!r} has no observed values to impute from")
        if miss.any():
            col = np.where(miss, _median(col[~miss], meta.kind), col)
        cols.append(col)
    return DataTable(t.metas, cols, t.log, t.raw)


def curate(t: DataTable, row_threshold: float = 0.05) -> DataTable:
    return impute_median(filter_missing_rows(apply_bounds(t), row_threshold))


def write_csv(t: DataTable, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(t.names)
    m = t.matrix()
    for i, row in enumerate(m):
        cells = []
        for j, v in enumerate(row):
            text = t.raw[j][i] if t.raw is not None else None
            if text is None or not _same(_parse_cell(text), v):
                text = format_value(v)
            cells.append(text)
        w.writerow(cells)


def _same(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


def format_value(v: float) -> str:
    if math.isnan(v):
        return "NA"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))
