"""Variable-importance rankings and hub clusters read off fitted vines."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dependence import tau_matrix
from .errors import DataError
from .ingest import DataTable
from .margins import to_pseudo_obs
from .structure import FitSettings, VineStructure, _quote, build_cvine, build_rvine

log = logging.getLogger(__name__)

MIN_SUBSET_ROWS = 200
MIN_PREVALENCE = 0.01

__all__ = ["CenterLevel", "CentralityRanking", "Hub", "ClusterReport",
           "rank_central_variables", "parse_condition", "condition_mask",
           "conditioned_ranking", "extract_clusters", "comorbidity_report", "report_dict"]


@dataclass(frozen=True)
class CenterLevel:
    level: int
    center: str
    # full conditioned label of the centre node ("A" in tree 1, "A,B" or "A,C|B" later)
    node: str
    score: float
    neighbors: tuple  # (variable, tau) pairs sorted by variable name

    def to_dict(self) -> dict:
        return {"level": self.level, "center": self.center, "node": self.node,
                "score": self.score,
                "neighbors": [{"variable": v, "tau": t} for v, t in self.neighbors]}


@dataclass
class CentralityRanking:
    levels: list[CenterLevel]
    n: int = 0
    condition: dict = field(default_factory=dict)

    @property
    def centers(self) -> list[str]:
        return [lv.center for lv in self.levels]

    def to_dict(self) -> dict:
        return {"n": self.n, "condition": dict(self.condition),
                "levels": [lv.to_dict() for lv in self.levels]}

    def to_text(self) -> str:
        w = max([len("center")] + [len(lv.center) for lv in self.levels])
        head = f"level  {'center':<{w}}  score   node"
        rows = [f"{lv.level:>5}  {lv.center:<{w}}  {lv.score:.4f}  {lv.node}"
                for lv in self.levels]
        if self.condition:
            cond = ", ".join(f"{k}={v}" for k, v in sorted(self.condition.items()))
            head = f"# condition: {cond} (n={self.n})\n" + head
        return "\n".join([head] + rows) + "\n"


@dataclass(frozen=True)
class Hub:
    center: str
    degree: int
    strength: float  # sum of first-tree edge weights at the hub
    neighbors: tuple  # dicts: variable, family, rotation, tau, weight

    def to_dict(self) -> dict:
        return {"center": self.center, "degree": self.degree, "strength": self.strength,
                "neighbors": [dict(nb) for nb in self.neighbors]}

    def to_dot(self) -> str:
        gid = "hub_" + "".join(c if c.isalnum() else "_" for c in self.center)
        lines = [f"graph {gid} {{", f"  c [label={_quote(self.center)}, shape=box];"]
        for i, nb in enumerate(self.neighbors):
            lines.append(f"  n{i} [label={_quote(nb['variable'])}];")
        for i, nb in enumerate(self.neighbors):
            text = f"{nb['family']} {nb['tau']:.3f}"
            lines.append(f"  c -- n{i} [label={_quote(text)}];")
        return "\n".join(lines + ["}"]) + "\n"


@dataclass
class ClusterReport:
    hubs: list[Hub]
    min_degree: int
    excluded: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"min_degree": self.min_degree, "excluded": list(self.excluded),
                "hubs": [h.to_dict() for h in self.hubs]}

    def to_text(self) -> str:
        lines = [f"hubs with first-tree degree >= {self.min_degree}: {len(self.hubs)}"]
        for h in self.hubs:
            lines.append(f"{h.center} (degree {h.degree}, strength {h.strength:.4f})")
            for nb in h.neighbors:
                lines.append(f"  {nb['variable']:<16} {nb['family']:<12} "
                             f"rot {nb['rotation']:>3}  tau {nb['tau']:+.4f}")
        for ex in self.excluded:
            lines.append(f"excluded {ex['variable']}: {ex['reason']}")
        return "\n".join(lines) + "\n"


def _as_matrix(u, names):
    if hasattr(u, "matrix"):
        return np.asarray(u.matrix, dtype=float), list(names or u.column_names)
    u = np.asarray(u, dtype=float)
    return u, list(names) if names is not None else [f"V{i + 1}" for i in range(u.shape[1])]


def rank_central_variables(u, levels: int | None = None, settings: FitSettings | None = None,
                           names=None, n_rows: int | None = None) -> CentralityRanking:
    """Order variables by the C-vine centre chosen at each of the first ``levels`` trees."""
    mat, names = _as_matrix(u, names)
    d = mat.shape[1]
    if levels is None:
        levels = d - 1
    if not 1 <= levels <= d - 1:
        raise DataError(f"levels must be between 1 and {d - 1}, got {levels}")
    trace = []
    build_cvine(mat, settings, names, max_level=levels, trace=trace, fit_last=False)
    out = [CenterLevel(t["level"], t["center"], t["node"], t["score"],
                       tuple((v, tau) for v, tau in t["neighbors"])) for t in trace]
    return CentralityRanking(out, n_rows if n_rows is not None else mat.shape[0])


def parse_condition(expr: str) -> tuple[str, str]:
    name, sep, value = expr.partition("=")
    if not sep or not name.strip() or not value.strip():
        raise DataError(f"condition must look like variable=value, got {expr!r}")
    return name.strip(), value.strip()


def condition_mask(t: DataTable, condition) -> np.ndarray:
    """Rows matching every ``(variable, value)`` pair.

    Values are compared numerically when they parse as numbers and against
    the source cell text otherwise.
    """
    items = condition.items() if isinstance(condition, dict) else condition
    mask = np.ones(t.n_rows, dtype=bool)
    for name, value in items:
        col = t.column(name)
        try:
            mask &= col == float(value)
        except ValueError:
            if t.raw is None:
                raise DataError(f"cannot match non-numeric value {value!r} "
                                f"for {name!r}") from None
            raw = t.raw[t.names.index(name)]
            mask &= np.array([str(c).strip() == value for c in raw], dtype=bool)
    return mask


def conditioned_ranking(t: DataTable, condition, levels: int | None = None,
                        settings: FitSettings | None = None, min_rows: int = MIN_SUBSET_ROWS,
                        tie_policy: str = "jitter", seed: int = 0) -> CentralityRanking:
    """Ranking on the cohort matching ``condition``, without the condition variables."""
    items = list(condition.items() if isinstance(condition, dict) else condition)
    mask = condition_mask(t, items)
    n = int(mask.sum())
    if n < min_rows:
        cond = ", ".join(f"{k}={v}" for k, v in items)
        raise DataError(f"subset {cond} has {n} rows; at least {min_rows} required")
    sub = t.take_rows(mask).drop({k for k, _ in items})
    u, _ = to_pseudo_obs(sub, tie_policy, seed)
    ranking = rank_central_variables(u, levels, settings)
    ranking.condition = {k: v for k, v in items}
    return ranking


def extract_clusters(s: VineStructure, min_degree: int = 3) -> ClusterReport:
    """First-tree nodes of degree at least ``min_degree`` with their star subgraphs."""
    if not s.trees:
        raise DataError("structure has no fitted first tree")
    names = s.names
    adj = {i: [] for i in range(s.d)}
    for e in s.trees[0]:
        j, k = e.conditioned
        adj[j].append((k, e))
        adj[k].append((j, e))
    hubs = []
    for i, nbrs in adj.items():
        if len(nbrs) < min_degree:
            continue
        rows = []
        for k, e in sorted(nbrs, key=lambda p: names[p[0]]):
            spec = e.spec
            rows.append({"variable": names[k],
                         "family": spec.family if spec else "Independence",
                         "rotation": spec.rotation if spec else 0,
                         "tau": spec.tau_hat if spec else 0.0,
                         "weight": e.weight})
        strength = float(sum(abs(e.weight) for _, e in nbrs))
        hubs.append(Hub(names[i], len(nbrs), strength, tuple(rows)))
    hubs.sort(key=lambda h: (-h.degree, -h.strength, h.center))
    return ClusterReport(hubs, min_degree)


def comorbidity_report(t: DataTable, indicator_vars, covariates=(),
                       settings: FitSettings | None = None, min_degree: int = 3,
                       seed: int = 0, min_prevalence: float = MIN_PREVALENCE):
    """R-vine on binary indicators plus covariates; returns (report, structure).

    Rare indicators are excluded. Binary margins are jittered for the copula
    fits while the first tree is chosen on tau-b of the unjittered data, so
    exact copies stay tau = 1 apart.
    """
    excluded, keep = [], []
    for name in indicator_vars:
        if t.meta(name).kind != "binary":
            raise DataError(f"indicator {name!r} is not binary")
        col = t.column(name)
        prevalence = float(np.nanmean(col == 1.0)) if col.size else 0.0
        if prevalence < min_prevalence:
            log.warning("indicator %s excluded: prevalence %.4f below %.4f",
                        name, prevalence, min_prevalence)
            excluded.append({"variable": name, "reason": f"prevalence {prevalence:.4g} "
                             f"below {min_prevalence:g}"})
        else:
            keep.append(name)
    for name in covariates:
        if t.meta(name).kind == "binary":
            raise DataError(f"covariate {name!r} must be continuous or ordinal")
    cols = keep + [c for c in covariates if c not in keep]
    if len(cols) < 2:
        raise DataError("fewer than two variables left for the co-occurrence vine")
    sub = t.select(cols)
    u, _ = to_pseudo_obs(sub, "jitter", seed)
    threads = settings.threads if settings else 1
    tau_b = tau_matrix(sub.matrix(), cols, threads).values
    s = build_rvine(u, settings, cols, first_tree_tau=tau_b)
    report = extract_clusters(s, min_degree)
    report.excluded = excluded
    return report, s


def report_dict(rankings=(), clusters=None) -> dict:
    return {"rankings": [r.to_dict() for r in rankings],
            "clusters": clusters.to_dict() if clusters is not None else None}
