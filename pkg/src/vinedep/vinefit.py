"""Whole-vine likelihood, information criteria and the fitted-model document.

Log-likelihoods are on the copula scale. The marginal density terms are
rank-based and identical for every copula model fitted to the same data, so
they are left out of model comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bicop
from .errors import DataError
from .dependence import tau_matrix
from .margins import MarginalModel, to_pseudo_obs
from .structure import (FitSettings, VineEdge, VineStructure, build_cvine, build_dvine,
                        build_rvine, conditional_pseudo_obs)

FORMAT_VERSION = 1
LIKELIHOOD_NOTE = ("copula-scale pseudo-likelihood; marginal density terms are rank-based "
                   "and omitted")

__all__ = ["FittedVine", "conditional_pseudo_obs", "vine_loglik", "model_criteria",
           "fit_vine", "fit_table", "refit_structure", "propagate"]


@dataclass
class FittedVine:
    structure: VineStructure
    marginals: list[MarginalModel] = field(default_factory=list)
    n: int = 0
    loglik: float = 0.0
    aic: float = 0.0
    bic: float = 0.0
    curation_log: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return self.structure.names

    @property
    def d(self) -> int:
        return self.structure.d

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "structure": self.structure.to_dict(),
            "marginals": [m.to_dict() for m in self.marginals],
            "n": self.n,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "curation_log": self.curation_log,
            "settings": self.settings,
            "likelihood": LIKELIHOOD_NOTE,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FittedVine":
        if obj.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported model version {obj.get('version')!r}")
        s = VineStructure.from_dict(obj["structure"])
        margs = [MarginalModel.from_dict(m) for m in obj.get("marginals", [])]
        return cls(s, margs, int(obj.get("n", 0)), float(obj.get("loglik", 0.0)),
                   float(obj.get("aic", 0.0)), float(obj.get("bic", 0.0)),
                   obj.get("curation_log", {}), obj.get("settings", {}))


def _matrix(u):
    return np.asarray(u.matrix if hasattr(u, "matrix") else u, dtype=float)


def propagate(structure: VineStructure, u):
    """Walk the trees, yielding ``(edge, x, y)`` with the edge's copula inputs.

    ``x`` is the conditional sample of the edge's first conditioned variable,
    ``y`` that of the second.
    """
    u = _matrix(u)
    if u.ndim != 2 or u.shape[1] != structure.d:
        raise DataError(f"expected {structure.d} columns, got shape {u.shape}")
    prev_out = None
    for m, tree in enumerate(structure.trees, start=1):
        out = []
        for e in tree:
            j, k = e.conditioned
            if m == 1:
                x, y = u[:, j], u[:, k]
            else:
                if e.parents is None:
                    raise DataError(f"edge {e.conditioned}|{e.conditioning} is not linked "
                                    "to the previous tree")
                a, b = e.parents
                x, y = prev_out[a][j], prev_out[b][k]
            yield e, x, y
            hj, hk = conditional_pseudo_obs(e, x, y)
            out.append({j: hj, k: hk})
        prev_out = out


def vine_loglik(fv, u, per_row: bool = False):
    """Sum over rows and edges of log c_edge at the conditioned pseudo-observations."""
    structure = fv.structure if isinstance(fv, FittedVine) else fv
    u = _matrix(u)
    total = np.zeros(u.shape[0])
    for e, x, y in propagate(structure, u):
        if e.spec.family != "Independence":
            total += bicop.logpdf(e.spec, x, y)
    return total if per_row else float(total.sum())


def model_criteria(fv) -> tuple[float, float]:
    structure = fv.structure
    k = structure.n_params()
    n = fv.n
    aic = 2.0 * k - 2.0 * fv.loglik
    bic = (k * math.log(n) if n > 0 else 0.0) - 2.0 * fv.loglik
    return aic, bic


def _finish(structure, u, marginals=(), curation_log=None, settings=None) -> FittedVine:
    n = _matrix(u).shape[0]
    ll = float(sum(e.spec.loglik for e in structure.edges()))
    fv = FittedVine(structure, list(marginals), n, ll, 0.0, 0.0, curation_log or {},
                    settings or {})
    fv.aic, fv.bic = model_criteria(fv)
    return fv


def fit_vine(u, kind: str = "rvine", settings: FitSettings | None = None, names=None,
             order=None, marginals=(), curation_log=None, meta=None) -> FittedVine:
    """Select and fit a vine of the requested kind on pseudo-observations."""
    settings = settings or FitSettings()
    if kind == "rvine":
        s = build_rvine(u, settings, names)
    elif kind == "cvine":
        s = build_cvine(u, settings, names)
    elif kind == "dvine":
        s = build_dvine(u, order, settings, names)
    else:
        raise ValueError(f"unknown vine kind {kind!r}")
    info = {"kind": kind, "criterion": settings.criterion, "families": list(settings.families),
            "trunc_level": settings.trunc_level}
    info.update(meta or {})
    return _finish(s, u, marginals, curation_log, info)


def fit_table(table, kind: str = "rvine", settings: FitSettings | None = None,
              tie_policy: str = "jitter", seed: int = 0, order=None) -> FittedVine:
    """Margins, pseudo-observations and vine fit for a curated table."""
    u, margs = to_pseudo_obs(table, tie_policy, seed)
    meta = {"seed": seed, "tie_policy": tie_policy}
    if tie_policy == "jitter":
        meta["tie_sensitivity"] = tie_sensitivity(table, u)
    return fit_vine(u, kind, settings, u.column_names, order, margs, table.log.to_dict(),
                    meta)


def tie_sensitivity(table, u_jitter) -> dict:
    """Largest |tau| change between jittered and average-rank pseudo-observations."""
    u_avg, _ = to_pseudo_obs(table, "average_rank")
    a = tau_matrix(u_jitter.matrix).values
    b = tau_matrix(u_avg.matrix).values
    diff = np.abs(a - b)
    if diff.size == 0 or not np.isfinite(diff).any():
        return {"max_abs_tau_diff": 0.0, "pair": []}
    i, j = np.unravel_index(np.nanargmax(diff), diff.shape)
    pair = sorted([table.names[i], table.names[j]]) if diff[i, j] > 0 else []
    return {"max_abs_tau_diff": float(diff[i, j]), "pair": pair}


def refit_structure(template: VineStructure, u, settings: FitSettings | None = None,
                    keep_families: bool = True) -> FittedVine:
    """Re-estimate every edge of a fixed structure on new data.

    With ``keep_families`` each edge keeps its family and rotation and only the
    parameters are re-estimated; otherwise families are re-selected.
    """
    settings = settings or FitSettings()
    u = _matrix(u)
    trees = [[_clone_edge(e) for e in tree] for tree in template.trees]
    s = VineStructure(list(template.names), trees, template.kind, list(template.centers))
    for e, x, y in propagate(s, u):
        old = e.spec
        if keep_families and old is not None:
            if old.family == "Independence":
                e.spec = bicop.independence_spec(x.shape[0])
            else:
                e.spec = bicop.fit(old.family, x, y, old.rotation)
        else:
            e.spec = bicop.select_family(x, y, settings.families, settings.criterion)
    return _finish(s, u)


def _clone_edge(e):
    return VineEdge(e.conditioned, e.conditioning, e.level, e.weight, e.spec, e.parents)
