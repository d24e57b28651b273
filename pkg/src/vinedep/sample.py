"""Simulation from a fitted vine by the inverse Rosenblatt transform.

Variables are drawn one at a time. The order comes from repeatedly peeling a
variable that no remaining edge conditions on; each such variable owns one
edge per tree, and inverting those edges from the top tree down turns a
uniform draw into its conditional quantile given the variables drawn before.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bicop
from .errors import DataError, NumericError
from .margins import inverse_pit

GENERATOR = "numpy.PCG64"


@dataclass
class SampleBatch:
    uniforms: np.ndarray
    seed: int
    names: list[str]
    data_scale: np.ndarray | None = None
    generator: str = GENERATOR


def sampling_order(structure) -> tuple[list[int], dict]:
    """Return the draw order and, per variable, its edges ordered by tree.

    The edge list of variable x holds ``(edge, partner, x_is_first)``.
    """
    d = structure.d
    remaining = {(m, i) for m, tree in enumerate(structure.trees) for i in range(len(tree))}
    peeled = []
    owned = {}
    alive = set(range(d))
    while len(alive) > 1:
        cond_vars = set()
        for m, i in remaining:
            cond_vars.update(structure.trees[m][i].conditioning)
        top = max((m for m, _ in remaining), default=None)
        top_edges = sorted(i for m, i in remaining if m == top)
        choice = None
        for i in top_edges:
            e = structure.trees[top][i]
            for x in sorted(e.conditioned, key=lambda v: structure.names[v], reverse=True):
                if x not in cond_vars:
                    choice = x
                    break
            if choice is not None:
                break
        if choice is None:
            raise DataError("structure has no peelable variable; it is not a regular vine")
        mine = sorted(((m, i) for m, i in remaining
                       if choice in structure.trees[m][i].conditioned), key=lambda t: t[0])
        if [m for m, _ in mine] != list(range(len(mine))):
            raise DataError(f"variable {structure.names[choice]} does not own one edge per tree")
        owned[choice] = []
        for m, i in mine:
            e = structure.trees[m][i]
            j, k = e.conditioned
            owned[choice].append((e, k if j == choice else j, j == choice))
        remaining -= set(mine)
        alive.discard(choice)
        peeled.append(choice)
    (first,) = alive
    owned[first] = []
    order = [first] + peeled[::-1]
    return order, owned


def sample_uniform(fv, n: int, seed: int = 0) -> SampleBatch:
    """Draw ``n`` rows whose joint law is the fitted vine copula."""
    structure = fv.structure
    d = structure.d
    if n < 1:
        raise DataError("sample size must be positive")
    for e in structure.edges():
        if e.spec is None:
            raise DataError("vine is not fully fitted")
    rng = np.random.default_rng(seed)
    w = rng.random((n, d))
    w = np.clip(w, bicop.CLAMP, 1.0 - bicop.CLAMP)
    order, owned = sampling_order(structure)
    # cache of conditional samples keyed by (variable, conditioning set)
    cache: dict = {}
    out = np.empty((n, d))
    for step, x in enumerate(order):
        edges = owned[x]
        t = w[:, step]
        if edges:
            top, p_top, _ = edges[-1]
            cache[(x, frozenset(top.conditioning) | {p_top})] = t
        for e, partner, x_first in reversed(edges):
            d_set = frozenset(e.conditioning)
            given = cache[(partner, d_set)]
            try:
                t = bicop.hinv(e.spec, t, given, "second" if x_first else "first")
            except NumericError as exc:
                raise NumericError(f"edge {e.label(structure.names)}: {exc}") from None
            cache[(x, d_set)] = t
        if not edges:
            cache[(x, frozenset())] = t
        out[:, x] = cache[(x, frozenset())]
        # partner-side outputs of x's edges feed variables drawn later
        for e, partner, x_first in edges:
            d_set = frozenset(e.conditioning)
            ux, up = cache[(x, d_set)], cache[(partner, d_set)]
            if x_first:
                cache[(partner, d_set | {x})] = bicop.hfunc(e.spec, ux, up, "first")
            else:
                cache[(partner, d_set | {x})] = bicop.hfunc(e.spec, up, ux, "second")
    return SampleBatch(out, seed, list(structure.names))


def sample_data_scale(fv, n: int, seed: int = 0) -> SampleBatch:
    """Sample uniforms and map each column through its empirical quantile function."""
    if len(fv.marginals) != fv.structure.d:
        raise DataError("model has no marginal models to map samples back to data scale")
    batch = sample_uniform(fv, n, seed)
    cols = [inverse_pit(batch.uniforms[:, i], m) for i, m in enumerate(fv.marginals)]
    batch.data_scale = np.column_stack(cols)
    return batch
