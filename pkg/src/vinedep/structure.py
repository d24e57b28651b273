"""Vine tree structures: R-vines by maximum spanning trees, C-vines by central
node selection, D-vines along a given path, plus structural validation."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import bicop
from .dependence import kendall_tau, tau_matrix
from .errors import DataError

log = logging.getLogger(__name__)

KINDS = ("rvine", "cvine", "dvine")


@dataclass
class FitSettings:
    families: tuple = bicop.DEFAULT_CANDIDATES
    criterion: str = "aic"
    trunc_level: int | None = None
    threads: int = 1


@dataclass
class VineEdge:
    conditioned: tuple[int, int]
    conditioning: tuple[int, ...]
    level: int
    weight: float = 0.0
    spec: bicop.BicopSpec | None = None
    # positions of the two joined edges in the previous tree (None in tree 1)
    parents: tuple[int, int] | None = None

    @property
    def variables(self) -> frozenset:
        return frozenset(self.conditioned) | frozenset(self.conditioning)

    def label(self, names) -> str:
        j, k = self.conditioned
        text = f"{names[j]},{names[k]}"
        if self.conditioning:
            text += "|" + ",".join(names[i] for i in self.conditioning)
        return text


@dataclass
class VineStructure:
    names: list[str]
    trees: list[list[VineEdge]]
    kind: str = "rvine"
    # C-vines: the variable whose node is the star centre of each tree
    centers: list[int] = field(default_factory=list)

    @property
    def d(self) -> int:
        return len(self.names)

    def edges(self):
        for tree in self.trees:
            yield from tree

    def n_params(self) -> int:
        return sum(e.spec.n_params for e in self.edges() if e.spec is not None)

    def resolve_parents(self) -> None:
        """Fill missing parent links from the conditioned/conditioning sets."""
        for m in range(1, len(self.trees)):
            index = {}
            for i, e in enumerate(self.trees[m - 1]):
                index.setdefault(e.variables, i)
            for e in self.trees[m]:
                if e.parents is not None:
                    continue
                j, k = e.conditioned
                d = frozenset(e.conditioning)
                a, b = index.get(d | {j}), index.get(d | {k})
                if a is not None and b is not None:
                    e.parents = (a, b)

    def to_dict(self) -> dict:
        trees = []
        for tree in self.trees:
            rows = []
            for e in tree:
                row = {"conditioned": list(e.conditioned), "conditioning": list(e.conditioning),
                       "weight": e.weight}
                if e.spec is not None:
                    sd = e.spec.to_dict()
                    row.update({k: sd[k] for k in ("family", "rotation", "params", "tau",
                                                    "loglik", "aic", "bic", "n")})
                rows.append(row)
            trees.append(rows)
        out = {"kind": self.kind, "d": self.d, "names": list(self.names), "trees": trees}
        if self.centers:
            out["centers"] = list(self.centers)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "VineStructure":
        names = list(obj["names"]) if "names" in obj else [f"V{i + 1}" for i in range(obj["d"])]
        trees = []
        for m, rows in enumerate(obj["trees"], start=1):
            tree = []
            for row in rows:
                spec = bicop.BicopSpec.from_dict(row) if "family" in row else None
                tree.append(VineEdge(tuple(int(i) for i in row["conditioned"]),
                                     tuple(int(i) for i in row.get("conditioning", ())),
                                     m, float(row.get("weight", 0.0)), spec))
            trees.append(tree)
        s = cls(names, trees, obj.get("kind", "rvine"), list(obj.get("centers", [])))
        s.resolve_parents()
        return s


def conditional_pseudo_obs(edge: VineEdge, u_left, u_right):
    """Next-level pseudo-observations produced by a fitted edge.

    Returns ``(u_left | u_right, u_right | u_left)``, that is the conditional
    distribution of the edge's first variable given its second, and vice versa.
    """
    if edge.spec is None:
        raise DataError(f"edge {edge.conditioned}|{edge.conditioning} has no fitted copula")
    return (bicop.hfunc(edge.spec, u_left, u_right, "second"),
            bicop.hfunc(edge.spec, u_left, u_right, "first"))


# --------------------------------------------------------------------------
# Spanning trees
# --------------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[rj] = ri
        return True


def max_spanning_tree(n_nodes: int, weights, keys=None) -> list[tuple[int, int]]:
    """Kruskal's algorithm on a symmetric weight matrix.

    NaN entries mark non-admissible edges. Equal weights are resolved in
    lexicographic order of ``(keys[i], keys[j])`` (node indices by default).
    """
    w = np.asarray(weights, dtype=float)
    if n_nodes < 2:
        raise DataError("a spanning tree needs at least two nodes")
    keys = list(range(n_nodes)) if keys is None else list(keys)
    cand = []
    for i, j in combinations(range(n_nodes), 2):
        if np.isnan(w[i, j]):
            continue
        if not np.isfinite(w[i, j]):
            raise DataError(f"non-finite weight between nodes {i} and {j}")
        a, b = sorted((keys[i], keys[j]))
        cand.append((-w[i, j], a, b, i, j))
    cand.sort(key=lambda c: c[:3])
    uf = _UnionFind(n_nodes)
    tree = []
    for _, _, _, i, j in cand:
        if uf.union(i, j):
            tree.append((i, j))
            if len(tree) == n_nodes - 1:
                break
    if len(tree) != n_nodes - 1:
        raise DataError("weight graph is disconnected")
    return tree


# --------------------------------------------------------------------------
# Sequential construction
# --------------------------------------------------------------------------

@dataclass
class _Node:
    """A node of the current tree: its variable set and conditional samples."""

    variables: frozenset
    obs: dict  # variable -> u_{var | variables - {var}}
    parents: tuple = ()  # positions in the previous tree (edges only)
    key: tuple = ()


def _initial_nodes(u, names):
    return [_Node(frozenset([i]), {i: u[:, i]}, (i,), (names[i],)) for i in range(u.shape[1])]


def _adjacent(a: _Node, b: _Node, level: int) -> bool:
    if level == 1:
        return True
    return bool(set(a.parents) & set(b.parents))


def _join(a: _Node, b: _Node):
    only_a = a.variables - b.variables
    only_b = b.variables - a.variables
    if len(only_a) != 1 or len(only_b) != 1:
        raise DataError("proximity condition violated while joining vine nodes")
    (j,), (k,) = only_a, only_b
    return j, k, tuple(sorted(a.variables & b.variables))


def _pair_tau(a, b):
    j, k, _ = _join(a, b)
    return kendall_tau(a.obs[j], b.obs[k])


def _edge_key(j, k, cond, names):
    return tuple(sorted((names[j], names[k]))) + tuple(sorted(names[i] for i in cond))


def _fit_level(nodes, pairs, level, settings, names, weights=None):
    """Fit one tree: ``pairs`` are (a, b) node positions with a's free variable first."""
    truncated = settings.trunc_level is not None and level > settings.trunc_level
    jobs = []
    for a, b in pairs:
        j, k, cond = _join(nodes[a], nodes[b])
        jobs.append((a, b, j, k, cond))

    def one(job):
        a, b, j, k, cond = job
        x, y = nodes[a].obs[j], nodes[b].obs[k]
        if truncated:
            return bicop.independence_spec(x.shape[0])
        try:
            return bicop.select_family(x, y, settings.families, settings.criterion)
        except Exception as exc:  # noqa: BLE001 - any fit failure degrades the edge
            log.warning("edge %s: copula selection failed (%s); using Independence",
                        _edge_key(j, k, cond, names), exc)
            spec = bicop.independence_spec(x.shape[0])
            spec.flags.append("fit_failed")
            return spec

    if settings.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(settings.threads) as pool:
            specs = list(pool.map(one, jobs))
    else:
        specs = [one(j) for j in jobs]

    edges, new_nodes = [], []
    for (a, b, j, k, cond), spec in zip(jobs, specs):
        w = weights[(a, b)] if weights is not None else abs(spec.tau_hat)
        parents = None if level == 1 else (a, b)
        edge = VineEdge((j, k), cond, level, float(w), spec, parents)
        edges.append(edge)
        x, y = nodes[a].obs[j], nodes[b].obs[k]
        hj, hk = conditional_pseudo_obs(edge, x, y)
        new_nodes.append(_Node(edge.variables, {j: hj, k: hk}, (a, b),
                               _edge_key(j, k, cond, names)))
    return edges, new_nodes


def _orient(nodes, a, b, names):
    # lexicographic orientation by variable name for undirected selections
    j, k, _ = _join(nodes[a], nodes[b])
    return (a, b) if names[j] <= names[k] else (b, a)


def _check_input(u, names):
    if hasattr(u, "matrix"):
        names = names or list(u.column_names)
        u = u.matrix
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] < 2:
        raise DataError("vine construction needs at least two variables")
    if u.shape[0] < bicop.MIN_FIT_N:
        raise DataError(f"vine construction needs at least {bicop.MIN_FIT_N} rows, "
                        f"got {u.shape[0]}")
    names = list(names) if names is not None else [f"V{i + 1}" for i in range(u.shape[1])]
    return u, names


def build_rvine(u, settings: FitSettings | None = None, names=None,
                first_tree_tau=None) -> VineStructure:
    """Dissmann's greedy selection: a maximum |tau| spanning tree per level.

    ``first_tree_tau`` replaces the first-tree weights, e.g. with tau-b of
    the unjittered data when discrete margins were jittered.
    """
    settings = settings or FitSettings()
    u, names = _check_input(u, names)
    d = u.shape[1]
    if first_tree_tau is not None:
        first_tree_tau = np.asarray(first_tree_tau, dtype=float)
        if first_tree_tau.shape != (d, d):
            raise DataError(f"first_tree_tau must be {d}x{d}")
    nodes = _initial_nodes(u, names)
    trees = []
    for level in range(1, d):
        truncated = settings.trunc_level is not None and level > settings.trunc_level
        n = len(nodes)
        wmat = np.full((n, n), np.nan)
        if level == 1 and not truncated:
            if first_tree_tau is None:
                first_tree_tau = tau_matrix(u, names, settings.threads).values
            wmat = np.abs(first_tree_tau)
        else:
            for a, b in combinations(range(n), 2):
                if _adjacent(nodes[a], nodes[b], level):
                    wmat[a, b] = wmat[b, a] = 0.0 if truncated else abs(_pair_tau(nodes[a], nodes[b]))
        pairs = max_spanning_tree(n, wmat, [nd.key for nd in nodes])
        weights = {}
        oriented = []
        for a, b in pairs:
            a, b = _orient(nodes, a, b, names)
            oriented.append((a, b))
            weights[(a, b)] = wmat[a, b]
        edges, nodes = _fit_level(nodes, oriented, level, settings, names, weights)
        trees.append(edges)
    return VineStructure(names, trees, "rvine")


def _center_scores(nodes, level, truncated):
    n = len(nodes)
    tau = np.eye(n)
    if not truncated:
        for a, b in combinations(range(n), 2):
            tau[a, b] = tau[b, a] = _pair_tau(nodes[a], nodes[b])
    scores = np.abs(tau).sum(axis=1) - 1.0
    return scores, tau


def _free_variables(nodes) -> list[int]:
    # star-level nodes share the previous centre and conditioning set; each
    # node adds exactly one variable of its own
    common = frozenset.intersection(*(nd.variables for nd in nodes))
    out = []
    for nd in nodes:
        (v,) = nd.variables - common
        out.append(v)
    return out


def build_cvine(u, settings: FitSettings | None = None, names=None,
                max_level: int | None = None, trace: list | None = None,
                fit_last: bool = True) -> VineStructure:
    """C-vine: each level's centre maximises the sum of |tau| to the other nodes.

    ``trace``, when given, receives one dict per level with the centre, its
    score and the tau values to its neighbours. ``max_level`` stops early and
    returns a partial structure (used for rankings); with ``fit_last`` false
    the centre of the last level is traced but its tree is not fitted.
    """
    settings = settings or FitSettings()
    u, names = _check_input(u, names)
    d = u.shape[1]
    nodes = _initial_nodes(u, names)
    trees, centers = [], []
    last = d - 1 if max_level is None else min(max_level, d - 1)
    for level in range(1, last + 1):
        truncated = settings.trunc_level is not None and level > settings.trunc_level
        scores, tau = _center_scores(nodes, level, truncated)
        free = _free_variables(nodes)
        # highest score wins; exact ties go to the lexicographically first name
        c = min(range(len(nodes)), key=lambda i: (-scores[i], names[free[i]]))
        pairs = [(c, b) for b in range(len(nodes)) if b != c]
        weights = {(c, b): abs(tau[c, b]) for b in range(len(nodes)) if b != c}
        centre_var = free[c]
        if trace is not None:
            trace.append({
                "level": level,
                "center": names[centre_var],
                "node": _node_label(nodes[c], names),
                "score": float(scores[c]),
                "neighbors": sorted((names[free[b]], float(tau[c, b])) for _, b in pairs),
            })
        centers.append(centre_var)
        if level == last and not fit_last:
            break
        edges, nodes = _fit_level(nodes, pairs, level, settings, names, weights)
        trees.append(edges)
    return VineStructure(names, trees, "cvine", centers)


def _node_label(node: _Node, names) -> str:
    if len(node.variables) == 1:
        return names[next(iter(node.variables))]
    j, k = sorted(node.obs)
    cond = sorted(node.variables - {j, k})
    text = f"{names[j]},{names[k]}"
    if cond:
        text += "|" + ",".join(names[i] for i in cond)
    return text


def build_dvine(u, order=None, settings: FitSettings | None = None, names=None) -> VineStructure:
    """D-vine whose first tree is the path through ``order``."""
    settings = settings or FitSettings()
    u, names = _check_input(u, names)
    d = u.shape[1]
    order = list(range(d)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(d)):
        raise DataError(f"order must be a permutation of 0..{d - 1}, got {order}")
    nodes = [_initial_nodes(u, names)[i] for i in order]
    trees = []
    for level in range(1, d):
        pairs = [(i, i + 1) for i in range(len(nodes) - 1)]
        edges, nodes = _fit_level(nodes, pairs, level, settings, names)
        trees.append(edges)
    return VineStructure(names, trees, "dvine")


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

@dataclass
class Diagnostics:
    ok: bool
    violations: list[str]

    def __bool__(self):
        return self.ok


def _is_tree(n_nodes, pairs) -> bool:
    if len(pairs) != n_nodes - 1:
        return False
    uf = _UnionFind(n_nodes)
    return all(uf.union(a, b) for a, b in pairs)


def validate_structure(s: VineStructure, complete: bool = True) -> Diagnostics:
    """Check tree sizes, tree shape, proximity and the C/D-vine constraints."""
    bad = []
    d = s.d
    names = s.names
    if complete and len(s.trees) != d - 1:
        bad.append(f"expected {d - 1} trees, found {len(s.trees)}")
    for m, tree in enumerate(s.trees, start=1):
        if len(tree) != d - m:
            bad.append(f"tree {m} has {len(tree)} edges, expected {d - m}")
        for e in tree:
            j, k = e.conditioned
            where = f"tree {m} edge {_safe_label(e, names)}"
            if j == k or j in e.conditioning or k in e.conditioning:
                bad.append(f"{where}: conditioned and conditioning sets overlap")
            if len(e.conditioning) != m - 1:
                bad.append(f"{where}: conditioning set has size {len(e.conditioning)}, "
                           f"expected {m - 1}")
            if not all(0 <= i < d for i in e.variables):
                bad.append(f"{where}: variable index out of range")
        if m == 1:
            pairs = [e.conditioned for e in tree]
            if all(0 <= a < d and 0 <= b < d for a, b in pairs) and not _is_tree(d, pairs):
                bad.append("tree 1 is not a spanning tree over the variables")
            if s.kind == "dvine":
                deg = np.zeros(d, dtype=int)
                for a, b in pairs:
                    deg[a] += 1
                    deg[b] += 1
                if deg.max(initial=0) > 2:
                    bad.append("tree 1 of a D-vine is not a path")
        else:
            prev = s.trees[m - 2]
            pairs = []
            for e in tree:
                where = f"tree {m} edge {_safe_label(e, names)}"
                if e.parents is None:
                    bad.append(f"{where}: joined nodes not found in tree {m - 1}")
                    continue
                a, b = e.parents
                if not (0 <= a < len(prev) and 0 <= b < len(prev)) or a == b:
                    bad.append(f"{where}: invalid parent positions {e.parents}")
                    continue
                pa, pb = prev[a], prev[b]
                if m == 2:
                    shared = bool(set(pa.conditioned) & set(pb.conditioned))
                else:
                    shared = bool(set(pa.parents or ()) & set(pb.parents or ()))
                if not shared:
                    bad.append(f"{where}: proximity condition violated (joins "
                               f"{_safe_label(pa, names)} and {_safe_label(pb, names)})")
                if (pa.variables | pb.variables) != e.variables or \
                        (pa.variables & pb.variables) != frozenset(e.conditioning):
                    bad.append(f"{where}: sets inconsistent with the joined nodes")
                pairs.append((a, b))
            if len(pairs) == len(tree) and not _is_tree(len(prev), pairs):
                bad.append(f"tree {m} is not a spanning tree over tree {m - 1}")
        if s.kind == "cvine" and tree:
            n_nodes = len(tree) + 1
            counts = {}
            ends = [e.parents if m > 1 else e.conditioned for e in tree]
            for a, b in (x for x in ends if x is not None):
                counts[a] = counts.get(a, 0) + 1
                counts[b] = counts.get(b, 0) + 1
            if max(counts.values(), default=0) != n_nodes - 1:
                bad.append(f"tree {m} of a C-vine is not a star")
    return Diagnostics(not bad, bad)


def _safe_label(e: VineEdge, names) -> str:
    try:
        return e.label(names)
    except IndexError:
        return f"{e.conditioned}|{e.conditioning}"


# --------------------------------------------------------------------------
# DOT export
# --------------------------------------------------------------------------

def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def tree_to_dot(s: VineStructure, level: int = 1) -> str:
    """Graphviz rendering of one tree: nodes are variable sets, edges carry
    the selected family and tau."""
    tree = s.trees[level - 1]
    names = s.names
    lines = [f"graph tree{level} {{"]
    node_labels = {}
    for e in tree:
        if level == 1:
            ends = [names[e.conditioned[0]], names[e.conditioned[1]]]
        else:
            prev = s.trees[level - 2]
            ends = [prev[p].label(names) for p in e.parents]
        for x in ends:
            node_labels.setdefault(x, f"n{len(node_labels)}")
        fam = e.spec.family if e.spec else "?"
        tau = e.spec.tau_hat if e.spec else e.weight
        lines.append(f"  {node_labels[ends[0]]} -- {node_labels[ends[1]]} "
                     f"[label={_quote(f'{fam} {tau:.3f}')}];")
    decl = [f"  {nid} [label={_quote(lab)}];" for lab, nid in node_labels.items()]
    return "\n".join(lines[:1] + decl + lines[1:] + ["}"]) + "\n"
