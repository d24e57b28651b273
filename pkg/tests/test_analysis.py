import numpy as np
import pydot
import pytest

import sim
from vinedep import analysis
from vinedep.bicop import BicopSpec
from vinedep.dependence import tau_matrix
from vinedep.errors import DataError
from vinedep.ingest import DataTable, VariableMeta
from vinedep.margins import to_pseudo_obs
from vinedep.structure import FitSettings, VineEdge, VineStructure, build_rvine

FAST = FitSettings(families=("Gaussian",))


def first_tree(pairs, names):
    edges = [VineEdge((a, b), (), 1, 0.5, BicopSpec("Gaussian", (0.5,), tau_hat=0.33))
             for a, b in pairs]
    return VineStructure(list(names), [edges])


def table(x, names, kinds=None):
    kinds = kinds or {}
    metas = [VariableMeta(n, kinds.get(n, "continuous")) for n in names]
    return DataTable(metas, list(np.asarray(x, dtype=float).T))


def three_hubs(n, rng):
    hubs = sim.gaussian_vine_path([0.5, 0.5], n, rng)
    cols, names = [], []
    for h in range(3):
        cols.append(hubs[:, h])
        names.append(f"H{h}")
        for k in range(3):
            cols.append(0.85 * hubs[:, h] + np.sqrt(1 - 0.85 ** 2) * rng.normal(size=n))
            names.append(f"L{h}{k}")
    return np.column_stack(cols), names


class TestClusters:
    def test_star(self):
        s = first_tree([(0, 1), (0, 2), (0, 3), (0, 4)], "abcde")
        rep = analysis.extract_clusters(s, 3)
        assert [h.center for h in rep.hubs] == ["a"]
        assert rep.hubs[0].degree == 4
        assert [nb["variable"] for nb in rep.hubs[0].neighbors] == list("bcde")

    def test_path_is_empty(self):
        s = first_tree([(0, 1), (1, 2), (2, 3), (3, 4)], "abcde")
        rep = analysis.extract_clusters(s, 3)
        assert rep.hubs == []
        assert rep.to_dict() == {"min_degree": 3, "excluded": [], "hubs": []}

    def test_sorted_by_degree_then_strength(self):
        s = first_tree([(0, 1), (0, 2), (0, 3), (3, 4), (3, 5), (3, 6), (6, 7)], "abcdefgh")
        s.trees[0][1].weight = 0.9
        rep = analysis.extract_clusters(s, 2)
        assert [h.center for h in rep.hubs] == ["d", "a", "g"]

    def test_planted_three_hubs(self):
        x, names = three_hubs(2000, np.random.default_rng(0))
        u = sim.to_uniform(x)
        s = build_rvine(u, FAST, names)
        rep = analysis.extract_clusters(s, 3)
        assert sorted(h.center for h in rep.hubs) == ["H0", "H1", "H2"]

    def test_agrees_with_structure_json(self):
        x, names = three_hubs(500, np.random.default_rng(1))
        s = build_rvine(sim.to_uniform(x), FAST, names)
        doc = s.to_dict()
        rep = analysis.extract_clusters(s, 1)
        adj = {}
        for row in doc["trees"][0]:
            a, b = (doc["names"][i] for i in row["conditioned"])
            adj.setdefault(a, {})[b] = row
            adj.setdefault(b, {})[a] = row
        assert {h.center for h in rep.hubs} == set(adj)
        for h in rep.hubs:
            assert h.degree == len(adj[h.center])
            for nb in h.neighbors:
                row = adj[h.center][nb["variable"]]
                assert (nb["family"], nb["tau"], nb["weight"]) == (row["family"], row["tau"],
                                                                   row["weight"])

    def test_dot_and_text(self):
        s = first_tree([(0, 1), (0, 2), (0, 3)], ["age (y)", "b", "c", "d"])
        rep = analysis.extract_clusters(s, 3)
        (graph,) = pydot.graph_from_dot_data(rep.hubs[0].to_dot())
        assert len(graph.get_edges()) == 3
        assert "age (y) (degree 3" in rep.to_text()

    def test_no_tree(self):
        with pytest.raises(DataError):
            analysis.extract_clusters(VineStructure(["a"], []), 3)


class TestRanking:
    def test_planted_hub(self):
        x = sim.hub_gaussian(6, 1500, np.random.default_rng(2))
        r = analysis.rank_central_variables(sim.to_uniform(x), 1, FAST, list("HABCDE"))
        assert r.centers == ["H"]
        assert len(r.levels[0].neighbors) == 5
        assert r.to_text().count("\n") == 2

    @pytest.mark.parametrize("seed", range(5))
    def test_argmax_identity(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(3, 9))
        a = rng.normal(size=(d, d))
        x = rng.normal(size=(400, d)) @ a
        u = sim.to_uniform(x)
        names = [f"v{i}" for i in range(d)]
        r = analysis.rank_central_variables(u, 1, FAST, names)
        tm = np.abs(tau_matrix(u).values)
        scores = tm.sum(axis=1) - 1
        best = max(range(d), key=lambda i: (scores[i], -i))
        assert r.centers[0] == names[best]
        assert r.levels[0].score == pytest.approx(scores[best])

    def test_two_variables(self):
        rng = np.random.default_rng(3)
        u = sim.to_uniform(sim.hub_gaussian(2, 300, rng))
        r = analysis.rank_central_variables(u, None, FAST, ["b", "a"])
        assert r.centers == ["a"]

    def test_two_planted_hubs(self):
        rng = np.random.default_rng(4)
        n = 3000
        a = rng.normal(size=n)
        b = 0.8 * a + 0.6 * rng.normal(size=n)
        leaves = [0.8 * (a if i < 3 else b) + 0.6 * rng.normal(size=n) for i in range(6)]
        u = sim.to_uniform(np.column_stack([a, b] + leaves))
        names = ["Xa", "Xb"] + [f"L{i}" for i in range(6)]
        r = analysis.rank_central_variables(u, 2, FAST, names)
        assert set(r.centers) == {"Xa", "Xb"}

    def test_levels_checked(self):
        u = sim.to_uniform(sim.hub_gaussian(3, 100, np.random.default_rng(5)))
        with pytest.raises(DataError):
            analysis.rank_central_variables(u, 3, FAST)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(6)
        x = sim.hub_gaussian(5, 800, rng)
        names = list("HABCD")
        y = x.copy()
        y[:, 0] = np.exp(y[:, 0])
        y[:, 2] = y[:, 2] ** 3 + 7
        runs = []
        for data in (x, y):
            u, _ = to_pseudo_obs(table(data, names))
            runs.append(analysis.rank_central_variables(u, 3, FAST))
        assert runs[0] == runs[1]


class TestConditioned:
    def regimes(self, n=1200, seed=7):
        rng = np.random.default_rng(seed)
        g = (rng.random(n) < 0.5).astype(float)
        z = rng.normal(size=n)
        a = np.where(g == 1, z, rng.normal(size=n))
        b = np.where(g == 0, z, rng.normal(size=n))
        cols = [g, a, b] + [0.8 * z + 0.6 * rng.normal(size=n) for _ in range(3)]
        names = ["g", "A", "B", "C", "D", "E"]
        return table(np.column_stack(cols), names, {"g": "binary"})

    def test_flipped_hub(self):
        t = self.regimes()
        r1 = analysis.conditioned_ranking(t, [("g", "1")], 1, FAST)
        r0 = analysis.conditioned_ranking(t, [("g", "0")], 1, FAST)
        assert r1.centers == ["A"] and r0.centers == ["B"]
        assert r1.condition == {"g": "1"}
        assert "g" not in [v for v, _ in r1.levels[0].neighbors]

    def test_vacuous_condition(self):
        t = self.regimes()
        t = t.select(t.names[1:]).take_rows(np.ones(t.n_rows, bool))
        k = DataTable(t.metas + [VariableMeta("k", "binary")],
                      t.columns + [np.ones(t.n_rows)])
        a = analysis.conditioned_ranking(k, [("k", "1")], 2, FAST, seed=5)
        u, _ = to_pseudo_obs(t, "jitter", seed=5)
        b = analysis.rank_central_variables(u, 2, FAST)
        assert a.levels == b.levels

    def test_empty_and_small(self):
        t = self.regimes()
        with pytest.raises(DataError, match="0 rows"):
            analysis.conditioned_ranking(t, [("g", "7")], 1, FAST)
        with pytest.raises(DataError, match="at least"):
            analysis.conditioned_ranking(t, [("g", "1")], 1, FAST, min_rows=5000)

    def test_parse_condition(self):
        assert analysis.parse_condition(" sex = F ") == ("sex", "F")
        for bad in ("sex", "=1", "sex="):
            with pytest.raises(DataError):
                analysis.parse_condition(bad)

    def test_text_match(self, tmp_path):
        from vinedep.ingest import load_table
        p = tmp_path / "a.csv"
        p.write_text("grp,x\nlow,1\nhigh,2\nlow,3\n")
        t = load_table(p)
        assert analysis.condition_mask(t, [("grp", "low")]).tolist() == [True, False, True]


class TestComorbidity:
    def indicators(self, n=2000, seed=8):
        rng = np.random.default_rng(seed)
        lat = rng.normal(size=n)
        age = 50 + 10 * rng.normal(size=n)
        cols = {
            "d1": (lat + 0.4 * rng.normal(size=n) > 0.8).astype(float),
            "d2": (lat + 0.4 * rng.normal(size=n) > 0.8).astype(float),
            "d3": (rng.random(n) < 0.2).astype(float),
            "rare": (rng.random(n) < 0.004).astype(float),
            "age": age,
        }
        cols["d1copy"] = cols["d1"].copy()
        kinds = {k: "binary" for k in cols if k != "age"}
        return table(np.column_stack(list(cols.values())), list(cols), kinds)

    def test_report(self):
        t = self.indicators()
        rep, s = analysis.comorbidity_report(t, ["d1", "d2", "d3", "rare", "d1copy"], ["age"],
                                             FAST, min_degree=1)
        assert [e["variable"] for e in rep.excluded] == ["rare"]
        assert "rare" not in s.names
        pairs = {tuple(sorted((s.names[a], s.names[b]))): e for e in s.trees[0]
                 for a, b in [e.conditioned]}
        assert pairs[("d1", "d1copy")].weight == 1.0
        assert ("d1", "d2") in pairs or ("d1copy", "d2") in pairs

    def test_null_indicators_weak(self):
        rng = np.random.default_rng(9)
        x = (rng.random((2000, 5)) < 0.3).astype(float)
        names = [f"i{k}" for k in range(5)]
        t = table(x, names, {n: "binary" for n in names})
        _, s = analysis.comorbidity_report(t, names, [], FAST, min_degree=1)
        assert max(e.weight for e in s.trees[0]) < 0.06

    def test_kind_checks(self):
        t = self.indicators()
        with pytest.raises(DataError, match="not binary"):
            analysis.comorbidity_report(t, ["age"], [], FAST)
        with pytest.raises(DataError, match="covariate"):
            analysis.comorbidity_report(t, ["d1"], ["d2"], FAST)


def test_report_dict():
    s = first_tree([(0, 1), (0, 2), (0, 3)], "abcd")
    rep = analysis.extract_clusters(s, 3)
    doc = analysis.report_dict([], rep)
    assert set(doc) == {"rankings", "clusters"}
    assert doc["clusters"]["hubs"][0]["center"] == "a"
