import numpy as np
import pytest

import sim
from vinedep import serialize
from vinedep.bicop import BicopSpec
from vinedep.errors import DataError
from vinedep.ingest import DataTable, VariableMeta
from vinedep.structure import FitSettings, VineEdge, VineStructure, validate_structure
from vinedep.vinefit import (FittedVine, fit_table, fit_vine, model_criteria, propagate,
                             refit_structure, vine_loglik)

FAST = FitSettings(families=("Gaussian", "Clayton", "Frank"))


def three_var_vine():
    b = BicopSpec
    trees = [[VineEdge((0, 1), (), 1, spec=b("Clayton", (1.5,))),
              VineEdge((1, 2), (), 1, spec=b("Gaussian", (0.5,)))],
             [VineEdge((0, 2), (1,), 2, spec=b("Frank", (3.0,)))]]
    s = VineStructure(["a", "b", "c"], trees)
    s.resolve_parents()
    return FittedVine(s)


def gauss_data(n=600, seed=0):
    x = sim.gaussian_vine_path([0.7, 0.5, 0.6], n, np.random.default_rng(seed))
    return sim.to_uniform(x)


def test_independence_vine_is_zero():
    trees = [[VineEdge((0, 1), (), 1, spec=BicopSpec("Independence")),
              VineEdge((1, 2), (), 1, spec=BicopSpec("Independence"))],
             [VineEdge((0, 2), (1,), 2, spec=BicopSpec("Independence"))]]
    s = VineStructure(list("abc"), trees)
    s.resolve_parents()
    fv = FittedVine(s, n=100)
    u = np.random.default_rng(0).random((100, 3))
    assert vine_loglik(fv, u) == 0.0
    assert model_criteria(fv) == (0.0, 0.0)


def test_density_integrates_to_one():
    fv = three_var_vine()
    x, w = np.polynomial.legendre.leggauss(24)
    x, w = (x + 1) / 2, w / 2
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    weights = np.einsum("i,j,k->ijk", w, w, w).ravel()
    dens = np.exp(vine_loglik(fv, grid, per_row=True))
    assert (dens * weights).sum() == pytest.approx(1.0, abs=2e-2)


def test_per_row_sums_to_total():
    fv = three_var_vine()
    u = np.random.default_rng(1).random((50, 3))
    assert vine_loglik(fv, u, per_row=True).sum() == pytest.approx(vine_loglik(fv, u))


@pytest.mark.parametrize("kind", ["rvine", "cvine", "dvine"])
def test_fit_loglik_reevaluates(kind):
    u = gauss_data()
    fv = fit_vine(u, kind, FAST)
    assert validate_structure(fv.structure)
    assert fv.loglik == pytest.approx(vine_loglik(fv, u), abs=1e-6)
    k = fv.structure.n_params()
    assert fv.aic == 2 * k - 2 * fv.loglik
    assert fv.bic == pytest.approx(k * np.log(600) - 2 * fv.loglik)


def test_propagate_visits_every_edge_in_order():
    fv = three_var_vine()
    u = np.random.default_rng(2).random((20, 3))
    seen = [(e.level, e.conditioned) for e, _, _ in propagate(fv.structure, u)]
    assert seen == [(1, (0, 1)), (1, (1, 2)), (2, (0, 2))]


def test_refit_keeps_families():
    u = gauss_data(2000, 3)
    fv = fit_vine(u, "rvine", FAST)
    again = refit_structure(fv.structure, u)
    for a, b in zip(fv.structure.edges(), again.structure.edges()):
        assert (a.spec.family, a.spec.rotation) == (b.spec.family, b.spec.rotation)
        assert np.allclose(a.spec.params, b.spec.params, atol=1e-4)


def test_model_roundtrip_bytes():
    u = gauss_data()
    fv = fit_vine(u, "rvine", FAST, names=list("wxyz"))
    text = serialize.dumps(fv.to_dict())
    back = FittedVine.from_dict(serialize.loads(text))
    assert serialize.dumps(back.to_dict()) == text
    assert back.loglik == pytest.approx(vine_loglik(back, u), abs=1e-6)


def test_version_checked():
    with pytest.raises(DataError, match="version"):
        FittedVine.from_dict({"version": 99})


def test_fit_table_records_seed_and_sensitivity():
    rng = np.random.default_rng(4)
    z = rng.normal(size=300)
    metas = [VariableMeta("s", "binary"), VariableMeta("x"), VariableMeta("y")]
    t = DataTable(metas, [(z > 0).astype(float), z + rng.normal(size=300), rng.normal(size=300)])
    fv = fit_table(t, "rvine", FAST, seed=9)
    assert fv.settings["seed"] == 9
    assert fv.settings["tie_policy"] == "jitter"
    assert fv.settings["tie_sensitivity"]["max_abs_tau_diff"] >= 0.0
    assert [m.variable for m in fv.marginals] == ["s", "x", "y"]
    assert fv.structure.names == ["s", "x", "y"]
