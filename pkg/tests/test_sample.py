import numpy as np
import pytest
from scipy import optimize, stats

import sim
from vinedep.bicop import BicopSpec
from vinedep.dependence import kendall_tau
from vinedep.errors import DataError
from vinedep.ingest import DataTable, VariableMeta
from vinedep.margins import fit_marginal
from vinedep.sample import GENERATOR, sample_data_scale, sample_uniform, sampling_order
from vinedep.structure import FitSettings, VineEdge, VineStructure
from vinedep.vinefit import FittedVine, fit_table, fit_vine


def partial(c, i, j, given):
    idx = [i, j] + list(given)
    p = np.linalg.inv(c[np.ix_(idx, idx)])
    return -p[0, 1] / np.sqrt(p[0, 0] * p[1, 1])


def dvine_correlation(r12, r23, r34, r13_2, r24_3, r14_23):
    """Correlation matrix of a Gaussian D-vine 0-1-2-3 from its partial correlations."""
    c = np.eye(4)
    c[0, 1] = c[1, 0] = r12
    c[1, 2] = c[2, 1] = r23
    c[2, 3] = c[3, 2] = r34
    c[0, 2] = c[2, 0] = r13_2 * np.sqrt((1 - r12 ** 2) * (1 - r23 ** 2)) + r12 * r23
    c[1, 3] = c[3, 1] = r24_3 * np.sqrt((1 - r23 ** 2) * (1 - r34 ** 2)) + r23 * r34

    def gap(r):
        c[0, 3] = c[3, 0] = r
        return partial(c, 0, 3, (1, 2)) - r14_23

    def pd(r):
        c[0, 3] = c[3, 0] = r
        return np.linalg.eigvalsh(c).min() > 1e-9

    # the partial correlation is increasing in r14 over the positive definite range
    feasible = [r for r in np.linspace(-0.999, 0.999, 2000) if pd(r)]
    c[0, 3] = c[3, 0] = optimize.brentq(gap, feasible[0], feasible[-1], xtol=1e-14)
    return c


def gaussian_dvine(params, names=("a", "b", "c", "d")):
    g = lambda r: BicopSpec("Gaussian", (r,))  # noqa: E731
    r12, r23, r34, r13_2, r24_3, r14_23 = params
    trees = [[VineEdge((0, 1), (), 1, spec=g(r12)), VineEdge((1, 2), (), 1, spec=g(r23)),
              VineEdge((2, 3), (), 1, spec=g(r34))],
             [VineEdge((0, 2), (1,), 2, spec=g(r13_2)), VineEdge((1, 3), (2,), 2, spec=g(r24_3))],
             [VineEdge((0, 3), (1, 2), 3, spec=g(r14_23))]]
    s = VineStructure(list(names), trees, "dvine")
    s.resolve_parents()
    return FittedVine(s)


PARAMS = (0.6, -0.4, 0.7, 0.3, -0.5, 0.2)


def test_gaussian_dvine_correlation_oracle():
    fv = gaussian_dvine(PARAMS)
    u = sample_uniform(fv, 40000, seed=1).uniforms
    got = np.corrcoef(stats.norm.ppf(u), rowvar=False)
    want = dvine_correlation(*PARAMS)
    assert np.abs(got - want).max() < 0.02


@pytest.mark.parametrize("names", [("a", "b", "c", "d"), ("z", "y", "x", "w")])
def test_order_independent_of_names(names):
    fv = gaussian_dvine(PARAMS, names)
    u = sample_uniform(fv, 20000, seed=2).uniforms
    got = np.corrcoef(stats.norm.ppf(u), rowvar=False)
    assert np.abs(got - dvine_correlation(*PARAMS)).max() < 0.03


def test_uniform_margins_and_reproducible():
    fv = gaussian_dvine(PARAMS)
    a = sample_uniform(fv, 10000, seed=3)
    b = sample_uniform(fv, 10000, seed=3)
    assert np.array_equal(a.uniforms, b.uniforms)
    assert a.generator == GENERATOR and a.seed == 3
    for col in a.uniforms.T:
        assert stats.kstest(col, "uniform").statistic < 0.02
    assert not np.array_equal(a.uniforms, sample_uniform(fv, 10000, seed=4).uniforms)


def test_fitted_rvine_tau_roundtrip():
    x = sim.hub_gaussian(5, 3000, np.random.default_rng(5))
    x[:, 4] = np.exp(x[:, 3]) + 0.3 * x[:, 4]
    fv = fit_vine(sim.to_uniform(x), "rvine", FitSettings())
    u = sample_uniform(fv, 10000, seed=6).uniforms
    for e in fv.structure.trees[0]:
        j, k = e.conditioned
        assert abs(kendall_tau(u[:, j], u[:, k]) - e.spec.tau) < 0.04


def test_sampling_order_covers_all():
    fv = gaussian_dvine(PARAMS)
    order, owned = sampling_order(fv.structure)
    assert sorted(order) == [0, 1, 2, 3]
    assert sum(len(v) for v in owned.values()) == 6


def test_data_scale_binary_support():
    rng = np.random.default_rng(7)
    z = rng.normal(size=2000)
    s = (rng.random(2000) < 0.3).astype(float)
    metas = [VariableMeta("s", "binary"), VariableMeta("x")]
    fv = fit_table(DataTable(metas, [s, z + s]), "rvine", FitSettings(("Gaussian",)))
    batch = sample_data_scale(fv, 10000, seed=8)
    col = batch.data_scale[:, 0]
    assert set(np.unique(col)) <= {0.0, 1.0}
    assert abs(col.mean() - s.mean()) < 0.02
    assert stats.ks_2samp(batch.data_scale[:, 1], z + s).statistic < 0.03


def test_single_variable_resamples_margin():
    m = fit_marginal(np.array([1.0, 5.0, 9.0]), VariableMeta("x"))
    fv = FittedVine(VineStructure(["x"], []), [m])
    batch = sample_data_scale(fv, 300, seed=0)
    assert set(batch.data_scale[:, 0]) == {1.0, 5.0, 9.0}


def test_errors():
    fv = gaussian_dvine(PARAMS)
    with pytest.raises(DataError):
        sample_uniform(fv, 0)
    with pytest.raises(DataError, match="marginal"):
        sample_data_scale(fv, 10)
    fv.structure.trees[0][0].spec = None
    with pytest.raises(DataError):
        sample_uniform(fv, 10)
