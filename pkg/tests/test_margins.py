import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from vinedep.errors import DataError
from vinedep.ingest import DataTable, VariableMeta
from vinedep.margins import (MarginalModel, fit_marginal, inverse_pit, pit, to_pseudo_obs)


def test_average_rank_matches_scipy():
    x = np.array([3.0, 1.0, 3.0, 2.0, 5.0, 3.0])
    u = pit(x, fit_marginal(x))
    assert np.allclose(u, stats.rankdata(x) / 7)


def test_two_ties_jitter_interval():
    x = np.array([1.0, 1.0])
    m = fit_marginal(x)
    a = pit(x, m, "jitter", seed=4)
    assert a[0] != a[1]
    assert ((a > 0) & (a < 2 / 3)).all()
    assert np.array_equal(a, pit(x, m, "jitter", seed=4))


def test_jitter_leaves_singletons():
    x = np.array([1.0, 2.0, 2.0, 3.0])
    u = pit(x, fit_marginal(x), "jitter", seed=0)
    assert u[0] == 1 / 5 and u[3] == 4 / 5
    assert (u[1:3] > 1 / 5).all() and (u[1:3] < 3 / 5).all()


def test_jitter_mean_is_average_rank():
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 2.0])
    m = fit_marginal(x)
    avg = pit(x, m)
    mean = np.mean([pit(x, m, "jitter", seed=s) for s in range(4000)], axis=0)
    assert np.abs(mean - avg).max() < 1 / 7


def test_jitter_stream_keyed_by_name():
    x = np.array([0.0, 0.0, 1.0, 1.0])
    metas = [VariableMeta("a", "binary"), VariableMeta("b", "binary")]
    t = DataTable(metas, [x, x])
    u, _ = to_pseudo_obs(t, "jitter", seed=3)
    u_b, _ = to_pseudo_obs(t.select(["b"]), "jitter", seed=3)
    assert np.array_equal(u.column("b"), u_b.column("b"))
    assert not np.array_equal(u.column("a"), u.column("b"))


def test_unseen_values():
    m = fit_marginal(np.array([1.0, 2.0, 3.0]))
    u = pit(np.array([-5.0, 1.5, 9.0]), m)
    assert np.allclose(u, [1 / 4, 1.5 / 4, 3 / 4])


def test_uniform_ranks_fixed_point():
    x = np.array([0.25, 0.5, 0.75])
    assert np.allclose(pit(x, fit_marginal(x)), x)


def test_inverse_pit_type1():
    m = fit_marginal(np.array([1.0, 2.0, 3.0, 4.0]))
    assert inverse_pit(np.array([0.5]), m).tolist() == [2.0]


def test_inverse_pit_recovers_sample():
    x = np.array([4.0, 1.0, 3.0, 2.5, 10.0])
    m = fit_marginal(x)
    assert np.array_equal(inverse_pit(pit(x, m), m), x)
    assert inverse_pit(np.array([1e-9, 1.0]), m).tolist() == [1.0, 10.0]


def test_binary_inverse_stays_on_support():
    m = fit_marginal(np.array([0.0, 1.0, 1.0]), VariableMeta("s", "binary"))
    out = inverse_pit(np.random.default_rng(0).random(500), m)
    assert set(out.tolist()) <= {0.0, 1.0}


def test_errors():
    with pytest.raises(DataError):
        fit_marginal(np.array([]))
    with pytest.raises(DataError):
        fit_marginal(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        pit(np.array([1.0]), fit_marginal(np.array([1.0])), "bogus")
    t = DataTable([VariableMeta("a")], [[1.0, np.nan]])
    with pytest.raises(DataError, match="missing"):
        to_pseudo_obs(t)


def test_degenerate_flagged():
    assert fit_marginal(np.ones(5)).diagnostics == {"degenerate": True}


def test_model_roundtrip():
    m = fit_marginal(np.array([2.0, 1.0]), VariableMeta("x", "ordinal"))
    assert MarginalModel.from_dict(m.to_dict()) == m


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=60), st.integers(0, 2**31),
       st.sampled_from(["average_rank", "jitter"]))
def test_pit_properties(values, seed, policy):
    x = np.array(values, dtype=float)
    m = fit_marginal(x)
    u = pit(x, m, policy, seed)
    n = x.size
    assert ((u > 0) & (u < 1)).all()
    # monotone: strictly larger values map strictly higher
    order = np.argsort(x, kind="stable")
    xs, us = x[order], u[order]
    for i in range(n - 1):
        if xs[i] < xs[i + 1]:
            assert us[i] < us[i + 1]
    back = inverse_pit(u, m)
    assert set(back.tolist()) <= set(values)
    if len(set(values)) == n:
        assert np.array_equal(back, x)
    if policy == "average_rank":
        assert np.allclose(u * (n + 1), stats.rankdata(x))
    else:
        assert len(set(u.tolist())) == n
