import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dafps.data import PointSet
from dafps.knn import ParameterError, build_table, rho_k
from oracles import brute_knn


def _check(X, k, method):
    t = build_table(PointSet(X), k, method=method)
    ids, d = brute_knn(X, k)
    assert t.ids.tolist() == ids
    assert np.array_equal(t.dists, np.array(d))
    return t


@pytest.mark.parametrize("method", ["kdtree", "brute"])
def test_matches_brute_random(method):
    rng = np.random.default_rng(1)
    for n, d in [(40, 2), (60, 5), (30, 12)]:
        _check(rng.random((n, d)), 7, method)


@pytest.mark.parametrize("method", ["kdtree", "brute"])
def test_tie_order_on_grid(method):
    g = np.array([[i, j] for i in range(6) for j in range(6)], dtype=float)
    t = _check(g, 9, method)
    # the interior point (1,1) = row 7 has four neighbors at distance 1
    assert t.ids[7, :5].tolist() == [7, 1, 6, 8, 13]


def test_self_first_and_rho():
    X = np.array([[0.0], [1.0], [3.0], [7.0]])
    t = build_table(PointSet(X), 3)
    assert t.ids[:, 0].tolist() == [0, 1, 2, 3]
    assert rho_k(t, 0) == 3.0
    assert rho_k(t, 3, k=2) == 4.0
    assert t.rho(2, 1) == 0.0


def test_duplicates_break_ties_by_index():
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    t = build_table(PointSet(X), 3)
    assert t.ids.tolist()[:3] == [[0, 1, 2], [0, 1, 2], [0, 1, 2]]


def test_parameter_errors():
    X = np.zeros((5, 2))
    for k in (1, 5, 6):
        with pytest.raises(ParameterError):
            build_table(PointSet(X), k)
    with pytest.raises(ParameterError):
        build_table(PointSet(np.random.rand(10, 2)), 3, method="ball")


def test_high_dim_uses_gram_path_and_stays_exact():
    X = np.random.default_rng(2).random((80, 30))
    t_auto = build_table(PointSet(X), 6)
    t_kd = build_table(PointSet(X), 6, method="kdtree")
    assert np.array_equal(t_auto.ids, t_kd.ids)
    assert np.array_equal(t_auto.dists, t_kd.dists)


def test_table_read_only():
    t = build_table(PointSet(np.random.rand(10, 2)), 3)
    with pytest.raises(ValueError):
        t.dists[0, 0] = 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 40), st.integers(1, 4), st.integers(2, 4), st.integers(0, 2**31), st.booleans())
def test_matches_brute_property(n, d, k, seed, lattice):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, (n, d)).astype(float) if lattice else rng.random((n, d))
    _check(X, min(k, n - 1) if n > 2 else 2, "kdtree" if seed % 2 else "brute")
