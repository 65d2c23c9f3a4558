import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dafps.data import MixtureSpec, PointSet, synth_mixture
from dafps.knn import ParameterError, build_table
from dafps.metrics import estimated_wfd, fill_distance
from dafps.selectors import (Selection, facility_value, fps_prefix_then, medoid_cost, run_method, select_dafps,
                             select_facility_location, select_fps, select_kmedoidspp, select_random, tune_gamma)
from oracles import brute_knn
from oracles import dafps as oracle_dafps


def line(*xs):
    return PointSet(np.array(xs, dtype=float).reshape(-1, 1))


def _valid(sel, n, b):
    assert len(sel.indices) == b
    assert len(set(sel.indices)) == b
    assert all(0 <= i < n for i in sel.indices)


# random

def test_random_full_and_seeded():
    ps = PointSet(np.random.rand(9, 2))
    assert sorted(select_random(ps, 9, seed=1).indices) == list(range(9))
    assert select_random(ps, 4, seed=3).indices == select_random(ps, 4, seed=3).indices
    assert select_random(line(0), 1, seed=0).indices == [0]
    with pytest.raises(ParameterError):
        select_random(ps, 10)
    with pytest.raises(ParameterError):
        select_random(ps, 0)


# fps

def test_fps_hand_trace():
    sel = select_fps(line(0, 4, 10), 3, start=0)
    assert sel.indices == [0, 2, 1]
    assert [t.wfd for t in sel.trace] == [10.0, 4.0, 0.0]


def test_fps_full_budget_covers():
    ps = PointSet(np.random.default_rng(0).random((30, 2)))
    sel = select_fps(ps, 30, seed=0)
    assert fill_distance(ps, sel.indices) == 0.0


def test_fps_tie_goes_to_lower_index():
    assert select_fps(line(0, 10, 10, 3), 2, start=0).indices == [0, 1]
    assert select_fps(line(5, 0, 10, 10), 2, start=0).indices == [0, 1]


def test_fps_seed_picks_start():
    ps = PointSet(np.random.default_rng(0).random((50, 2)))
    start = int(np.random.default_rng(7).integers(50))
    assert select_fps(ps, 5, seed=7).indices[0] == start


# dafps

def test_dafps_hand_trace():
    ps = line(0, 1, 2, 10)
    sel = select_dafps(ps, build_table(ps, 2), 3, k=2, u=0, start=0)
    assert sel.indices == [0, 3, 2]
    assert [t.wfd for t in sel.trace] == [20.0, 4.0, 2.0]
    assert sel.trace[1].score == 20.0
    assert sel.pick_weights == [2, 2, 2]


def test_dafps_unit_weights_is_fps():
    rng = np.random.default_rng(5)
    for _ in range(5):
        ps = PointSet(rng.random((80, 3)))
        for s in range(3):
            a = select_dafps(ps, None, 20, k=1, seed=s).indices
            b = select_dafps(ps, build_table(ps, 5), 20, k=1, seed=s).indices
            assert a == b == select_fps(ps, 20, seed=s).indices


def test_dafps_uniform_phase_matches_fps():
    ps = synth_mixture(MixtureSpec(seed=2))
    table = build_table(ps, 30)
    for u in (0, 1, 10, 49):
        a = select_dafps(ps, table, 50, k=30, u=u, seed=4).indices
        f = select_fps(ps, 50, seed=4).indices
        assert a[:max(1, u)] == f[:max(1, u)]
    with pytest.raises(ParameterError):
        select_dafps(ps, table, 50, k=30, u=50)


def test_dafps_initial_set():
    ps = PointSet(np.random.default_rng(1).random((60, 2)))
    table = build_table(ps, 6)
    sel = select_dafps(ps, table, 10, k=6, initial=[3, 7])
    assert sel.indices[:2] == [3, 7]
    assert sel.trace[0].score is None
    _valid(sel, 60, 10)
    with pytest.raises(ParameterError):
        select_dafps(ps, table, 2, k=6, initial=[1, 2, 3])


def test_dafps_trace_matches_recomputed_wfd():
    ps = PointSet(np.random.default_rng(9).random((120, 2)))
    table = build_table(ps, 10)
    sel = select_dafps(ps, table, 25, k=10, seed=1)
    for j, rec in enumerate(sel.trace):
        assert rec.wfd == estimated_wfd(ps, table, sel.indices[:j + 1], k=10)
    w = [t.wfd for t in sel.trace]
    assert all(b <= a for a, b in zip(w, w[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 30), st.integers(1, 3), st.integers(2, 4), st.integers(0, 4), st.integers(0, 2**31))
def test_dafps_matches_textbook_greedy(n, d, k, u, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    k = min(k, n - 1)
    b = min(n, 6)
    u = min(u, b - 1)
    ps = PointSet(X)
    _, nd = brute_knn(X, k)
    sel = select_dafps(ps, build_table(ps, k), b, k=k, u=u, start=0)
    assert sel.indices == oracle_dafps(X.tolist(), nd, b, k, 0, u=u)


# k-medoids++

def test_kmedoids_cases():
    assert select_kmedoidspp(line(0, 1, 2), 1, seed=0).indices == [1]
    ps = PointSet(np.random.default_rng(0).random((12, 2)))
    full = select_kmedoidspp(ps, 12, seed=0)
    assert sorted(full.indices) == list(range(12))
    assert medoid_cost(ps, full.indices) == 0.0
    assert select_kmedoidspp(ps, 4, seed=5).indices == select_kmedoidspp(ps, 4, seed=5).indices


def test_kmedoids_medoids_are_exact_and_fixed_kept():
    ps = PointSet(np.random.default_rng(4).random((40, 2)))
    sel = select_kmedoidspp(ps, 4, seed=2, fixed=[0, 1])
    assert sel.indices[:2] == [0, 1]
    # every free medoid minimizes summed distance over its own cluster
    X = ps.points
    med = np.array(sel.indices)
    D = np.sqrt(((X[:, None, :] - X[med][None, :, :]) ** 2).sum(-1))
    assign = D.argmin(1)
    for c in range(2, 4):
        members = np.where(assign == c)[0]
        costs = [np.sqrt(((X[members] - X[m]) ** 2).sum(-1)).sum() for m in members]
        assert np.sqrt(((X[members] - X[med[c]]) ** 2).sum(-1)).sum() <= min(costs) + 1e-12


# facility location

def test_facility_sqdist_first_pick():
    assert select_facility_location(line(0, 1, 2), 1, "sqdist").indices == [1]


def test_facility_gauss_large_gamma_gains_one():
    ps = PointSet(np.random.default_rng(0).random((30, 2)))
    curves = tune_gamma(ps, 6, [1000.0], start=0)
    assert np.allclose(curves[1000.0], 1.0, atol=1e-6)


def test_facility_gains_match_direct_recomputation():
    ps = PointSet(np.random.default_rng(1).random((50, 2)))
    for gamma in (1000, 10, 5, 1, 0.1, 0.01):
        gains = tune_gamma(ps, 8, [gamma])[gamma]
        sel = select_facility_location(ps, 8, "gauss", gamma=gamma)
        f = [0.0] + [facility_value(ps, sel.indices[:j], gamma) for j in range(1, 9)]
        assert len(gains) == 8
        assert np.allclose(gains, np.diff(f), rtol=1e-9, atol=1e-9)
        assert np.all(gains >= -1e-12)
        assert np.all(np.diff(gains) <= 1e-9)
        fixed = tune_gamma(ps, 8, [gamma], start=0)[gamma]
        assert len(fixed) == 8 and np.all(np.diff(fixed[1:]) <= 1e-9)


def test_facility_lazy_equals_plain():
    ps = PointSet(np.random.default_rng(2).random((70, 3)))
    for variant, gamma in (("sqdist", None), ("gauss", 2.0)):
        a = select_facility_location(ps, 12, variant, gamma=gamma, start=0, lazy=True).indices
        b = select_facility_location(ps, 12, variant, gamma=gamma, start=0, lazy=False).indices
        assert a == b


def test_facility_sqdist_greedy_step_is_best():
    ps = PointSet(np.random.default_rng(3).random((25, 2)))
    X = ps.points
    sel = select_facility_location(ps, 4, "sqdist").indices

    def cost(S):
        return ((X[:, None, :] - X[list(S)][None]) ** 2).sum(-1).min(1).sum()

    for j in range(1, 4):
        best = min(cost(sel[:j] + [c]) for c in range(25) if c not in sel[:j])
        assert cost(sel[:j + 1]) == pytest.approx(best, rel=1e-12)


# FPS prefix wrappers

def test_prefix_edges():
    ps = PointSet(np.random.default_rng(0).random((6, 2)))
    assert fps_prefix_then("random", ps, 4, 0, seed=1).indices == select_random(ps, 4, seed=1).indices
    assert fps_prefix_then("kmedoidspp", ps, 4, 4, seed=1).indices == select_fps(ps, 4, seed=1).indices
    sel = fps_prefix_then("random", ps, 4, 2, seed=1)
    assert sel.indices[:2] == select_fps(ps, 2, seed=1).indices
    assert set(sel.indices[2:]) <= set(range(6)) - set(sel.indices[:2])
    _valid(sel, 6, 4)
    with pytest.raises(ParameterError):
        fps_prefix_then("dafps", ps, 4, 2)


@pytest.mark.parametrize("inner", ["random", "kmedoidspp", "facility_sqdist"])
def test_prefix_valid(inner):
    ps = PointSet(np.random.default_rng(3).random((40, 2)))
    sel = run_method(f"fps_prefixed({inner})", ps, 10, seed=2, u=3)
    _valid(sel, 40, 10)
    assert sel.indices[:3] == select_fps(ps, 3, seed=2).indices


# shared behavior

@pytest.mark.parametrize("method", ["random", "fps", "dafps", "kmedoidspp", "facility_sqdist", "facility_gauss"])
def test_methods_valid_and_deterministic(method):
    ps = PointSet(np.random.default_rng(8).random((60, 2)))
    table = build_table(ps, 5)
    params = {"k": 5} if method == "dafps" else {"gamma": 1.0} if method == "facility_gauss" else {}
    a = run_method(method, ps, 12, seed=3, table=table, **params)
    b = run_method(method, ps, 12, seed=3, table=table, **params)
    _valid(a, 60, 12)
    assert a.to_json() == b.to_json()


def test_selection_json_round_trip():
    ps = line(0, 1, 2, 10)
    sel = select_dafps(ps, build_table(ps, 2), 3, k=2, seed=0)
    back = Selection.from_json(sel.to_json())
    assert back.indices == sel.indices
    assert back.to_json() == sel.to_json()


def test_fps_two_optimal_small():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(5, 10))
        ps = PointSet(rng.random((n, 2)))
        b = int(rng.integers(1, 4))
        opt = min(fill_distance(ps, S) for S in itertools.combinations(range(n), b))
        assert fill_distance(ps, select_fps(ps, b, seed=0).indices) <= 2 * opt * (1 + 1e-12)
        assert math.isfinite(opt)
