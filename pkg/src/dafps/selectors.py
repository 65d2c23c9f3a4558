"""Training-subset selectors: DA-FPS, FPS and the clustering/random baselines.

All greedy steps break ties toward the lowest pool index, and every selector
is a pure function of its inputs and seed.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .density import DEFAULT_EPS_X, WeightState
from .knn import ParameterError

METHODS = ("random", "fps", "dafps", "kmedoidspp", "facility_sqdist", "facility_gauss")
PREFIXABLE = ("random", "kmedoidspp", "facility_sqdist", "facility_gauss")


@dataclass
class TraceRecord:
    iter: int
    chosen: int
    score: float | None
    wfd: float | None


@dataclass
class Selection:
    method: str
    params: dict
    seed: int | None
    indices: list[int]
    trace: list[TraceRecord] = field(default_factory=list)
    # weight of each pick at the moment it was chosen (DA-FPS/FPS only)
    pick_weights: list[int] | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "method": self.method,
            "params": self.params,
            "seed": self.seed,
            "indices": [int(i) for i in self.indices],
            "trace": [
                {"iter": t.iter, "chosen": t.chosen, "score": _finite_or_none(t.score), "wfd": _finite_or_none(t.wfd)}
                for t in self.trace
            ],
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc):
        trace = [TraceRecord(int(t["iter"]), int(t["chosen"]), t["score"], t["wfd"]) for t in doc.get("trace", [])]
        return cls(doc["method"], dict(doc.get("params", {})), doc.get("seed"), [int(i) for i in doc["indices"]], trace)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _pool_size(ps):
    return ps.n if hasattr(ps, "n") else int(ps)


def _check_budget(b, n):
    if not isinstance(b, (int, np.integer)) or not 1 <= b <= n:
        raise ParameterError(f"budget must satisfy 1 <= b <= n={n}, got {b}")
    return int(b)


def _check_indices(indices, n, name="initial"):
    out = [int(i) for i in indices]
    if any(not 0 <= i < n for i in out):
        raise ParameterError(f"{name} indices out of range for pool of {n}")
    if len(set(out)) != len(out):
        raise ParameterError(f"{name} indices contain duplicates")
    return out


def _random_start(n, seed, start):
    if start is not None:
        start = int(start)
        if not 0 <= start < n:
            raise ParameterError(f"start index {start} out of range")
        return start
    return int(np.random.default_rng(seed).integers(n))


def select_random(ps, b, seed=None) -> Selection:
    """Uniform draw of ``b`` distinct indices without replacement."""
    n = _pool_size(ps)
    b = _check_budget(b, n)
    idx = np.random.default_rng(seed).choice(n, size=b, replace=False)
    return Selection("random", {"b": b}, seed, [int(i) for i in idx])


def _greedy_farthest(ps, table, b, k, u, initial, eps_x, seed, start, kernels):
    n = ps.n
    b = _check_budget(b, n)
    initial = _check_indices(initial, n)
    if len(initial) > b:
        raise ParameterError(f"{len(initial)} initial indices exceed the budget {b}")
    if not isinstance(u, (int, np.integer)) or u < 0:
        raise ParameterError(f"u must be a nonnegative count, got {u!r}")
    state = WeightState(ps, table, k=k, eps_x=eps_x, kernels=kernels)
    trace, weights = [], []

    def take(j, score):
        weights.append(int(state.omega[j]) if state.selected else state.k)
        state.add(j)
        trace.append(TraceRecord(len(state.selected), j, score, state.wfd))

    if initial:
        for j in initial:
            take(j, None)
    else:
        take(_random_start(n, seed, start), None)
    while len(state.selected) < b:
        if len(state.selected) < u:
            j = state.best_plain
            score = float(state.min_dist[j])
        else:
            j = state.best_weighted
            score = float(state.omega[j] * state.min_dist[j])
        take(j, score)
    return list(state.selected), trace, weights, state


def select_fps(ps, b, start=None, seed=None, kernels=None) -> Selection:
    """Farthest point sampling: repeatedly take the point farthest from the selection."""
    idx, trace, weights, _ = _greedy_farthest(ps, None, b, 1, 0, (), 0.0, seed, start, kernels)
    params = {"b": len(idx), "start": idx[0]}
    return Selection("fps", params, seed, idx, trace, weights)


def select_dafps(ps, table, b, k=None, u=0, initial=(), eps_x=DEFAULT_EPS_X, seed=None, start=None,
                 kernels=None) -> Selection:
    """Density-aware farthest point sampling.

    After ``u`` plain farthest-point picks, each step takes the unselected point
    maximizing ``omega(x) * dist(x, L)`` with the weights refreshed after every
    pick. ``k=1`` (or ``table=None``) pins all weights to 1, which reduces the
    run to plain FPS. The trace holds the estimated weighted fill distance of
    the selection after each pick.
    """
    if table is None:
        k = 1
    k = table.k if k is None else int(k)
    if k != 1 and (table is None or not 2 <= k <= table.k or k >= ps.n):
        raise ParameterError(f"need 2 <= k < n with a table of at least k neighbors, got k={k}")
    if u >= b:
        raise ParameterError(f"u={u} must be smaller than b={b}")
    idx, trace, weights, _ = _greedy_farthest(
        ps, table if k > 1 else None, b, k, u, initial, eps_x, seed, start, kernels
    )
    params = {"b": len(idx), "k": k, "u": int(u), "eps_x": eps_x, "initial": [int(i) for i in initial],
              "start": idx[0]}
    return Selection("dafps", params, seed, idx, trace, weights)


# ---------------------------------------------------------------------------
# k-medoids++


def _sqdist_block(X, rows, cols):
    return cdist(X[rows], X[cols], "sqeuclidean")


def _assign(X, medoids):
    n = X.shape[0]
    labels = np.empty(n, dtype=np.intp)
    dist = np.empty(n)
    med = np.asarray(medoids, dtype=np.intp)
    block = max(1, 8_000_000 // max(1, len(med)))
    for s in range(0, n, block):
        e = min(n, s + block)
        sq = _sqdist_block(X, np.arange(s, e), med)
        labels[s:e] = sq.argmin(axis=1)
        dist[s:e] = np.sqrt(sq[np.arange(e - s), labels[s:e]])
    labels[med] = np.arange(len(med))
    dist[med] = 0.0
    return labels, dist


def _best_medoid(X, members):
    sq = _sqdist_block(X, members, members)
    cost = np.sqrt(sq).sum(axis=1)
    best = np.flatnonzero(cost == cost.min())
    return int(members[best].min())


def select_kmedoidspp(ps, b, seed=None, max_iters=100, fixed=()) -> Selection:
    """k-medoids with k-means++-style seeding and alternating medoid updates.

    Medoids listed in ``fixed`` are kept through seeding and updates.
    """
    X = np.ascontiguousarray(ps.points, dtype=np.float64)
    n = X.shape[0]
    b = _check_budget(b, n)
    fixed = _check_indices(fixed, n, "fixed")
    if len(fixed) > b:
        raise ParameterError("more fixed medoids than the budget")
    rng = np.random.default_rng(seed)
    medoids = list(fixed)
    trace = []
    if not medoids:
        medoids.append(int(rng.integers(n)))
        trace.append(TraceRecord(1, medoids[0], None, None))
    d2 = _sqdist_block(X, np.arange(n), np.asarray(medoids)).min(axis=1)
    taken = np.zeros(n, dtype=bool)
    taken[medoids] = True
    while len(medoids) < b:
        w = np.where(taken, 0.0, d2)
        total = w.sum()
        if total > 0:
            j = int(rng.choice(n, p=w / total))
        else:
            j = int(rng.choice(np.flatnonzero(~taken)))
        trace.append(TraceRecord(len(medoids) + 1, j, float(d2[j]), None))
        medoids.append(j)
        taken[j] = True
        np.minimum(d2, _sqdist_block(X, np.arange(n), np.array([j]))[:, 0], out=d2)

    n_fixed = len(fixed)
    for _ in range(max_iters):
        labels, _ = _assign(X, medoids)
        changed = False
        for c in range(n_fixed, len(medoids)):
            members = np.flatnonzero(labels == c)
            new = _best_medoid(X, members)
            if new != medoids[c]:
                medoids[c] = new
                changed = True
        if not changed:
            break
    params = {"b": b, "max_iters": int(max_iters), "fixed": [int(i) for i in fixed]}
    return Selection("kmedoidspp", params, seed, [int(m) for m in medoids], trace)


def medoid_cost(ps, medoids) -> float:
    """Summed distance of every point to its nearest medoid."""
    _, dist = _assign(np.ascontiguousarray(ps.points, dtype=np.float64), list(medoids))
    return float(dist.sum())


# ---------------------------------------------------------------------------
# facility location


class _Columns:
    """Column access to the squared-distance matrix, cached when it fits."""

    FULL_LIMIT = 4000

    def __init__(self, X):
        self.X = X
        n = X.shape[0]
        self.full = _sqdist_block(X, np.arange(n), np.arange(n)) if n <= self.FULL_LIMIT else None

    def sq(self, j):
        if self.full is not None:
            return self.full[:, j]
        return _sqdist_block(self.X, np.arange(self.X.shape[0]), np.array([j]))[:, 0]

    def row_sums(self):
        if self.full is not None:
            return self.full.sum(axis=0)
        n = self.X.shape[0]
        out = np.empty(n)
        block = max(1, 8_000_000 // n)
        for s in range(0, n, block):
            e = min(n, s + block)
            out[s:e] = _sqdist_block(self.X, np.arange(n), np.arange(s, e)).sum(axis=0)
        return out


def _coverage_gain(variant, gamma, cols, cur, j):
    sq = cols.sq(j)
    if variant == "sqdist":
        return float(np.maximum(cur - sq, 0.0).sum())
    sim = np.exp(-gamma * np.sqrt(sq))
    return float(np.maximum(sim - cur, 0.0).sum())


def _coverage_update(variant, gamma, cols, cur, j):
    sq = cols.sq(j)
    if variant == "sqdist":
        np.minimum(cur, sq, out=cur)
    else:
        np.maximum(cur, np.exp(-gamma * np.sqrt(sq)), out=cur)


def _facility_greedy(X, b, variant, gamma, initial, lazy):
    n = X.shape[0]
    cols = _Columns(X)
    cur = np.full(n, np.inf) if variant == "sqdist" else np.zeros(n)
    chosen = list(initial)
    taken = np.zeros(n, dtype=bool)
    gains = []
    for j in chosen:
        _coverage_update(variant, gamma, cols, cur, j)
        taken[j] = True
    if variant == "sqdist" and not chosen:
        # no finite gain yet: take the squared-distance medoid
        totals = cols.row_sums()
        j = int(np.argmin(totals))
        chosen.append(j)
        taken[j] = True
        gains.append(float(totals[j]))
        _coverage_update(variant, gamma, cols, cur, j)

    if lazy:
        heap = [(-math.inf, i, -1) for i in range(n) if not taken[i]]
        heapq.heapify(heap)
        step = 0
        while len(chosen) < b:
            neg, i, stamp = heapq.heappop(heap)
            if stamp == step:
                chosen.append(i)
                taken[i] = True
                gains.append(-neg)
                _coverage_update(variant, gamma, cols, cur, i)
                step += 1
                continue
            heapq.heappush(heap, (-_coverage_gain(variant, gamma, cols, cur, i), i, step))
    else:
        while len(chosen) < b:
            best, best_gain = -1, -math.inf
            for i in range(n):
                if taken[i]:
                    continue
                g = _coverage_gain(variant, gamma, cols, cur, i)
                if g > best_gain:
                    best, best_gain = i, g
            chosen.append(best)
            taken[best] = True
            gains.append(best_gain)
            _coverage_update(variant, gamma, cols, cur, best)
    return chosen, gains


def select_facility_location(ps, b, variant="sqdist", gamma=None, seed=None, start=None, initial=(),
                             lazy=True) -> Selection:
    """Greedy facility location.

    ``sqdist`` minimizes the summed squared distance of every point to its
    nearest selected point; ``gauss`` maximizes ``sum_x max_s exp(-gamma*|x-s|)``.
    ``start`` (or ``initial``) fixes the first picks; the greedy itself does
    not consume randomness.
    """
    X = np.ascontiguousarray(ps.points, dtype=np.float64)
    n = X.shape[0]
    b = _check_budget(b, n)
    if variant not in ("sqdist", "gauss"):
        raise ParameterError(f"unknown facility-location variant {variant!r}")
    if variant == "gauss" and not (gamma is not None and gamma > 0):
        raise ParameterError("gauss variant needs gamma > 0")
    initial = _check_indices(initial, n)
    if start is not None:
        initial = [_random_start(n, seed, start)] + [i for i in initial if i != int(start)]
    if len(initial) > b:
        raise ParameterError("more initial points than the budget")
    chosen, gains = _facility_greedy(X, b, variant, gamma, initial, lazy)
    offset = len(chosen) - len(gains)
    trace = [TraceRecord(offset + t + 1, chosen[offset + t], g, None) for t, g in enumerate(gains)]
    params = {"b": b, "variant": variant, "initial": [int(i) for i in initial]}
    if gamma is not None:
        params["gamma"] = float(gamma)
    return Selection(f"facility_{variant}", params, seed, [int(i) for i in chosen], trace)


def facility_value(ps, selected, gamma) -> float:
    """Gaussian facility-location objective of ``selected``."""
    X = np.asarray(ps.points, dtype=np.float64)
    if len(selected) == 0:
        return 0.0
    sq = _sqdist_block(X, np.arange(X.shape[0]), np.asarray(selected, dtype=np.intp))
    return float(np.exp(-gamma * np.sqrt(sq)).max(axis=1).sum())


def tune_gamma(ps, b, gamma_grid, start=None) -> dict:
    """Per-width gain curves of greedy Gaussian facility location.

    With ``start=None`` the first pick is greedy too, so every curve is
    nonincreasing. A fixed ``start`` makes the first gain the objective value
    of that single point, which may be smaller than the second gain.
    """
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ParameterError("gamma grid is empty")
    curves = {}
    for g in grid:
        sel = select_facility_location(ps, b, "gauss", gamma=g, start=start)
        gains = [t.score for t in sel.trace]
        if start is not None:
            gains.insert(0, facility_value(ps, [sel.indices[0]], g))
        curves[g] = np.array(gains)
    return curves


# ---------------------------------------------------------------------------
# FPS-prefixed hybrids


def fps_prefix_then(inner, ps, b, u, seed=None, **inner_params) -> Selection:
    """Take ``u`` points by FPS, then fill up to ``b`` with ``inner``."""
    n = ps.n
    b = _check_budget(b, n)
    if not isinstance(u, (int, np.integer)) or not 0 <= u <= b:
        raise ParameterError(f"need 0 <= u <= b, got u={u}")
    if inner not in PREFIXABLE:
        raise ParameterError(f"method {inner!r} cannot follow an FPS prefix")
    if u == 0:
        sel = run_method(inner, ps, b, seed=seed, **inner_params)
    elif u == b:
        sel = select_fps(ps, b, seed=seed)
    else:
        prefix = select_fps(ps, u, seed=seed).indices
        if inner == "random":
            rest = np.setdiff1d(np.arange(n), prefix)
            extra = np.random.default_rng(seed).choice(rest, size=b - u, replace=False)
            indices = prefix + [int(i) for i in extra]
            sel = Selection("random", {"b": b}, seed, indices)
        elif inner == "kmedoidspp":
            sel = select_kmedoidspp(ps, b, seed=seed, fixed=prefix, **inner_params)
        else:
            variant = inner.split("_", 1)[1]
            sel = select_facility_location(ps, b, variant, seed=seed, initial=prefix, **inner_params)
    params = dict(sel.params)
    params.update({"inner": inner, "u": int(u)})
    return Selection(f"fps_prefixed({inner})", params, seed, sel.indices, sel.trace)


def run_method(method, ps, b, seed=None, table=None, **params) -> Selection:
    """Dispatch on a method name; ``fps_prefixed(<inner>)`` is accepted too."""
    if method.startswith("fps_prefixed(") and method.endswith(")"):
        inner = method[len("fps_prefixed("):-1]
        u = params.pop("u", 0)
        return fps_prefix_then(inner, ps, b, u, seed=seed, **params)
    if method == "random":
        return select_random(ps, b, seed=seed)
    if method == "fps":
        return select_fps(ps, b, seed=seed, **params)
    if method == "dafps":
        return select_dafps(ps, table, b, seed=seed, **params)
    if method == "kmedoidspp":
        return select_kmedoidspp(ps, b, seed=seed, **params)
    if method == "facility_sqdist":
        return select_facility_location(ps, b, "sqdist", seed=seed, **params)
    if method == "facility_gauss":
        return select_facility_location(ps, b, "gauss", seed=seed, **params)
    raise ParameterError(f"unknown method {method!r}")


__all__ = [
    "Selection",
    "TraceRecord",
    "select_random",
    "select_fps",
    "select_dafps",
    "select_kmedoidspp",
    "select_facility_location",
    "fps_prefix_then",
    "tune_gamma",
    "facility_value",
    "medoid_cost",
    "run_method",
]
