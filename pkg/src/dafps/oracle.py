"""Exhaustive reference solutions and approximation-bound checks.

Used to confirm on small pools that the DA-FPS weighted fill distance stays
within ``2k`` of the exhaustive optimum, and within the sharper
``sigma * gamma`` factor built from the weights seen along the greedy run.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .data import PointSet
from .density import DEFAULT_EPS_X, state_for
from .knn import build_table
from .metrics import estimated_wfd
from .selectors import select_dafps

MAX_SUBSETS = 1_000_000
# relative slack when comparing a greedy value against a bound built from the
# same floating-point quantities
BOUND_RTOL = 1e-12


class GuardError(ValueError):
    """Raised when exhaustive enumeration would exceed the subset budget."""


@dataclass
class BoundReport:
    n: int
    b: int
    k: int
    d: int
    seed: int
    w_greedy: float
    w_opt: float
    ratio: float
    bound_2k: float
    gamma: float
    alpha: float
    sigma: float
    holds_thm2: bool
    holds_thm3: bool

    @classmethod
    def header(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return list(astuple(self))


def _pairwise(X):
    n = X.shape[0]
    sq = np.zeros((n, n))
    for c in range(X.shape[1]):
        diff = X[:, c][:, None] - X[:, c][None, :]
        sq += diff * diff
    return np.sqrt(sq)


def _batch_wfd(dist, nd, subsets, eps_x):
    """Weighted fill distance of many equal-size subsets at once."""
    b = subsets.shape[1]
    md = dist[:, subsets].min(axis=2).T  # (S, n)
    if nd is None:
        return md.max(axis=1)
    r = np.minimum(md + eps_x / b, nd[:, -1][None, :])
    omega = (nd[None, :, :] <= r[:, :, None]).sum(axis=2)
    return (omega * md).max(axis=1)


def check_guard(n, b):
    count = math.comb(n, b)
    if count > MAX_SUBSETS:
        raise GuardError(f"exhaustive search over C({n},{b}) = {count} subsets exceeds {MAX_SUBSETS}")
    return count


def brute_optimal_wfd(ps, table, b, k=None, eps_x=DEFAULT_EPS_X, chunk=20000):
    """Exhaustive minimizer of the weighted fill distance over size-``b`` subsets.

    Returns ``(indices, value)``; among equal values the lexicographically
    smallest subset wins. ``k=1`` (or ``table=None``) gives the plain k-center
    optimum.
    """
    n = ps.n
    check_guard(n, b)
    if table is None:
        k = 1
    k = table.k if k is None else int(k)
    X = np.ascontiguousarray(ps.points, dtype=np.float64)
    dist = _pairwise(X)
    nd = None if k == 1 else np.ascontiguousarray(table.dists[:, :k])
    best_val, best_set = math.inf, None
    combos = itertools.combinations(range(n), b)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        vals = _batch_wfd(dist, nd, block.reshape(-1, b), eps_x)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_set = float(vals[i]), [int(t) for t in block[i]]
    return best_set, best_val


def _ratio(num, den):
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def _bound_inputs(ps, table, b, k, seed, eps_x):
    sel = select_dafps(ps, table, b + 1, k=k, u=0, eps_x=eps_x, seed=seed)
    opt, w_opt = brute_optimal_wfd(ps, table, b, k=k, eps_x=eps_x)
    w_greedy = estimated_wfd(ps, table, sel.indices[:b], k=k, eps_x=eps_x)
    return sel, opt, w_opt, w_greedy


def sigma_gamma(ps, table, picks, pick_weights, opt, k, eps_x=DEFAULT_EPS_X):
    """The ``gamma``, ``alpha`` and ``sigma`` factors of the weight-ratio bound.

    ``picks`` are the first ``b+1`` greedy choices and ``pick_weights`` their
    weights at selection time (``k`` for the first one).
    """
    opt_state = state_for(ps, table if k != 1 else None, opt, k=k, eps_x=eps_x)
    w_opt_at = [int(opt_state.omega[j]) for j in picks]
    gamma = max(pw / wo for pw, wo in zip(pick_weights, w_opt_at))
    alpha = 0.0
    for j in range(1, len(picks)):
        for i in range(j):
            alpha = max(alpha, pick_weights[j] / pick_weights[i])
    sigma = min(3.0, 1.0 + alpha)
    return gamma, alpha, sigma


def replay_pick_weights(ps, table, picks, k, eps_x=DEFAULT_EPS_X):
    """Weights of each pick recomputed from scratch against its prefix."""
    out = []
    for j, x in enumerate(picks):
        if j == 0:
            out.append(k)
        else:
            st = state_for(ps, table if k != 1 else None, picks[:j], k=k, eps_x=eps_x)
            out.append(int(st.omega[x]))
    return out


def check_theorem2(ps, table, b, k=None, seed=0, eps_x=DEFAULT_EPS_X) -> BoundReport:
    """DA-FPS (empty start, ``u=0``) against ``2k`` times the exhaustive optimum."""
    return check_bounds(ps, table, b, k=k, seed=seed, eps_x=eps_x)


def check_theorem3(ps, table, b, k=None, seed=0, eps_x=DEFAULT_EPS_X) -> BoundReport:
    """DA-FPS against ``sigma * gamma`` times the exhaustive optimum."""
    return check_bounds(ps, table, b, k=k, seed=seed, eps_x=eps_x)


def check_bounds(ps, table, b, k=None, seed=0, eps_x=DEFAULT_EPS_X) -> BoundReport:
    if table is None:
        k = 1
    k = table.k if k is None else int(k)
    if b + 1 > ps.n:
        raise ValueError("the weight-ratio bound needs b + 1 <= n greedy picks")
    sel, opt, w_opt, w_greedy = _bound_inputs(ps, table, b, k, seed, eps_x)
    gamma, alpha, sigma = sigma_gamma(ps, table, sel.indices, sel.pick_weights, opt, k, eps_x)
    slack = 1.0 + BOUND_RTOL
    return BoundReport(
        n=ps.n, b=b, k=k, d=ps.d, seed=seed,
        w_greedy=w_greedy, w_opt=w_opt, ratio=_ratio(w_greedy, w_opt),
        bound_2k=2.0 * k, gamma=gamma, alpha=alpha, sigma=sigma,
        holds_thm2=bool(w_greedy <= 2.0 * k * w_opt * slack),
        holds_thm3=bool(w_greedy <= sigma * gamma * w_opt * slack),
    )


def random_instance(rng, n_range=(5, 12), d=2, b_choices=(2, 3), k_choices=(2, 3)):
    """Draw one small random bound-check instance."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    b = int(rng.choice(b_choices))
    k = int(rng.choice(k_choices))
    n = max(n, b + 2, k + 1)
    pts = rng.random((n, d))
    return PointSet(pts), b, k


def sweep(trials=200, seed=0, n=None, b=None, k=None, d=2, eps_x=DEFAULT_EPS_X):
    """Run ``trials`` seeded random instances through :func:`check_bounds`."""
    rng = np.random.default_rng(seed)
    reports = []
    for t in range(trials):
        n_range = (n, n) if n is not None else (5, 12)
        b_choices = (b,) if b is not None else (2, 3)
        k_choices = (k,) if k is not None else (2, 3)
        ps, bb, kk = random_instance(rng, n_range, d, b_choices, k_choices)
        check_guard(ps.n, bb)
        table = build_table(ps, kk)
        reports.append(check_bounds(ps, table, bb, k=kk, seed=seed * 100003 + t, eps_x=eps_x))
    return reports


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BoundReport.header())
    for r in reports:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])
    return buf.getvalue()
