"""Exact k-nearest-neighbor tables over a point pool.

Candidates come from a kd-tree (``d <= 20``) or from blocked Gram-matrix
distances (``d > 20``). Either way every candidate distance is then recomputed
with the package's sequential accumulation and rows are ordered by
``(squared distance, index)``, so both paths give identical tables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

KDTREE_MAX_DIM = 20

# a candidate list is trusted only if the first excluded candidate is farther
# than the k-th exact distance by more than this relative margin
_SLACK = 1e-9


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborTable:
    """Per-point sorted neighbor ids and Euclidean distances, self first."""

    k: int
    ids: np.ndarray
    dists: np.ndarray

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    def rho(self, i, k=None) -> float:
        k = self.k if k is None else k
        if not 1 <= k <= self.k:
            raise ParameterError(f"rho order {k} outside 1..{self.k}")
        return float(self.dists[i, k - 1])


def default_threads():
    env = os.environ.get("DAFPS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _exact_sq(X, rows, cand):
    """Sequential squared distances between ``X[rows]`` and ``X[cand]``."""
    acc = np.zeros(cand.shape)
    for c in range(X.shape[1]):
        diff = X[cand, c] - X[rows, c][:, None]
        acc += diff * diff
    return acc


def _rank(sq, cand, k):
    """Order each row by (squared distance, index) and keep the first k."""
    by_id = np.argsort(cand, axis=1, kind="stable")
    cand = np.take_along_axis(cand, by_id, axis=1)
    sq = np.take_along_axis(sq, by_id, axis=1)
    order = np.argsort(sq, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(cand, order, axis=1), np.take_along_axis(sq, order, axis=1)


def _full_row(X, i, k):
    sq = _exact_sq(X, np.array([i]), np.arange(X.shape[0])[None, :])[0]
    order = np.lexsort((np.arange(X.shape[0]), sq))[:k]
    return order, sq[order]


def _finish(X, rows, cand, cand_sq_est, k, ids, sq_out):
    """Exact re-ranking of candidate rows; returns rows needing a full scan."""
    exact = _exact_sq(X, rows, cand)
    top_ids, top_sq = _rank(exact, cand, k)
    ids[rows] = top_ids
    sq_out[rows] = top_sq
    if cand.shape[1] == X.shape[0]:
        return np.empty(0, dtype=np.intp)
    # the nearest excluded point is no closer than the last candidate estimate
    kth = top_sq[:, -1]
    bound = cand_sq_est.max(axis=1)
    unsafe = bound <= kth * (1.0 + _SLACK) + 1e-300
    return rows[unsafe]


def _kdtree_candidates(X, k, extra, workers):
    tree = cKDTree(X)
    m = min(k + extra, X.shape[0])
    dist, idx = tree.query(X, k=m, workers=workers)
    return idx.astype(np.intp), dist * dist


def _gram_candidates(X, k, extra):
    n = X.shape[0]
    block = max(1, 20_000_000 // n)
    m = min(k + extra, n)
    norms = np.einsum("ij,ij->i", X, X)
    cand = np.empty((n, m), dtype=np.intp)
    est = np.empty((n, m))
    # absolute error of ||x||^2 + ||y||^2 - 2 x.y is O(eps * (||x||^2 + ||y||^2))
    err = 64 * np.finfo(float).eps * (norms + norms.max())
    for s in range(0, n, block):
        e = min(s + block, n)
        g = norms[s:e, None] + norms[None, :] - 2.0 * (X[s:e] @ X.T)
        part = np.argpartition(g, m - 1, axis=1)[:, :m] if m < n else np.tile(np.arange(n), (e - s, 1))
        cand[s:e] = part
        # deflated so that the row maximum lower-bounds every excluded point
        est[s:e] = np.take_along_axis(g, part, axis=1) - err[s:e, None]
    return cand, est


def build_table(ps, k, method="auto", threads=None) -> NeighborTable:
    """Exact kNN for every pool point, each point being its own first neighbor.

    ``method`` is ``"auto"``, ``"kdtree"`` or ``"brute"``; auto picks the
    kd-tree up to 20 dimensions.
    """
    X = np.ascontiguousarray(ps.points if hasattr(ps, "points") else ps, dtype=np.float64)
    n, d = X.shape
    if not isinstance(k, (int, np.integer)) or k < 2 or k >= n:
        raise ParameterError(f"need 2 <= k < n, got k={k}, n={n}")
    k = int(k)
    if method == "auto":
        method = "kdtree" if d <= KDTREE_MAX_DIM else "brute"
    workers = threads or default_threads()
    extra = max(8, k // 4)
    if method == "kdtree":
        cand, est = _kdtree_candidates(X, k, extra, workers)
        # kd-tree distances may be off by an ulp; shrink the bound accordingly
        est = est * (1.0 - 4 * np.finfo(float).eps)
    elif method == "brute":
        cand, est = _gram_candidates(X, k, extra)
    else:
        raise ParameterError(f"unknown method {method!r}")

    ids = np.empty((n, k), dtype=np.intp)
    sq = np.empty((n, k))
    rows = np.arange(n)
    block = max(1, 4_000_000 // cand.shape[1])
    redo = []
    for s in range(0, n, block):
        r = rows[s:s + block]
        redo.append(_finish(X, r, cand[r], est[r], k, ids, sq))
    for i in np.concatenate(redo):
        ids[i], sq[i] = _full_row(X, i, k)
    dists = np.sqrt(sq)
    ids.flags.writeable = False
    dists.flags.writeable = False
    return NeighborTable(k, ids, dists)


def rho_k(table: NeighborTable, i, k=None) -> float:
    """Distance from pool point ``i`` to its k-th nearest pool point (self counts)."""
    return table.rho(i, k)
