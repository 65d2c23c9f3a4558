"""Kernel ridge regression with Gaussian and Cauchy kernels.

Dual weights solve ``(K + lam I) alpha = y`` by Cholesky factorization. If the
factorization fails, or the solve leaves a residual above ``1e-8 * |y|``,
jitter is added to the diagonal starting at 1e-10 and growing tenfold up to
1e-6 before giving up.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

RESIDUAL_RTOL = 1e-8
JITTER_START = 1e-10
JITTER_MAX = 1e-6

GAUSSIAN_GRID = (1e-6, 1e-1)
CAUCHY_GRID = (1e-6, 1e-2)
GRID_POINTS = 6
DEFAULT_FOLDS = 5


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class Kernel:
    kind: str  # "gaussian" or "cauchy"
    width: float

    def __post_init__(self):
        if self.kind not in ("gaussian", "cauchy"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if not self.width > 0:
            raise ValueError("kernel width must be positive")

    def matrix(self, A, B):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        sq = cdist(A, B, "sqeuclidean")
        if self.kind == "gaussian":
            return np.exp(-self.width * sq)
        return 1.0 / (1.0 + sq / (self.width * self.width))


def kernel_value(kernel: Kernel, xa, xb) -> float:
    return float(kernel.matrix(np.atleast_2d(xa), np.atleast_2d(xb))[0, 0])


@dataclass
class KrrModel:
    kernel: Kernel
    train_indices: np.ndarray
    alpha: np.ndarray
    lam: float
    jitter: float = 0.0
    residual: float = 0.0
    X_train: np.ndarray | None = None


def _solve(K, y, lam):
    n = K.shape[0]
    ynorm = float(np.linalg.norm(y))
    tol = RESIDUAL_RTOL * ynorm
    jitter = 0.0
    while True:
        A = K + (lam + jitter) * np.eye(n)
        try:
            c = cho_factor(A, lower=True, check_finite=False)
            alpha = cho_solve(c, y, check_finite=False)
            # two rounds of refinement tighten the residual on ill-conditioned systems
            for _ in range(2):
                r = y - A @ alpha
                if np.linalg.norm(r) <= tol:
                    break
                alpha = alpha + cho_solve(c, r, check_finite=False)
            res = float(np.linalg.norm(A @ alpha - y))
            if np.all(np.isfinite(alpha)) and res <= tol:
                return alpha, jitter, res
        except (LinAlgError, ValueError):
            pass
        jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > JITTER_MAX * (1 + 1e-9):
            raise NumericalError(f"kernel system unsolvable even with jitter {JITTER_MAX:g}")


def krr_fit(ps, train_indices, kernel: Kernel, lam: float) -> KrrModel:
    """Fit dual weights on the labelled pool rows ``train_indices``."""
    if ps.labels is None:
        raise ValueError("pool has no labels")
    if not lam > 0:
        raise ValueError("regularization must be positive")
    idx = np.asarray(train_indices, dtype=np.intp)
    if len(np.unique(idx)) != len(idx):
        raise ValueError("training indices must be distinct")
    if idx.size == 0:
        raise ValueError("empty training set")
    Xt = ps.points[idx]
    y = ps.labels[idx]
    K = kernel.matrix(Xt, Xt)
    alpha, jitter, res = _solve(K, y, lam)
    return KrrModel(kernel, idx, alpha, float(lam), jitter, res, Xt)


def krr_predict(model: KrrModel, ps, query_indices=None):
    X = ps.points if query_indices is None else ps.points[np.asarray(query_indices, dtype=np.intp)]
    Xt = model.X_train if model.X_train is not None else ps.points[model.train_indices]
    out = np.empty(X.shape[0])
    block = max(1, 4_000_000 // max(1, Xt.shape[0]))
    for s in range(0, X.shape[0], block):
        out[s:s + block] = model.kernel.matrix(X[s:s + block], Xt) @ model.alpha
    return out


def log_grid(lo, hi, points=GRID_POINTS):
    return np.logspace(math.log10(lo), math.log10(hi), points)


def default_grid(kind):
    lo, hi = GAUSSIAN_GRID if kind == "gaussian" else CAUCHY_GRID
    g = log_grid(lo, hi)
    return g, g.copy()


def _fold_ids(m, folds, rng):
    if folds < 2 or m < folds:
        raise ValueError(f"cannot split {m} points into {folds} nonempty folds")
    perm = rng.permutation(m)
    return np.array_split(perm, folds)


def cv_scores(ps, train_indices, kind, widths, lams, folds=DEFAULT_FOLDS, seed=0):
    """Mean held-out MAE for every (width, lambda) cell, shape ``(len(widths), len(lams))``."""
    idx = np.asarray(train_indices, dtype=np.intp)
    parts = _fold_ids(len(idx), folds, np.random.default_rng(seed))
    scores = np.zeros((len(widths), len(lams)))
    for held in parts:
        mask = np.ones(len(idx), dtype=bool)
        mask[held] = False
        tr, te = idx[mask], idx[held]
        if tr.size == 0:
            raise ValueError("degenerate fold: empty training split")
        for a, w in enumerate(widths):
            kern = Kernel(kind, float(w))
            for c, lam in enumerate(lams):
                try:
                    model = krr_fit(ps, tr, kern, float(lam))
                except NumericalError:
                    scores[a, c] += math.inf
                    continue
                pred = krr_predict(model, ps, te)
                scores[a, c] += float(np.mean(np.abs(pred - ps.labels[te])))
    return scores / len(parts)


def cv_grid_search(ps, budgets, kind="gaussian", widths=None, lams=None, folds=DEFAULT_FOLDS, seed=0):
    """Pick kernel width and ridge parameter by k-fold CV on random subsets.

    For every budget (a count, or a fraction of the pool when < 1) a seeded
    random training subset is drawn and the best grid cell recorded. The
    returned pair is the geometric mean of the per-budget winners, along with
    the per-budget table ``[(budget_count, width, lam, cv_mae), ...]``.
    """
    if ps.labels is None:
        raise ValueError("pool has no labels")
    dw, dl = default_grid(kind)
    widths = dw if widths is None else np.asarray(widths, dtype=float)
    lams = dl if lams is None else np.asarray(lams, dtype=float)
    rng = np.random.default_rng(seed)
    best = []
    for budget in budgets:
        m = budget_count(budget, ps.n)
        sub = rng.choice(ps.n, size=m, replace=False)
        scores = cv_scores(ps, sub, kind, widths, lams, folds, int(rng.integers(2**31)))
        a, c = np.unravel_index(int(np.argmin(scores)), scores.shape)
        best.append((m, float(widths[a]), float(lams[c]), float(scores[a, c])))
    w = math.exp(np.mean([math.log(t[1]) for t in best]))
    lam = math.exp(np.mean([math.log(t[2]) for t in best]))
    return w, lam, best


def budget_count(budget, n) -> int:
    """Turn a budget into a point count.

    Floats in (0, 1] are fractions of the pool (floored); anything else must be
    an integral count.
    """
    if isinstance(budget, (float, np.floating)) and 0 < budget <= 1:
        # tolerance so that e.g. 0.29 * 100 floors to 29, not 28
        m = int(math.floor(float(budget) * n + 1e-9))
    elif float(budget).is_integer():
        m = int(budget)
    else:
        raise ValueError(f"budget {budget!r} is neither a fraction in (0, 1] nor a count")
    if not 1 <= m <= n:
        raise ValueError(f"budget {budget} gives {m} points for a pool of {n}")
    return m


def parse_predictions(text, n=None):
    """Parse a two-column CSV ``(pool index, predicted value)``; a header row is skipped."""
    idx, val = [], []
    for line, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise ValueError(f"line {line}: expected 2 columns, found {len(row)}")
        try:
            i, v = int(row[0]), float(row[1])
        except ValueError:
            if not idx and line == 1:
                continue
            raise ValueError(f"line {line}: malformed row {row!r}") from None
        if n is not None and not 0 <= i < n:
            raise ValueError(f"line {line}: index {i} outside pool of {n}")
        idx.append(i)
        val.append(v)
    return np.array(idx, dtype=np.intp), np.array(val)


def read_predictions(path, n=None):
    with open(path) as fh:
        return parse_predictions(fh.read(), n)


def write_predictions(indices, values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "prediction"])
    for i, v in zip(indices, values):
        w.writerow([int(i), repr(float(v))])
    return buf.getvalue()
