"""Coverage objectives, prediction-error metrics and the distance/label correlation check."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .density import DEFAULT_EPS_X, state_for


@dataclass
class EvalReport:
    mae: float
    rmse: float
    maxae: float
    n_eval: int
    per_seed: list = field(default_factory=list)

    def to_dict(self):
        return {"mae": self.mae, "rmse": self.rmse, "maxae": self.maxae, "n_eval": self.n_eval,
                "per_seed": [list(r) for r in self.per_seed]}

    def to_json(self):
        return json.dumps(self.to_dict())

    def csv_row(self, method, budget, seed) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([method, budget, seed, repr(self.mae), repr(self.rmse), repr(self.maxae)])
        return buf.getvalue()


@dataclass(frozen=True)
class Correlation:
    pearson: float
    spearman: float
    n_pairs: int
    degenerate: bool = False


def _nonempty(selected):
    sel = [int(i) for i in selected]
    if not sel:
        raise ValueError("selection is empty")
    return sel


def fill_distance(ps, selected) -> float:
    """Largest distance from a pool point to its nearest selected point."""
    st = state_for(ps, None, _nonempty(selected), k=1)
    return st.fill


def estimated_wfd(ps, table, selected, k=None, eps_x=DEFAULT_EPS_X) -> float:
    """Maximum over the pool of ``omega(x) * dist(x, selected)``."""
    sel = _nonempty(selected)
    if table is None:
        k = 1
    st = state_for(ps, table if k != 1 else None, sel, k=k, eps_x=eps_x)
    return st.wfd


def eval_errors(true_labels, predicted) -> EvalReport:
    y = np.asarray(true_labels, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape[0]} labels vs {p.shape[0]} predictions")
    if y.size == 0:
        raise ValueError("nothing to evaluate")
    r = np.abs(y - p)
    return EvalReport(float(r.mean()), float(math.sqrt(np.mean(r * r))), float(r.max()), int(y.size))


def _pairs(n, max_pairs, seed):
    total = n * (n - 1) // 2
    if total <= max_pairs:
        return np.triu_indices(n, k=1)
    rng = np.random.default_rng(seed)
    # sample distinct pair ranks, then unrank into (i, j) with i < j
    ranks = np.sort(rng.choice(total, size=max_pairs, replace=False))
    # rank r belongs to row i where sum_{t<i}(n-1-t) <= r
    starts = np.cumsum(np.arange(n - 1, 0, -1)) - np.arange(n - 1, 0, -1)
    i = np.searchsorted(starts, ranks, side="right") - 1
    j = ranks - starts[i] + i + 1
    return i, j


def distance_label_correlation(ps, max_pairs=2_000_000, seed=0) -> Correlation:
    """Pearson and Spearman correlation between feature and label distances.

    Label distances are raw absolute differences. A seeded subsample of
    ``max_pairs`` pairs is used when the pool has more pairs than that.
    """
    if ps.labels is None:
        raise ValueError("labels are required")
    if ps.n < 3:
        raise ValueError("need at least 3 points")
    i, j = _pairs(ps.n, max_pairs, seed)
    diff = ps.points[i] - ps.points[j]
    feat = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    lab = np.abs(ps.labels[i] - ps.labels[j])
    if np.ptp(feat) == 0 or np.ptp(lab) == 0:
        return Correlation(math.nan, math.nan, len(feat), degenerate=True)
    pearson = float(stats.pearsonr(feat, lab)[0])
    spearman = float(stats.spearmanr(feat, lab)[0])
    return Correlation(pearson, spearman, len(feat))
