"""Adaptive-radius kNN density estimates and the integer ball-count weights.

The weight of pool point ``x`` given a selected set ``L`` is the number of
pool points in the closed ball around ``x`` of radius

    r(x) = min(dist(x, L) + eps_x / |L|, rho_k(x))

and is ``k`` by convention when ``L`` is empty. Counts are read off the
point's sorted neighbor row, so a weight never exceeds ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _default_kernels

DEFAULT_EPS_X = 1e-9


class DegenerateRadiusError(ValueError):
    pass


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class DensityEstimate:
    value: float
    at_index: int


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in ``d`` dimensions."""
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0))


class WeightState:
    """Live per-point state of a greedy selection.

    ``table`` may be ``None`` together with ``k=1``, which pins every weight
    to 1 (the plain fill-distance regime).
    """

    def __init__(self, ps, table, k=None, eps_x=DEFAULT_EPS_X, kernels=None):
        self.X = np.ascontiguousarray(ps.points, dtype=np.float64)
        n = self.X.shape[0]
        if table is None:
            if k not in (None, 1):
                raise ValueError("a neighbor table is required for k > 1")
            self.k = 1
            self._nd = None
        else:
            self.k = table.k if k is None else int(k)
            if not 1 <= self.k <= table.k:
                raise ValueError(f"k={self.k} exceeds the table's k={table.k}")
            self._nd = None if self.k == 1 else np.ascontiguousarray(table.dists[:, : self.k])
        self.table = table
        self.eps_x = float(eps_x)
        if not self.eps_x >= 0:
            raise ValueError("eps_x must be nonnegative")
        self.kernels = kernels or _default_kernels
        self.selected: list[int] = []
        self.mask = np.zeros(n, dtype=np.uint8)
        self.min_dist = np.full(n, np.inf)
        self.radius = np.full(n, np.nan)
        self.omega = np.full(n, self.k, dtype=np.int64)
        self.best_plain = -1
        self.best_weighted = -1
        self.wfd = math.inf
        self.fill = math.inf

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def neighbor_dists(self):
        return self._nd

    def add(self, j: int):
        """Append pool index ``j`` to the selection and refresh every point."""
        j = int(j)
        if not 0 <= j < self.n:
            raise IndexError(f"index {j} out of range for pool of {self.n}")
        if self.mask[j]:
            raise ValueError(f"index {j} already selected")
        self.selected.append(j)
        self.mask[j] = 1
        eps_term = self.eps_x / len(self.selected)
        bp, bw, wfd, fill = self.kernels.refresh(
            self.X, j, self.min_dist, self.radius, self.omega, self._nd, eps_term, self.mask
        )
        self.best_plain, self.best_weighted = int(bp), int(bw)
        self.wfd, self.fill = float(wfd), float(fill)

    def scores(self):
        return self.omega * self.min_dist

    def rho(self, i) -> float:
        if self._nd is None:
            return 0.0
        return float(self._nd[i, -1])


def state_for(ps, table, selected, k=None, eps_x=DEFAULT_EPS_X, kernels=None) -> WeightState:
    """Build the weight state of ``selected`` from scratch."""
    st = WeightState(ps, table, k=k, eps_x=eps_x, kernels=kernels)
    for j in selected:
        st.add(j)
    return st


def adaptive_radius(i, state: WeightState, table=None) -> float:
    if not state.selected:
        raise ValueError("adaptive radius is undefined for an empty selection")
    r = state.min_dist[i] + state.eps_x / len(state.selected)
    return float(min(r, state.rho(i)))


def omega(i, state: WeightState, table=None) -> int:
    if not state.selected:
        return state.k
    if state.neighbor_dists is None:
        return 1
    r = adaptive_radius(i, state)
    return int(np.searchsorted(state.neighbor_dists[i], r, side="right"))


def _radius_or_raise(i, state):
    r = adaptive_radius(i, state)
    if r <= 0.0:
        raise DegenerateRadiusError(f"zero adaptive radius at point {i}")
    return r


def estimate_density_pool(i, state: WeightState, table=None, ps=None) -> DensityEstimate:
    """kNN density of the whole pool at pool point ``i``."""
    r = _radius_or_raise(i, state)
    d = state.X.shape[1]
    count = omega(i, state)
    value = count / (state.n * unit_ball_volume(d) * r**d)
    return DensityEstimate(float(value), int(i))


def selected_within(i, state: WeightState, r: float) -> int:
    sel = np.asarray(state.selected, dtype=np.intp)
    dist = np.sqrt(state.kernels.sqdist_to_point(state.X, int(i))[sel])
    return int(np.count_nonzero(dist <= r))


def estimate_density_selected(i, state: WeightState, table=None, ps=None) -> DensityEstimate:
    """kNN density of the selected set at pool point ``i``.

    Every selected point inside the closed ball is counted, including ties
    at the boundary.
    """
    r = _radius_or_raise(i, state)
    d = state.X.shape[1]
    count = selected_within(i, state, r)
    value = count / (len(state.selected) * unit_ball_volume(d) * r**d)
    return DensityEstimate(float(value), int(i))


def estimated_weight(i, state: WeightState, table=None, ps=None) -> float:
    """One minus the ratio of selected-set density to pool density at ``i``."""
    p_sel = estimate_density_selected(i, state).value
    p_pool = estimate_density_pool(i, state).value
    if p_pool == 0.0:
        raise UndefinedRatioError(f"pool density vanishes at point {i}")
    return 1.0 - p_sel / p_pool
