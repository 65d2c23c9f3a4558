"""Pure numpy implementation of the greedy refresh kernels.

Distances everywhere in the package are accumulated coordinate by coordinate
in ascending order, ``acc += (a - b) * (a - b)``, so that this module and the
compiled one produce identical bits.
"""

import numpy as np


def sqdist_to_point(X, j):
    """Squared Euclidean distance from every row of ``X`` to row ``j``."""
    x = X[j]
    acc = np.zeros(X.shape[0])
    for c in range(X.shape[1]):
        diff = X[:, c] - x[c]
        acc += diff * diff
    return acc


def refresh(X, j, min_dist, radius, omega, nd, eps_term, selected):
    """Fold newly selected row ``j`` into the per-point greedy state.

    Updates ``min_dist``, ``radius`` and ``omega`` in place and returns
    ``(best_plain, best_weighted, wfd, fill)``: the unselected argmax of the
    nearest-selected distance, the unselected argmax of the weighted distance
    (lowest index on ties, -1 if nothing is left), the maximum weighted
    distance over all points and the maximum plain distance over all points.
    ``nd`` is the sorted neighbor-distance table or ``None`` for unit weights.
    """
    d = np.sqrt(sqdist_to_point(X, j))
    np.minimum(min_dist, d, out=min_dist)
    if nd is None:
        radius[:] = 0.0
        omega[:] = 1
    else:
        np.minimum(min_dist + eps_term, nd[:, -1], out=radius)
        omega[:] = np.count_nonzero(nd <= radius[:, None], axis=1)
    score = omega * min_dist
    wfd = float(score.max())
    fill = float(min_dist.max())
    free = ~selected.view(bool)
    if not free.any():
        return -1, -1, wfd, fill
    plain = np.where(free, min_dist, -1.0)
    weighted = np.where(free, score, -1.0)
    return int(plain.argmax()), int(weighted.argmax()), wfd, fill
