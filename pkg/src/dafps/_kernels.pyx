# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled greedy refresh kernels; see ``_kernels_py`` for the contract."""

import numpy as np

from libc.math cimport sqrt


def sqdist_to_point(const double[:, ::1] X, Py_ssize_t j):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, c
    cdef double acc, diff
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        acc = 0.0
        for c in range(d):
            diff = X[i, c] - X[j, c]
            acc += diff * diff
        o[i] = acc
    return out


cdef inline long long _count_le(const double[:, ::1] nd, Py_ssize_t i, double r) nogil:
    # rows are sorted ascending: upper-bound binary search
    cdef Py_ssize_t lo = 0, hi = nd.shape[1], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if nd[i, mid] <= r:
            lo = mid + 1
        else:
            hi = mid
    return lo


def refresh(const double[:, ::1] X, Py_ssize_t j, double[::1] min_dist,
            double[::1] radius, long long[::1] omega, nd, double eps_term,
            const unsigned char[::1] selected):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, c, k = 0
    cdef double acc, diff, dist, r, score, rho
    cdef double wfd = -1.0, fill = -1.0, best_p = -1.0, best_w = -1.0
    cdef Py_ssize_t arg_p = -1, arg_w = -1
    cdef bint unit = nd is None
    cdef const double[:, ::1] table
    cdef long long w
    if not unit:
        table = nd
        k = table.shape[1]
    with nogil:
        for i in range(n):
            acc = 0.0
            for c in range(d):
                diff = X[i, c] - X[j, c]
                acc += diff * diff
            dist = sqrt(acc)
            if dist < min_dist[i]:
                min_dist[i] = dist
            if unit:
                radius[i] = 0.0
                w = 1
            else:
                r = min_dist[i] + eps_term
                rho = table[i, k - 1]
                if rho < r:
                    r = rho
                radius[i] = r
                w = _count_le(table, i, r)
            omega[i] = w
            score = w * min_dist[i]
            if score > wfd:
                wfd = score
            if min_dist[i] > fill:
                fill = min_dist[i]
            if not selected[i]:
                if min_dist[i] > best_p:
                    best_p = min_dist[i]
                    arg_p = i
                if score > best_w:
                    best_w = score
                    arg_w = i
    return arg_p, arg_w, wfd, fill
