# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled SMO kernel. Mirrors _smo_py.solve exactly; see that module for
the algorithm description. Both must stay update-for-update identical so the
two backends are interchangeable."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double SNAP = 1e-14
cdef double INF = float("inf")


def solve(object K_in, object y_in, double C, double tol, long max_iter):
    """SMO on the maximal violating pair; returns (alpha, f, iterations, gap)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] K = \
        np.ascontiguousarray(K_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] y = \
        np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] alpha = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] f = np.zeros(n)

    cdef double gap = INF
    cdef long it = 0
    cdef Py_ssize_t i, j, t
    cdef double best_up, best_low, crit, quad, step, room_i, room_j
    cdef double ci, cj, yi, yj, ki, kj

    while it < max_iter:
        # Scan for the maximal violating pair: i maximises (y - f) over the
        # set that can grow along +y, j minimises it over the set that can
        # shrink. First index wins ties, which keeps runs deterministic.
        best_up = -INF
        best_low = INF
        i = -1
        j = -1
        for t in range(n):
            crit = y[t] - f[t]
            if (y[t] > 0.0 and alpha[t] < C) or (y[t] < 0.0 and alpha[t] > 0.0):
                if crit > best_up:
                    best_up = crit
                    i = t
            if (y[t] > 0.0 and alpha[t] > 0.0) or (y[t] < 0.0 and alpha[t] < C):
                if crit < best_low:
                    best_low = crit
                    j = t
        if i < 0 or j < 0:
            gap = 0.0
            break
        gap = best_up - best_low
        if gap <= tol:
            break
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad < 1e-15:
            quad = 1e-15
        step = gap / quad
        yi = y[i]
        yj = y[j]
        room_i = (C - alpha[i]) if yi > 0.0 else alpha[i]
        room_j = alpha[j] if yj > 0.0 else (C - alpha[j])
        if room_i < step:
            step = room_i
        if room_j < step:
            step = room_j
        alpha[i] = alpha[i] + yi * step
        alpha[j] = alpha[j] - yj * step
        if alpha[i] < SNAP:
            alpha[i] = 0.0
        elif alpha[i] > C - SNAP:
            alpha[i] = C
        if alpha[j] < SNAP:
            alpha[j] = 0.0
        elif alpha[j] > C - SNAP:
            alpha[j] = C
        for t in range(n):
            f[t] = f[t] + step * (K[i, t] - K[j, t])
        it += 1
    return alpha, f, it, gap
