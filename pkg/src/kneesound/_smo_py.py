"""Reference SMO solver in plain numpy.

Solves the L1 soft-margin SVM dual

    max  sum(alpha) - 0.5 * (alpha*y)' K (alpha*y)
    s.t. 0 <= alpha_i <= C,  sum(alpha_i y_i) = 0

by sequential two-variable updates on the maximal violating pair. The
compiled kernel in _smo.pyx implements the identical algorithm; this module
is the import-time fallback and the ground truth the benchmark compares
against.
"""

from __future__ import annotations

import numpy as np

# Alphas within SNAP of a box bound are snapped onto it so the working-set
# masks stay exact and a vanishing step cannot stall the pair selection.
SNAP = 1e-14


def solve(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """Run SMO to a duality gap <= tol (KKT violation of the worst pair).

    K is the (n x n) kernel matrix, y the +/-1 labels as floats. Returns
    (alpha, f, iterations, gap) where f_t = sum_s alpha_s y_s K[t, s] is the
    bias-free decision value at the training points.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)
    gap = np.inf
    it = 0
    while it < max_iter:
        crit = y - f
        up = ((y > 0.0) & (alpha < C)) | ((y < 0.0) & (alpha > 0.0))
        low = ((y > 0.0) & (alpha > 0.0)) | ((y < 0.0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, crit, -np.inf)))
        j = int(np.argmin(np.where(low, crit, np.inf)))
        gap = crit[i] - crit[j]
        if gap <= tol:
            break
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad < 1e-15:
            quad = 1e-15
        step = gap / quad
        room_i = (C - alpha[i]) if y[i] > 0.0 else alpha[i]
        room_j = alpha[j] if y[j] > 0.0 else (C - alpha[j])
        step = min(step, room_i, room_j)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        for t in (i, j):
            if alpha[t] < SNAP:
                alpha[t] = 0.0
            elif alpha[t] > C - SNAP:
                alpha[t] = C
        f += step * (K[i] - K[j])
        it += 1
    return alpha, f, it, float(gap)
