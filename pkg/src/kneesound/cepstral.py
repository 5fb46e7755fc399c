"""Cepstra: orthonormal DCT-II of the log filterbank energies.

The log is floored at 1e-10 so silent bands cannot produce -inf. With the
orthonormal DCT, scaling the waveform by c shifts only coefficient 0, by
log(c) * sqrt(N_B); all higher coefficients are gain-invariant.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct

LOG_FLOOR = 1e-10


def log_compress(energies: np.ndarray) -> np.ndarray:
    """Natural log with the silence floor applied element-wise."""
    return np.log(np.maximum(np.asarray(energies, dtype=np.float64), LOG_FLOOR))


def cepstra(energies: np.ndarray) -> np.ndarray:
    """Per-frame cepstra from filterbank energies (T_f x N_B in and out).

    Row-wise orthonormal DCT-II of the floored log energies. Mel-spaced
    input gives MFCCs, linear-spaced input gives LFCCs; the transform does
    not care which.
    """
    logm = log_compress(energies)
    return dct(logm, type=2, norm="ortho", axis=-1)
