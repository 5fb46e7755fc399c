"""Short-time spectral analysis: framing, windowed DFT, triangular filterbanks.

Frames are l_s samples long with 50 % overlap (hop = l_s // 2). Each frame is
weighted by a periodic Hann window and transformed to a magnitude spectrum of
K = floor(1 + l_s/2) bins. Filterbanks are N_B triangles with 50 % overlap and
unit peak, spaced uniformly on either the linear-frequency axis or the mel
axis over [0, Fs/2].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FilterbankResolutionError, FrameLengthError
from .signal_io import Segment


@dataclass
class FrameMatrix:
    """Windowless frame rows (T_f x l_s) plus the framing geometry."""

    values: np.ndarray
    frame_len: int
    hop: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass
class SpectrogramMatrix:
    """Magnitude spectra, one row per frame, K = floor(1 + l_s/2) columns."""

    values: np.ndarray
    frame_len: int
    sample_rate: int

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def bin_hz(self) -> np.ndarray:
        return np.arange(self.n_bins) * (self.sample_rate / self.frame_len)


@dataclass
class Filterbank:
    """Triangular filter weights as a (K x N_B) matrix.

    edges_hz holds the N_B + 2 breakpoints (in Hz); filter m rises from
    edges_hz[m] to a unit peak at edges_hz[m+1] and falls to edges_hz[m+2],
    linearly on the spacing axis.
    """

    weights: np.ndarray
    spacing: str
    edges_hz: np.ndarray
    sample_rate: int
    frame_len: int

    @property
    def n_bands(self) -> int:
        return self.weights.shape[1]

    @property
    def center_hz(self) -> np.ndarray:
        return self.edges_hz[1:-1]


def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann window w(j) = 0.5 - 0.5 cos(2 pi j / n)."""
    j = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * j / n)


def mel(f):
    """Hz -> mel, 2595 log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def frame_len_samples(frame_ms: float, sample_rate: int) -> int:
    return int(round(frame_ms * sample_rate / 1000.0))


def enframe(
    samples: np.ndarray | Segment,
    frame_ms: float,
    sample_rate: int | None = None,
) -> FrameMatrix:
    """Slice a signal into 50 %-overlapped frames.

    T_f = floor((N - l_s) / hop) + 1 full frames; trailing samples that do
    not fill a frame are dropped. Raises FrameLengthError when l_s < 2 or
    l_s > N.
    """
    if isinstance(samples, Segment):
        sample_rate = samples.sample_rate
        x = np.asarray(samples.samples, dtype=np.float64)
    else:
        if sample_rate is None:
            raise ValueError("sample_rate required when passing a bare array")
        x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D signal")
    l_s = frame_len_samples(frame_ms, sample_rate)
    if l_s < 2:
        raise FrameLengthError(f"frame of {frame_ms} ms is {l_s} samples, need >= 2")
    if l_s > x.shape[0]:
        raise FrameLengthError(
            f"frame of {l_s} samples exceeds signal of {x.shape[0]} samples"
        )
    hop = l_s // 2
    n_frames = (x.shape[0] - l_s) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, l_s)[:: hop][:n_frames]
    return FrameMatrix(np.ascontiguousarray(frames), l_s, hop, sample_rate)


def dft_magnitude(frames: FrameMatrix) -> SpectrogramMatrix:
    """Periodic-Hann-windowed magnitude DFT of every frame.

    Only the K = floor(1 + l_s/2) non-redundant bins of the real-input DFT
    are kept; DFT length equals the frame length (no zero padding).
    """
    window = hann_periodic(frames.frame_len)
    spec = np.abs(np.fft.rfft(frames.values * window, axis=1))
    return SpectrogramMatrix(spec, frames.frame_len, frames.sample_rate)


def make_filterbank(
    n_bins: int,
    frame_len: int,
    sample_rate: int,
    n_bands: int,
    spacing: str = "linear",
) -> Filterbank:
    """Build an N_B-triangle filterbank sampled at the DFT bin frequencies.

    Breakpoints are N_B + 2 uniform points on the spacing axis (identity or
    mel) spanning [0, Fs/2]; triangles are interpolated on that axis so mel
    filters are asymmetric in Hz. Raises FilterbankResolutionError when the
    spectral resolution cannot give every triangle at least one non-zero bin.
    """
    if spacing not in ("linear", "mel"):
        raise ValueError(f"spacing must be 'linear' or 'mel', got {spacing!r}")
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    if n_bins < n_bands + 2:
        raise FilterbankResolutionError(
            f"{n_bands} bands need at least {n_bands + 2} bins, got {n_bins}"
        )
    fwd = mel if spacing == "mel" else (lambda f: np.asarray(f, dtype=np.float64))
    inv = mel_to_hz if spacing == "mel" else (lambda a: np.asarray(a, dtype=np.float64))
    top = sample_rate / 2.0
    points = np.linspace(fwd(0.0), fwd(top), n_bands + 2)
    edges_hz = inv(points)
    bin_hz = np.arange(n_bins) * (sample_rate / frame_len)
    axis = fwd(bin_hz)

    weights = np.zeros((n_bins, n_bands))
    for m in range(n_bands):
        lo, mid, hi = points[m], points[m + 1], points[m + 2]
        rising = (axis - lo) / (mid - lo)
        falling = (hi - axis) / (hi - mid)
        weights[:, m] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    if np.any(weights.sum(axis=0) == 0.0):
        raise FilterbankResolutionError(
            f"{n_bands} {spacing} bands leave at least one empty triangle "
            f"at {n_bins} bins ({sample_rate / frame_len:.1f} Hz resolution)"
        )
    return Filterbank(weights, spacing, edges_hz, sample_rate, frame_len)


def compress(spec: SpectrogramMatrix, bank: Filterbank) -> np.ndarray:
    """Pool a magnitude spectrogram through a filterbank: (T_f x K) @ (K x N_B)."""
    if spec.n_bins != bank.weights.shape[0]:
        raise ValueError(
            f"spectrogram has {spec.n_bins} bins but filterbank expects "
            f"{bank.weights.shape[0]}"
        )
    return spec.values @ bank.weights


def filterbank_to_csv(bank: Filterbank, path: str | Path) -> None:
    """Dump filter weights, one row per DFT bin, one column per band."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_hz"] + [f"band_{m}" for m in range(bank.n_bands)])
        bin_hz = np.arange(bank.weights.shape[0]) * (bank.sample_rate / bank.frame_len)
        for k in range(bank.weights.shape[0]):
            writer.writerow([repr(float(bin_hz[k]))] + [repr(float(v)) for v in bank.weights[k]])
