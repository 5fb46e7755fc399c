"""Synthetic gait-sound corpora with controllable class structure.

Each recording is a stride train: a damped heel-strike transient at 0 % of
every stride and a weaker push-off transient near 60 %, over a white noise
floor. During the stance phase (the first ~60 % of the stride) a band-limited
noise burst is added; the abnormal class multiplies that burst's amplitude by
10^(gain_dB/20), so a 0 dB gain makes the classes distributionally identical.
Per-knee random gains (a few dB) model inter-subject variability so that
knee-level CV splits actually matter.

The burst is synthesised in the frequency domain (rfft support zeroed
outside the band) so its energy is exactly contained in the nominal band
rather than leaking through filter skirts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal_io import Recording, write_manifest, write_wav


def _pair(value) -> tuple:
    """Accept a scalar or a (normal, abnormal) pair for per-class fields."""
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            raise ValueError("per-class fields take a scalar or a (normal, abnormal) pair")
        return tuple(value)
    return (value, value)


@dataclass
class SynthSpec:
    """Corpus recipe. knees_per_class and duration_s accept a scalar or a
    (normal, abnormal) pair so class totals can differ."""

    knees_per_class: int | tuple = (10, 10)
    duration_s: float | tuple = 300.0
    sample_rate: int = 16_000
    stride_period_s: float = 0.7
    stride_jitter: float = 0.02
    stance_fraction: float = 0.6
    transient_hz: float = 1500.0
    transient_decay_ms: float = 4.0
    transient_amp: float = 0.5
    band_center_hz: float = 300.0
    band_width_hz: float = 200.0
    band_level_db: float = -15.0
    abnormal_gain_db: float = 12.0
    knee_gain_jitter_db: float = 3.0
    noise_floor_db: float = -40.0
    seed: int = 0

    def validate(self) -> None:
        nyq = self.sample_rate / 2.0
        if not (0 < self.transient_hz < nyq):
            raise ValueError("transient frequency must sit below Fs/2")
        if not (0 < self.band_center_hz + self.band_width_hz / 2.0 < nyq):
            raise ValueError("discriminative band must sit below Fs/2")
        if self.band_center_hz - self.band_width_hz / 2.0 < 0:
            raise ValueError("discriminative band extends below 0 Hz")
        if self.abnormal_gain_db < 0:
            raise ValueError("abnormal gain must be >= 0 dB")
        if not (0 < self.stance_fraction < 1):
            raise ValueError("stance fraction must be in (0, 1)")
        for v in (*_pair(self.knees_per_class), *_pair(self.duration_s)):
            if v <= 0:
                raise ValueError("knees per class and durations must be positive")


def _db(x: float) -> float:
    return 10.0 ** (x / 20.0)


def _damped_tone(rng, fs: int, freq: float, decay_ms: float, amp: float) -> np.ndarray:
    tau = decay_ms / 1000.0
    t = np.arange(int(round(8.0 * tau * fs))) / fs
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return amp * np.exp(-t / tau) * np.sin(2.0 * np.pi * freq * t + phase)


def _band_noise(rng, n: int, fs: int, lo_hz: float, hi_hz: float) -> np.ndarray:
    """Unit-RMS noise whose rfft support lies exactly inside [lo_hz, hi_hz]."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spectrum[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    x = np.fft.irfft(spectrum, n)
    rms = float(np.sqrt(np.mean(x * x)))
    return x / rms if rms > 0 else x


def generate_recording(spec: SynthSpec, label: str, knee_index: int) -> Recording:
    """One knee's recording, deterministic in (spec.seed, label, knee_index)."""
    spec.validate()
    cls = 0 if label == "normal" else 1
    rng = np.random.default_rng((spec.seed, cls, knee_index))
    fs = spec.sample_rate
    duration = _pair(spec.duration_s)[cls]
    n = int(round(duration * fs))

    jit = spec.knee_gain_jitter_db
    g_transient = _db(rng.uniform(-jit, jit))
    g_band = _db(rng.uniform(-jit, jit))
    g_noise = _db(rng.uniform(-jit, jit))

    x = rng.standard_normal(n) * _db(spec.noise_floor_db) * g_noise
    envelope = np.zeros(n)
    period = spec.stride_period_s
    stance = spec.stance_fraction * period
    t0 = 0.0
    while t0 < duration:
        start = int(round(t0 * fs))
        for offset, amp_scale in ((0.0, 1.0), (stance, 0.6)):
            at = int(round((t0 + offset) * fs))
            if at >= n:
                continue
            tone = _damped_tone(
                rng, fs, spec.transient_hz, spec.transient_decay_ms,
                spec.transient_amp * amp_scale * g_transient,
            )
            stop = min(n, at + tone.shape[0])
            x[at:stop] += tone[: stop - at]
        span = min(n, start + int(round(stance * fs))) - start
        if span > 1:
            envelope[start : start + span] += 0.5 - 0.5 * np.cos(
                2.0 * np.pi * np.arange(span) / span
            )
        t0 += period * (1.0 + spec.stride_jitter * rng.standard_normal())

    level = _db(spec.band_level_db) * g_band
    if label == "abnormal":
        level *= _db(spec.abnormal_gain_db)
    burst = _band_noise(
        rng, n, fs,
        spec.band_center_hz - spec.band_width_hz / 2.0,
        spec.band_center_hz + spec.band_width_hz / 2.0,
    )
    x += level * envelope * burst

    peak = float(np.max(np.abs(x)))
    if peak > 0.99:
        x *= 0.99 / peak
    knee_id = f"{label[0]}{knee_index:03d}"
    return Recording(x, fs, knee_id, f"subj_{knee_id}", label)


def generate(spec: SynthSpec) -> list[Recording]:
    """The full corpus: normal knees first, then abnormal."""
    spec.validate()
    n_normal, n_abnormal = _pair(spec.knees_per_class)
    out = [generate_recording(spec, "normal", k) for k in range(int(n_normal))]
    out += [generate_recording(spec, "abnormal", k) for k in range(int(n_abnormal))]
    return out


def write_corpus(recordings: list[Recording], out_dir: str | Path) -> Path:
    """Write per-knee WAVs plus the manifest CSV; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in recordings:
        name = f"{rec.knee_id}.wav"
        write_wav(out_dir / name, rec.samples, rec.sample_rate)
        rows.append(
            {
                "path": name,
                "knee_id": rec.knee_id,
                "subject_id": rec.subject_id,
                "label": rec.label,
            }
        )
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest


def spec_from_dict(payload: dict) -> SynthSpec:
    """Build a SynthSpec from parsed JSON, rejecting unknown keys."""
    known = set(SynthSpec.__dataclass_fields__)
    extra = set(payload) - known
    if extra:
        raise ValueError(f"unknown synth spec fields: {sorted(extra)}")
    coerced = {
        k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()
    }
    return SynthSpec(**coerced)
