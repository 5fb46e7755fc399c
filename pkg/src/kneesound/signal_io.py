"""Loading, conditioning and segmenting knee-sound recordings.

A corpus is described by a manifest CSV with columns
``path,knee_id,subject_id,label`` where label is ``normal`` or ``abnormal``.
Recordings are mono float arrays in [-1, 1]; the conditioning chain is
resample -> RMS normalise -> fixed-length segmentation.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import DegenerateSignalError, EmptyInputError, WavFormatError

LABELS = ("normal", "abnormal")

DEFAULT_RATE = 16_000
DEFAULT_SEGMENT_S = 20.0


@dataclass
class Recording:
    """One continuous mono recording from a single knee."""

    samples: np.ndarray
    sample_rate: int
    knee_id: str
    subject_id: str
    label: str

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Segment:
    """A fixed-duration slice of a recording, the unit that gets classified."""

    samples: np.ndarray
    sample_rate: int
    knee_id: str
    label: str
    index: int


def _decode_pcm(raw: bytes, sampwidth: int, n_channels: int) -> np.ndarray:
    if sampwidth == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64)
        scale = 2.0**15
    elif sampwidth == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        data = ((val ^ 0x800000) - 0x800000).astype(np.float64)  # sign extend
        scale = 2.0**23
    elif sampwidth == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64)
        scale = 2.0**31
    else:
        raise WavFormatError(f"unsupported sample width: {sampwidth*8} bit")
    if n_channels > 1:
        data = data.reshape(-1, n_channels)[:, 0].copy()
    return data / scale


def load_wav(
    path: str | Path,
    *,
    knee_id: str = "",
    subject_id: str = "",
    label: str = "normal",
) -> Recording:
    """Read a PCM WAV file into a mono Recording scaled to [-1, 1].

    16/24/32-bit integer PCM is accepted; multi-channel files keep only the
    first channel. Raises WavFormatError for anything else and
    EmptyInputError for zero-length payloads.
    """
    if label not in LABELS:
        raise ValueError(f"label must be one of {LABELS}, got {label!r}")
    try:
        with wave.open(str(path), "rb") as wf:
            n_frames = wf.getnframes()
            rate = wf.getframerate()
            width = wf.getsampwidth()
            channels = wf.getnchannels()
            raw = wf.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if n_frames == 0:
        raise EmptyInputError(f"{path}: empty WAV payload")
    samples = _decode_pcm(raw, width, channels)
    return Recording(samples, rate, knee_id, subject_id, label)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write a mono float array in [-1, 1] as 16-bit PCM."""
    x = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(x * 2.0**15), -(2.0**15), 2.0**15 - 1).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())


def resample(rec: Recording, target_rate: int = DEFAULT_RATE) -> Recording:
    """Polyphase resampling to target_rate (no-op when rates already match).

    Uses a windowed-sinc (Kaiser) anti-aliasing filter whose stopband sits
    more than 40 dB down, so spectral images from rate conversion stay
    below the corpus noise floor.
    """
    if rec.sample_rate == target_rate:
        return rec
    ratio = Fraction(target_rate, rec.sample_rate)
    out = resample_poly(rec.samples, ratio.numerator, ratio.denominator)
    return replace(rec, samples=out, sample_rate=target_rate)


def rms_normalize(rec: Recording) -> Recording:
    """Scale a recording to unit RMS. Idempotent up to float rounding."""
    x = rec.samples
    rms = float(np.sqrt(np.mean(np.square(x)))) if len(x) else 0.0
    if rms == 0.0:
        raise DegenerateSignalError(f"{rec.knee_id or 'recording'}: zero RMS, cannot normalise")
    return replace(rec, samples=x / rms)


def segment(rec: Recording, segment_s: float = DEFAULT_SEGMENT_S) -> list[Segment]:
    """Chop a recording into consecutive segment_s-long pieces.

    The trailing remainder shorter than segment_s is dropped; a recording
    shorter than one segment yields an empty list.
    """
    if segment_s <= 0:
        raise ValueError("segment_s must be positive")
    seg_len = int(round(segment_s * rec.sample_rate))
    count = len(rec.samples) // seg_len
    return [
        Segment(
            samples=rec.samples[j * seg_len : (j + 1) * seg_len],
            sample_rate=rec.sample_rate,
            knee_id=rec.knee_id,
            label=rec.label,
            index=j,
        )
        for j in range(count)
    ]


def read_manifest(path: str | Path) -> list[dict[str, str]]:
    """Parse a corpus manifest CSV into row dicts, validating labels."""
    rows: list[dict[str, str]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"path", "knee_id", "subject_id", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise WavFormatError(f"{path}: manifest needs columns {sorted(required)}")
        for row in reader:
            if row["label"] not in LABELS:
                raise ValueError(f"{path}: bad label {row['label']!r} for {row['path']}")
            rows.append(row)
    if not rows:
        raise EmptyInputError(f"{path}: manifest lists no recordings")
    return rows


def write_manifest(path: str | Path, rows: list[dict[str, str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["path", "knee_id", "subject_id", "label"])
        writer.writeheader()
        writer.writerows(rows)


def load_corpus(
    manifest_path: str | Path,
    *,
    target_rate: int = DEFAULT_RATE,
    normalize: bool = True,
) -> list[Recording]:
    """Load every manifest entry, resampled (and RMS-normalised by default).

    Relative paths resolve against the manifest's directory. A knee_id
    appearing with two different labels is a corpus bug and raises.
    """
    base = Path(manifest_path).parent
    rows = read_manifest(manifest_path)
    seen: dict[str, str] = {}
    out: list[Recording] = []
    for row in rows:
        if row["knee_id"] in seen and seen[row["knee_id"]] != row["label"]:
            raise ValueError(f"knee {row['knee_id']} appears with conflicting labels")
        seen[row["knee_id"]] = row["label"]
        wav_path = Path(row["path"])
        if not wav_path.is_absolute():
            wav_path = base / wav_path
        rec = load_wav(
            wav_path,
            knee_id=row["knee_id"],
            subject_id=row["subject_id"],
            label=row["label"],
        )
        rec = resample(rec, target_rate)
        if normalize:
            rec = rms_normalize(rec)
        out.append(rec)
    return out


def segment_corpus(
    recordings: list[Recording], segment_s: float = DEFAULT_SEGMENT_S
) -> list[Segment]:
    """Segment every recording, concatenating per-knee segment lists.

    Segment indices continue across multiple recordings of the same knee so
    (knee_id, index) stays a unique key.
    """
    if not recordings:
        raise EmptyInputError("no recordings to segment")
    next_index: dict[str, int] = {}
    segments: list[Segment] = []
    for rec in recordings:
        offset = next_index.get(rec.knee_id, 0)
        pieces = segment(rec, segment_s)
        for piece in pieces:
            piece.index += offset
        next_index[rec.knee_id] = offset + len(pieces)
        segments.extend(pieces)
    return segments
