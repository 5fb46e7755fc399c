"""Per-segment feature vectors: summary statistics of spectral trajectories.

Five parameterisations share one recipe. A segment is framed and transformed
to magnitude spectra, optionally pooled through a triangular filterbank and
optionally taken to log-DCT cepstra; each coefficient's trajectory over
frames (plus its delta and delta-delta regressions for the compact sets) is
summarised by 11 statistics. The feature sets are

- D: mel filterbank energies,
- E: linear filterbank energies,
- F: raw magnitude spectrum (statics only unless asked otherwise),
- L: linear-frequency cepstra (LFCC),
- M: mel-frequency cepstra (MFCC).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cepstral, spectral
from .errors import EmptyInputError, InsufficientFramesError
from .signal_io import Segment

TAGS = ("D", "E", "F", "L", "M")

STAT_NAMES = (
    "mean",
    "kurtosis",
    "variance",
    "skewness",
    "max",
    "min",
    "p10",
    "p25",
    "p50",
    "p75",
    "p90",
)

N_STATS = len(STAT_NAMES)

DELTA_SPAN = 4
DELTA_DELTA_SPAN = 1


@dataclass(frozen=True)
class VectorInfo:
    """Identity of one feature vector: which coefficient of which derivative.

    deriv is 0 for statics, 1 for deltas, 2 for delta-deltas. center_hz is
    the physical frequency the coefficient responds to (bin frequency for F,
    filter centre for D/E, None for cepstral sets).
    """

    tag: str
    coeff: int
    deriv: int
    center_hz: float | None

    def name(self) -> str:
        return f"{self.tag}_c{self.coeff}_d{self.deriv}"


@dataclass(frozen=True)
class RowKey:
    knee_id: str
    segment_index: int
    label: str


@dataclass
class FeatureSet:
    """Feature matrix for one parameterisation over a list of segments.

    X has one row per segment and 11 contiguous statistic columns per
    feature vector, vectors ordered statics (ascending coefficient), then
    deltas, then delta-deltas.
    """

    tag: str
    X: np.ndarray
    vectors: list[VectorInfo]
    rows: list[RowKey]
    params: dict = field(default_factory=dict)

    def columns_for(self, positions) -> np.ndarray:
        """Flat column indices of the 11-stat blocks for the given vectors."""
        cols = []
        for pos in positions:
            cols.extend(range(pos * N_STATS, pos * N_STATS + N_STATS))
        return np.asarray(cols, dtype=np.intp)

    @property
    def labels(self) -> np.ndarray:
        """Signed labels per row: abnormal -> +1, normal -> -1."""
        return np.asarray([1 if r.label == "abnormal" else -1 for r in self.rows])


def delta(series: np.ndarray, span: int) -> np.ndarray:
    """Regression-slope deltas of a trajectory, with edge replication.

    d_t = sum_u u (a_{t+u} - a_{t-u}) / (2 sum_u u^2) over u = 1..span; the
    sequence is padded by repeating the first and last element. Works on a
    1-D series or column-wise on a (T x N) matrix.
    """
    if span < 1:
        raise ValueError("span must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] < 1:
        raise EmptyInputError("empty trajectory")
    t_len = x.shape[0]
    padded = np.pad(x, ((span, span), (0, 0)), mode="edge")
    num = np.zeros_like(x)
    for u in range(1, span + 1):
        num += u * (padded[span + u : span + u + t_len] - padded[span - u : span - u + t_len])
    out = num / (2.0 * sum(u * u for u in range(1, span + 1)))
    return out[:, 0] if squeeze else out


def stats11(matrix: np.ndarray) -> np.ndarray:
    """Eleven summary statistics of every column of a (T x N) matrix.

    Returns (N x 11) in STAT_NAMES order. Moments are population moments
    (kurtosis not excess-corrected, so a normal distribution scores 3);
    percentiles interpolate linearly at rank (T-1)p/100. Zero-variance
    columns get skewness = kurtosis = 0.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a (frames x coefficients) matrix")
    if x.shape[0] < 2:
        raise InsufficientFramesError(
            f"need at least 2 frames for summary statistics, got {x.shape[0]}"
        )
    mean = x.mean(axis=0)
    dev = x - mean
    m2 = np.mean(dev * dev, axis=0)
    m3 = np.mean(dev**3, axis=0)
    m4 = np.mean(dev**4, axis=0)
    safe = np.where(m2 > 0.0, m2, 1.0)
    skew = np.where(m2 > 0.0, m3 / safe**1.5, 0.0)
    kurt = np.where(m2 > 0.0, m4 / (safe * safe), 0.0)
    pcts = np.percentile(x, [10, 25, 50, 75, 90], axis=0)
    return np.stack(
        [mean, kurt, m2, skew, x.max(axis=0), x.min(axis=0), *pcts], axis=1
    )


def _trajectory_row(matrix: np.ndarray, with_deltas: bool) -> np.ndarray:
    """Flatten the 11-stat summaries of a coefficient matrix into one row."""
    blocks = [stats11(matrix)]
    if with_deltas:
        d1 = delta(matrix, DELTA_SPAN)
        blocks.append(stats11(d1))
        blocks.append(stats11(delta(d1, DELTA_DELTA_SPAN)))
    return np.concatenate([b.ravel() for b in blocks])


def _vector_infos(tag: str, n_coeff: int, derivs: int, centers) -> list[VectorInfo]:
    infos = []
    for deriv in range(derivs):
        for c in range(n_coeff):
            center = None if centers is None else float(centers[c])
            infos.append(VectorInfo(tag, c, deriv, center))
    return infos


def build_feature_sets(
    segments: list[Segment],
    frame_ms: float,
    n_bands: int,
    tags: str = "DEFLM",
    *,
    include_full_deltas: bool = False,
) -> dict[str, FeatureSet]:
    """Compute the requested feature sets for a list of segments.

    Segments are ordered by (knee_id, index) so row order is reproducible.
    All segments must share one sample rate. F is statics-only unless
    include_full_deltas is set.
    """
    if not segments:
        raise EmptyInputError("no segments")
    for tag in tags:
        if tag not in TAGS:
            raise ValueError(f"unknown feature set {tag!r}")
    segs = sorted(segments, key=lambda s: (s.knee_id, s.index))
    rates = {s.sample_rate for s in segs}
    if len(rates) != 1:
        raise ValueError(f"segments carry mixed sample rates: {sorted(rates)}")
    fs = rates.pop()
    l_s = spectral.frame_len_samples(frame_ms, fs)
    n_bins = l_s // 2 + 1

    need_lin = any(t in tags for t in "EL")
    need_mel = any(t in tags for t in "DM")
    bank_lin = (
        spectral.make_filterbank(n_bins, l_s, fs, n_bands, "linear") if need_lin else None
    )
    bank_mel = (
        spectral.make_filterbank(n_bins, l_s, fs, n_bands, "mel") if need_mel else None
    )

    rows = [RowKey(s.knee_id, s.index, s.label) for s in segs]
    data: dict[str, list[np.ndarray]] = {t: [] for t in tags}
    for seg in segs:
        frames = spectral.enframe(seg, frame_ms)
        spec = spectral.dft_magnitude(frames)
        lam = spectral.compress(spec, bank_lin) if need_lin else None
        gam = spectral.compress(spec, bank_mel) if need_mel else None
        for tag in tags:
            if tag == "D":
                data[tag].append(_trajectory_row(gam, True))
            elif tag == "E":
                data[tag].append(_trajectory_row(lam, True))
            elif tag == "F":
                data[tag].append(_trajectory_row(spec.values, include_full_deltas))
            elif tag == "L":
                data[tag].append(_trajectory_row(cepstral.cepstra(lam), True))
            elif tag == "M":
                data[tag].append(_trajectory_row(cepstral.cepstra(gam), True))

    bin_hz = np.arange(n_bins) * (fs / l_s)
    out: dict[str, FeatureSet] = {}
    for tag in tags:
        if tag == "F":
            derivs = 3 if include_full_deltas else 1
            infos = _vector_infos(tag, n_bins, derivs, bin_hz)
        elif tag in ("D", "E"):
            bank = bank_mel if tag == "D" else bank_lin
            infos = _vector_infos(tag, n_bands, 3, bank.center_hz)
        else:
            infos = _vector_infos(tag, n_bands, 3, None)
        params = {
            "tag": tag,
            "frame_ms": float(frame_ms),
            "n_bands": int(n_bands),
            "sample_rate": int(fs),
            "frame_len": int(l_s),
            "include_full_deltas": bool(include_full_deltas),
        }
        out[tag] = FeatureSet(tag, np.vstack(data[tag]), infos, list(rows), params)
    return out


def save_feature_set(fset: FeatureSet, csv_path: str | Path) -> None:
    """Persist a feature set as CSV plus a JSON sidecar with its parameters.

    The sidecar lands next to the CSV with a .json suffix and carries the
    extraction parameters and per-vector provenance needed to reload or
    audit the matrix.
    """
    csv_path = Path(csv_path)
    names = [f"{v.name()}_{s}" for v in fset.vectors for s in STAT_NAMES]
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(["knee_id", "segment_index", "label"] + names) + "\n")
        for key, row in zip(fset.rows, fset.X):
            cells = [key.knee_id, str(key.segment_index), key.label]
            cells += [repr(float(v)) for v in row]
            fh.write(",".join(cells) + "\n")
    sidecar = {
        "params": fset.params,
        "stat_names": list(STAT_NAMES),
        "vectors": [
            {
                "tag": v.tag,
                "coeff": v.coeff,
                "deriv": v.deriv,
                "center_hz": v.center_hz,
            }
            for v in fset.vectors
        ],
    }
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_feature_set(csv_path: str | Path) -> FeatureSet:
    """Reload a feature set written by save_feature_set."""
    csv_path = Path(csv_path)
    with open(csv_path.with_suffix(".json")) as fh:
        sidecar = json.load(fh)
    vectors = [
        VectorInfo(v["tag"], v["coeff"], v["deriv"], v["center_hz"])
        for v in sidecar["vectors"]
    ]
    rows: list[RowKey] = []
    matrix: list[np.ndarray] = []
    with open(csv_path) as fh:
        header = fh.readline()
        if not header:
            raise EmptyInputError(f"{csv_path}: empty feature CSV")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            rows.append(RowKey(cells[0], int(cells[1]), cells[2]))
            matrix.append(np.asarray(cells[3:], dtype=np.float64))
    tag = sidecar["params"]["tag"]
    return FeatureSet(tag, np.vstack(matrix), vectors, rows, sidecar["params"])
