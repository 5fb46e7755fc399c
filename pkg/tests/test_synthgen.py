"""Synthetic corpus generator: determinism, class structure, file round trip."""

import numpy as np
import pytest
from scipy import signal as sps

from kneesound import signal_io, synthgen
from kneesound.synthgen import SynthSpec


def band_power_db(x, fs, lo, hi):
    f, pxx = sps.welch(x, fs=fs, nperseg=4096)
    sel = (f >= lo) & (f <= hi)
    return 10.0 * np.log10(np.mean(pxx[sel]))


def band_contrast_db(rec, lo, hi):
    """In-band density over out-of-band density.

    Absolute level is meaningless here: loading normalises RMS and the
    generator's clip protection rescales loud recordings, so the class
    difference must be read from the spectral shape.
    """
    fs = rec.sample_rate
    return band_power_db(rec.samples, fs, lo, hi) - band_power_db(
        rec.samples, fs, 1000.0, 7000.0
    )


def test_generation_deterministic():
    spec = SynthSpec(knees_per_class=2, duration_s=3.0, seed=7)
    a = synthgen.generate(spec)
    b = synthgen.generate(spec)
    assert len(a) == len(b) == 4
    for ra, rb in zip(a, b):
        assert ra.knee_id == rb.knee_id and ra.label == rb.label
        assert np.array_equal(ra.samples, rb.samples)
    c = synthgen.generate(SynthSpec(knees_per_class=2, duration_s=3.0, seed=8))
    assert not np.array_equal(a[0].samples, c[0].samples)


def test_per_class_pairs_and_ids():
    spec = SynthSpec(knees_per_class=(1, 3), duration_s=(2.0, 1.0), seed=0)
    recs = synthgen.generate(spec)
    labels = [r.label for r in recs]
    assert labels == ["normal"] + ["abnormal"] * 3
    assert [r.knee_id for r in recs] == ["n000", "a000", "a001", "a002"]
    assert recs[0].samples.shape[0] == 32_000
    assert all(r.samples.shape[0] == 16_000 for r in recs[1:])
    assert recs[0].subject_id == "subj_n000"


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(transient_hz=9000.0).validate()  # above Fs/2
    with pytest.raises(ValueError):
        SynthSpec(band_center_hz=7990.0, band_width_hz=200.0).validate()
    with pytest.raises(ValueError):
        SynthSpec(band_center_hz=50.0, band_width_hz=200.0).validate()
    with pytest.raises(ValueError):
        SynthSpec(abnormal_gain_db=-3.0).validate()
    with pytest.raises(ValueError):
        SynthSpec(stance_fraction=1.0).validate()
    with pytest.raises(ValueError):
        SynthSpec(knees_per_class=0).validate()
    with pytest.raises(ValueError):
        SynthSpec(duration_s=(5.0, -1.0)).validate()
    with pytest.raises(ValueError):
        synthgen._pair((1, 2, 3))
    SynthSpec().validate()


def test_amplitude_bounded():
    spec = SynthSpec(
        knees_per_class=1, duration_s=5.0, transient_amp=5.0, seed=3
    )
    for rec in synthgen.generate(spec):
        assert np.max(np.abs(rec.samples)) <= 0.99 + 1e-12


def test_abnormal_band_contrast_raised():
    spec = SynthSpec(knees_per_class=3, duration_s=30.0, seed=11)
    recs = synthgen.generate(spec)
    lo = spec.band_center_hz - spec.band_width_hz / 2.0
    hi = spec.band_center_hz + spec.band_width_hz / 2.0
    contrast = {
        lab: np.mean([band_contrast_db(r, lo, hi) for r in recs if r.label == lab])
        for lab in ("normal", "abnormal")
    }
    assert contrast["abnormal"] - contrast["normal"] >= 6.0


def test_zero_gain_classes_match():
    spec = SynthSpec(
        knees_per_class=3, duration_s=30.0, abnormal_gain_db=0.0,
        knee_gain_jitter_db=0.0, seed=11,
    )
    recs = synthgen.generate(spec)
    lo = spec.band_center_hz - spec.band_width_hz / 2.0
    hi = spec.band_center_hz + spec.band_width_hz / 2.0
    contrast = {
        lab: np.mean([band_contrast_db(r, lo, hi) for r in recs if r.label == lab])
        for lab in ("normal", "abnormal")
    }
    assert abs(contrast["abnormal"] - contrast["normal"]) < 1.0


def test_burst_energy_stays_inside_band():
    rng = np.random.default_rng(0)
    burst = synthgen._band_noise(rng, 48_000, 16_000, 200.0, 400.0)
    assert abs(np.sqrt(np.mean(burst**2)) - 1.0) < 1e-9
    spectrum = np.abs(np.fft.rfft(burst))
    freqs = np.fft.rfftfreq(48_000, d=1.0 / 16_000)
    outside = (freqs < 200.0) | (freqs > 400.0)
    assert np.max(spectrum[outside]) < 1e-9 * np.max(spectrum)


def test_stride_period_visible_in_envelope():
    spec = SynthSpec(knees_per_class=1, duration_s=30.0, seed=2)
    rec = synthgen.generate(spec)[0]
    fs = rec.sample_rate
    env = rec.samples**2
    env = env - env.mean()
    ac = sps.fftconvolve(env, env[::-1], mode="full")[env.size - 1 :]
    lo, hi = int(0.4 * fs), int(1.0 * fs)
    peak_lag = (lo + int(np.argmax(ac[lo:hi]))) / fs
    assert abs(peak_lag - spec.stride_period_s) / spec.stride_period_s < 0.05


def test_write_corpus_roundtrip(tmp_path):
    spec = SynthSpec(knees_per_class=2, duration_s=2.0, seed=5)
    recs = synthgen.generate(spec)
    manifest = synthgen.write_corpus(recs, tmp_path / "corpus")
    assert manifest.name == "manifest.csv"
    loaded = signal_io.load_corpus(manifest)
    assert [r.knee_id for r in loaded] == [r.knee_id for r in recs]
    assert [r.label for r in loaded] == [r.label for r in recs]
    for got, src in zip(loaded, recs):
        assert got.samples.shape == src.samples.shape
        # loading normalises level, so compare shape not amplitude
        assert abs(np.sqrt(np.mean(got.samples**2)) - 1.0) < 1e-6


def test_spec_from_dict():
    spec = synthgen.spec_from_dict(
        {"knees_per_class": [2, 4], "duration_s": 7.5, "seed": 3}
    )
    assert spec.knees_per_class == (2, 4)
    assert spec.duration_s == 7.5
    assert spec.seed == 3
    with pytest.raises(ValueError):
        synthgen.spec_from_dict({"knees": 3})
