"""Grouping protocol, pooled cross-validation, reports and sweeps."""

import json

import jsonschema
import numpy as np
import pytest

from kneesound import experiment, signal_io, synthgen
from kneesound.errors import EvaluationError, GroupingError
from kneesound.experiment import (
    CvProtocol,
    fold_indices,
    make_groups,
    monte_carlo_lengths,
    pooled_cv,
    rep_assignments,
    run_cv,
    standardize_fold,
    write_report,
    _scale_counts,
)
from kneesound.features import build_feature_sets

from test_selection import toy_fset


def knee_pairs(n_norm, n_abn):
    return [(f"n{i:02d}", "normal") for i in range(n_norm)] + [
        (f"a{i:02d}", "abnormal") for i in range(n_abn)
    ]


def tiny_segments(knees=3, duration=4.0, segment_s=2.0, seed=1):
    spec = synthgen.SynthSpec(
        knees_per_class=(knees, knees), duration_s=duration, seed=seed
    )
    return signal_io.segment_corpus(synthgen.generate(spec), segment_s)


def test_scale_counts_exact_and_remainder():
    assert _scale_counts(19, (3, 3, 3, 5, 5)) == [3, 3, 3, 5, 5]
    assert _scale_counts(21, (3, 3, 3, 5, 5)) == [4, 4, 3, 5, 5]
    assert _scale_counts(10, (3, 3, 3, 5, 5)) == [2, 2, 2, 2, 2]
    assert _scale_counts(10, (5, 5, 5, 3, 3)) == [3, 3, 2, 1, 1]
    assert _scale_counts(0, (3, 3, 3, 5, 5)) == [0, 0, 0, 0, 0]
    for total in range(1, 40):
        assert sum(_scale_counts(total, (3, 3, 3, 5, 5))) == total


def test_make_groups_template_ratios():
    # 19 normals and 21 abnormals match the ratio template sums exactly
    groups = make_groups(knee_pairs(19, 21), seed=0)
    assert len(groups) == 5
    per_class = [
        (sum(k.startswith("n") for k in g), sum(k.startswith("a") for k in g))
        for g in groups
    ]
    assert per_class == [(3, 5), (3, 5), (3, 5), (5, 3), (5, 3)]
    flat = [k for g in groups for k in g]
    assert sorted(flat) == sorted(k for k, _ in knee_pairs(19, 21))


def test_make_groups_deterministic_and_order_free():
    knees = knee_pairs(7, 9)
    a = make_groups(knees, seed=(0, 3))
    b = make_groups(list(reversed(knees)), seed=(0, 3))
    assert a == b
    c = make_groups(knees, seed=(0, 4))
    assert a != c


def test_make_groups_rejects_degenerate_corpora():
    with pytest.raises(GroupingError):
        make_groups([("k1", "normal"), ("k2", "normal")], seed=0)
    with pytest.raises(GroupingError):
        make_groups([("k1", "normal"), ("k1", "abnormal")], seed=0)
    with pytest.raises(GroupingError):
        make_groups([("k1", "normal"), ("k2", "abnormal")], seed=0)
    with pytest.raises(GroupingError):
        make_groups([("k1", "weird"), ("k2", "abnormal")], seed=0)


def test_fold_indices_partition_and_no_straddle():
    fset = toy_fset(knees=5, segs=4)
    knees = sorted({(r.knee_id, r.label) for r in fset.rows})
    groups = make_groups(knees, seed=2)
    folds = fold_indices(fset.rows, groups)
    seen = np.concatenate([test for _, test in folds])
    assert sorted(seen) == list(range(len(fset.rows)))
    for train, test in folds:
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == len(fset.rows)
        train_knees = {fset.rows[i].knee_id for i in train}
        test_knees = {fset.rows[i].knee_id for i in test}
        assert not train_knees & test_knees


def test_rep_assignments_vary_by_repetition():
    fset = toy_fset(knees=6, segs=2)
    cv = CvProtocol(repetitions=4, master_seed=9)
    a = rep_assignments(fset.rows, cv)
    b = rep_assignments(fset.rows, cv)
    assert len(a) == 4
    for fa, fb in zip(a, b):
        for (tra, tea), (trb, teb) in zip(fa, fb):
            assert np.array_equal(tra, trb) and np.array_equal(tea, teb)
    first_tests = [tuple(folds[0][1]) for folds in a]
    assert len(set(first_tests)) > 1


def test_standardize_fold_uses_train_stats_only():
    rng = np.random.default_rng(3)
    train = rng.normal(5.0, 3.0, (50, 4))
    test = rng.normal(-2.0, 10.0, (20, 4))
    tr, te = standardize_fold(train, test)
    assert np.allclose(tr.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(tr.std(axis=0), 1.0, atol=1e-12)
    assert np.allclose(te, (test - train.mean(0)) / train.std(0), atol=1e-12)


def test_standardize_fold_constant_column():
    train = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
    test = np.column_stack([np.full(4, 9.0), np.arange(4.0)])
    tr, te = standardize_fold(train, test)
    assert np.all(tr[:, 0] == 0.0)
    assert np.all(te[:, 0] == 2.0)  # divisor forced to 1, so just centred


def test_pooled_cv_deterministic_and_fold_local(monkeypatch):
    fset = toy_fset(knees=4, segs=3)
    cv = CvProtocol(repetitions=3, master_seed=1)
    assignments = rep_assignments(fset.rows, cv)
    calls = []
    true_standardize = experiment.standardize_fold

    def spy(train_X, test_X):
        calls.append((train_X.shape[0], test_X.shape[0]))
        return true_standardize(train_X, test_X)

    monkeypatch.setattr(experiment, "standardize_fold", spy)
    per1 = pooled_cv(fset.X, fset.labels, assignments, "svm-linear")
    monkeypatch.undo()
    per2 = pooled_cv(fset.X, fset.labels, assignments, "svm-linear")
    for key in experiment.METRIC_KEYS:
        assert np.array_equal(per1[key], per2[key])
        assert per1[key].shape == (3,)
    n = len(fset.rows)
    assert len(calls) == sum(len(folds) for folds in assignments)
    assert all(tr + te == n for tr, te in calls)


def test_pooled_cv_detects_uncovered_rows():
    fset = toy_fset(knees=4, segs=2)
    cv = CvProtocol(repetitions=1)
    assignments = rep_assignments(fset.rows, cv)
    truncated = [folds[:-1] for folds in assignments]
    with pytest.raises(EvaluationError):
        pooled_cv(fset.X, fset.labels, truncated, "lda")


def test_run_cv_report_contents():
    fset = toy_fset(knees=4, segs=3, planted=(1,))
    cv = CvProtocol(repetitions=3, master_seed=5)
    report = run_cv(fset, cv, "lda", positions=[1])
    assert report.config["classifier"] == "lda"
    assert report.config["repetitions"] == 3
    assert report.config["positions"] == [1]
    assert report.config["feature_set"] == "M"
    for key in experiment.METRIC_KEYS:
        assert len(report.per_repetition[key]) == 3
    m = report.mean
    assert set(m) == {"auc", "error_rate", "f05", "mcc", "s"}
    from kneesound.metrics import s_score

    assert m["s"] == s_score(m["mcc"], m["error_rate"], m["f05"])
    assert m["auc"] > 0.9  # the planted vector separates


def test_write_report_schema_and_bytes(tmp_path):
    fset = toy_fset(knees=4, segs=2)
    report = run_cv(fset, CvProtocol(repetitions=2), "cart")
    p1, p2 = tmp_path / "r1.json", tmp_path / "r2.json"
    write_report(report, p1)
    write_report(report, p2)
    assert p1.read_bytes() == p2.read_bytes()
    payload = json.loads(p1.read_text())
    assert payload["config"]["classifier"] == "cart"
    bad = json.loads(p1.read_text())
    bad["per_repetition"]["auc"][0] = 1.5  # outside the schema's [0, 1]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, experiment.load_report_schema())
    del payload["mean"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(payload, experiment.load_report_schema())


def test_monte_carlo_lengths_properties():
    lengths = monte_carlo_lengths(20, seed=0)
    assert len(lengths) == 20
    assert len(set(lengths)) == 20
    assert lengths == sorted(lengths)
    assert all(2 <= v <= 700 and not 20 <= v <= 100 for v in lengths)
    assert monte_carlo_lengths(20, seed=0) == lengths
    assert monte_carlo_lengths(20, seed=1) != lengths


def test_sweep_framelen_smoke():
    segs = tiny_segments()
    cv = CvProtocol(repetitions=2)
    out = experiment.sweep_framelen(segs, cv, tags="M", grid=(20, 24), n_bands=8)
    assert sorted(out["M"]) == [20, 24]
    for frame_ms, report in out["M"].items():
        assert report.config["params"]["frame_ms"] == float(frame_ms)
        assert report.winning_subset is not None
        assert len(report.winning_subset["members"]) >= 1
        assert 0.0 <= report.mean["auc"] <= 1.0


def test_local_search_picks_best_per_classifier():
    segs = tiny_segments()
    cv = CvProtocol(repetitions=2)
    out = experiment.local_search(
        segs, cv, {"M": 21}, width=1, classifiers=("svm-linear", "lda"), n_bands=8
    )
    assert set(out["M"]) == {"svm-linear", "lda"}
    for name, report in out["M"].items():
        assert report is not None
        assert report.config["classifier"] == name
        assert report.config["frame_ms"] in (20, 21, 22)


def test_sweep_nbands_smoke():
    segs = tiny_segments()
    cv = CvProtocol(repetitions=2)
    out = experiment.sweep_nbands(segs, cv, tags="D", grid=(6, 8))
    assert sorted(out["D"]) == [6, 8]
    for nb, report in out["D"].items():
        assert report.config["params"]["n_bands"] == nb
        assert report.config["params"]["frame_ms"] == float(
            experiment.TABLE_FRAME_MS["D"]
        )


def test_sweep_monte_carlo_smoke():
    segs = tiny_segments()
    cv = CvProtocol(repetitions=2)
    out = experiment.sweep_monte_carlo(segs, cv, tags="M", n_draws=2, n_bands=8)
    drawn = sorted(out["M"])
    assert drawn == monte_carlo_lengths(2, seed=0)
    for frame_ms, report in out["M"].items():
        assert report.config["params"]["frame_ms"] == float(frame_ms)
