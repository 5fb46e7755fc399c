"""Cross-validation protocol, repeated-experiment loop and parameter sweeps.

Validation is knee-level: the knees are dealt into 5 groups whose
normal:abnormal ratios follow the template 3:5, 3:5, 3:5, 5:3, 5:3 (scaled
proportionally for other corpus sizes), each group serves once as the test
fold, and the test predictions of the 5 folds are pooled before any metric
is computed. The whole procedure repeats with fresh groupings, by default
100 times; repetition r always draws its grouping from seed (master_seed, r)
so every scoring or evaluation call inside one experiment sees identical
partitions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import classify, features, metrics
from .errors import EvaluationError, GroupingError
from .features import FeatureSet, RowKey

RATIO_TEMPLATE = ((3, 5), (3, 5), (3, 5), (5, 3), (5, 3))

TABLE_FRAME_MS = {"M": 49, "L": 20, "F": 23, "E": 90, "D": 21}

METRIC_KEYS = ("auc", "error_rate", "f05", "mcc")


@dataclass(frozen=True)
class CvProtocol:
    repetitions: int = 100
    master_seed: int = 0
    ratios: tuple = RATIO_TEMPLATE


def _scale_counts(total: int, template: tuple[int, ...]) -> list[int]:
    """Proportional split of `total` following `template`, remainder dealt
    round-robin in group order."""
    tsum = sum(template)
    base = [total * t // tsum for t in template]
    short = total - sum(base)
    g = 0
    while short > 0:
        base[g % len(base)] += 1
        short -= 1
        g += 1
    return base


def make_groups(knees, seed) -> list[list[str]]:
    """Deal (knee_id, label) pairs into 5 groups per the ratio template.

    Deterministic given the seed and independent of input order (ids are
    sorted before shuffling). Raises GroupingError if any group's complement
    would miss a class, since that group could not be a test fold.
    """
    pairs = list(knees)
    ids = [k for k, _ in pairs]
    if len(set(ids)) != len(ids):
        raise GroupingError("duplicate knee ids")
    normals = sorted(k for k, lab in pairs if lab == "normal")
    abnormals = sorted(k for k, lab in pairs if lab == "abnormal")
    if len(normals) + len(abnormals) != len(pairs):
        raise GroupingError("labels must be 'normal' or 'abnormal'")
    if not normals or not abnormals:
        raise GroupingError("need at least one knee of each class")
    rng = np.random.default_rng(seed)
    rng.shuffle(normals)
    rng.shuffle(abnormals)
    counts_n = _scale_counts(len(normals), tuple(r[0] for r in RATIO_TEMPLATE))
    counts_a = _scale_counts(len(abnormals), tuple(r[1] for r in RATIO_TEMPLATE))
    groups: list[list[str]] = []
    at_n = at_a = 0
    for cn, ca in zip(counts_n, counts_a):
        groups.append(list(normals[at_n : at_n + cn]) + list(abnormals[at_a : at_a + ca]))
        at_n += cn
        at_a += ca
    for g, group in enumerate(groups):
        rest = set(ids) - set(group)
        rest_n = sum(1 for k in normals if k in rest)
        rest_a = sum(1 for k in abnormals if k in rest)
        if rest_n == 0 or rest_a == 0:
            raise GroupingError(
                f"group {g} leaves a single-class training complement; "
                "corpus too small for the 5-group protocol"
            )
    return groups


def fold_indices(rows: list[RowKey], groups: list[list[str]]):
    """(train_idx, test_idx) per group, skipping groups with no segments."""
    knee_of = np.asarray([r.knee_id for r in rows])
    folds = []
    for group in groups:
        test = np.flatnonzero(np.isin(knee_of, list(group)))
        if test.size == 0:
            continue
        train = np.flatnonzero(~np.isin(knee_of, list(group)))
        folds.append((train, test))
    return folds


def rep_assignments(rows: list[RowKey], cv: CvProtocol):
    """Precompute fold index pairs for every repetition.

    Scoring and subset evaluation share these assignments, so all parts of
    one experiment see common random groupings.
    """
    knees = sorted({(r.knee_id, r.label) for r in rows})
    out = []
    for rep in range(cv.repetitions):
        groups = make_groups(knees, (cv.master_seed, rep))
        out.append(fold_indices(rows, groups))
    return out


def standardize_fold(train_X: np.ndarray, test_X: np.ndarray):
    """z-scale both matrices by the training fold's mean and std.

    Zero-variance columns divide by 1 so constant features pass through
    centred instead of exploding.
    """
    mu = train_X.mean(axis=0)
    sd = train_X.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (train_X - mu) / sd, (test_X - mu) / sd


def pooled_cv(X: np.ndarray, y: np.ndarray, assignments, classifier: str, seed: int = 0):
    """Run every repetition, pooling test predictions across the 5 folds.

    Returns {metric: array over repetitions} for auc, error_rate, f05, mcc.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    out = {k: np.empty(len(assignments)) for k in METRIC_KEYS}
    for rep, folds in enumerate(assignments):
        scores = np.full(n, np.nan)
        preds = np.full(n, np.nan)
        for train, test in folds:
            tr_X, te_X = standardize_fold(X[train], X[test])
            model = classify.train_model(classifier, tr_X, y[train], seed=seed)
            scores[test] = classify.model_scores(model, te_X)
            preds[test] = classify.model_predict(model, te_X)
        if np.isnan(scores).any():
            raise EvaluationError("some rows were never assigned to a test fold")
        cm = metrics.ConfusionMatrix.from_predictions(y, preds)
        out["auc"][rep] = metrics.roc_auc(scores, y).auc
        out["error_rate"][rep] = metrics.error_rate(cm)
        out["f05"][rep] = metrics.f_beta(cm, 0.5)
        out["mcc"][rep] = metrics.mcc(cm)
    return out


@dataclass
class EvalReport:
    """Everything one experiment produces, JSON-serialisable."""

    config: dict
    per_repetition: dict
    mean: dict
    winning_subset: dict | None = None
    extras: dict = field(default_factory=dict)


def summarize(per_rep: dict) -> dict:
    mean = {k: float(np.mean(per_rep[k])) for k in METRIC_KEYS}
    mean["s"] = metrics.s_score(mean["mcc"], mean["error_rate"], mean["f05"])
    return mean


def make_report(config: dict, per_rep: dict, winning_subset: dict | None = None) -> EvalReport:
    per = {k: [float(v) for v in per_rep[k]] for k in METRIC_KEYS}
    return EvalReport(config, per, summarize(per_rep), winning_subset)


def run_cv(
    fset: FeatureSet,
    cv: CvProtocol,
    classifier: str = "svm-linear",
    positions=None,
    assignments=None,
) -> EvalReport:
    """Repeated knee-level CV of one feature set (optionally a column subset)."""
    y = fset.labels
    if assignments is None:
        assignments = rep_assignments(fset.rows, cv)
    X = fset.X if positions is None else fset.X[:, fset.columns_for(positions)]
    per_rep = pooled_cv(X, y, assignments, classifier)
    config = {
        "feature_set": fset.tag,
        "classifier": classifier,
        "repetitions": cv.repetitions,
        "master_seed": cv.master_seed,
        "params": dict(fset.params),
    }
    if positions is not None:
        config["positions"] = [int(p) for p in positions]
    return make_report(config, per_rep)


def report_to_dict(report: EvalReport) -> dict:
    d = {
        "config": report.config,
        "per_repetition": report.per_repetition,
        "mean": report.mean,
        "winning_subset": report.winning_subset,
    }
    if report.extras:
        d["extras"] = report.extras
    return d


def load_report_schema() -> dict:
    ref = resources.files("kneesound.schemas").joinpath("report.schema.json")
    return json.loads(ref.read_text())


def write_report(report: EvalReport, path: str | Path) -> None:
    """Validate against the shipped schema and write deterministic JSON."""
    import jsonschema

    payload = report_to_dict(report)
    jsonschema.validate(payload, load_report_schema())
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_pipeline(
    segments,
    tag: str,
    frame_ms: float,
    n_bands: int,
    cv: CvProtocol,
    classifier: str = "svm-linear",
    *,
    theta_er: float = 0.456,
    grid_step: float = 0.05,
    include_full_deltas: bool = False,
    jobs: int = 1,
) -> EvalReport:
    """Full experiment for one parameterisation: extract, score every
    feature under the linear SVM, build threshold subsets, evaluate them
    with the requested classifier and report the winner."""
    from . import selection

    fset = features.build_feature_sets(
        segments, frame_ms, n_bands, tags=tag, include_full_deltas=include_full_deltas
    )[tag]
    return run_selection_pipeline(
        fset, cv, classifier, theta_er=theta_er, grid_step=grid_step, jobs=jobs
    )


def run_selection_pipeline(
    fset: FeatureSet,
    cv: CvProtocol,
    classifier: str = "svm-linear",
    *,
    theta_er: float = 0.456,
    grid_step: float = 0.05,
    jobs: int = 1,
    assignments=None,
) -> EvalReport:
    from . import selection

    if assignments is None:
        assignments = rep_assignments(fset.rows, cv)
    scores = selection.score_features(fset, assignments, jobs=jobs)
    subsets = selection.build_subsets(scores, theta_er=theta_er, grid_step=grid_step)
    winner, evaluated = selection.select_best(
        subsets, fset, assignments, classifier, jobs=jobs
    )
    per_rep = evaluated[winner.rank]["per_repetition"]
    config = {
        "feature_set": fset.tag,
        "classifier": classifier,
        "repetitions": cv.repetitions,
        "master_seed": cv.master_seed,
        "theta_er": theta_er,
        "grid_step": grid_step,
        "params": dict(fset.params),
    }
    return make_report(config, per_rep, selection.subset_to_dict(winner))


def sweep_framelen(
    segments,
    cv: CvProtocol,
    tags: str = "DEFLM",
    grid=tuple(range(20, 101, 4)),
    n_bands: int = 20,
    classifier: str = "svm-linear",
    jobs: int = 1,
) -> dict:
    """Frame-length sweep: the full pipeline at every grid value per set."""
    out: dict = {tag: {} for tag in tags}
    for frame_ms in grid:
        for tag in tags:
            out[tag][int(frame_ms)] = run_pipeline(
                segments, tag, float(frame_ms), n_bands, cv, classifier, jobs=jobs
            )
    return out


def local_search(
    segments,
    cv: CvProtocol,
    best_ms: dict,
    width: int = 3,
    classifiers=classify.CLASSIFIER_NAMES,
    n_bands: int = 20,
    jobs: int = 1,
) -> dict:
    """Refine each set's frame length at 1 ms steps around its best value.

    Subsets are always assembled under the linear-SVM protocol; every
    requested classifier then evaluates all candidate subsets, and the best
    (frame length, subset) pair per classifier is reported.
    """
    from . import selection

    out: dict = {}
    for tag, center in best_ms.items():
        out[tag] = {name: None for name in classifiers}
        for frame_ms in range(int(center) - width, int(center) + width + 1):
            if frame_ms < 1:
                continue
            fset = features.build_feature_sets(segments, float(frame_ms), n_bands, tags=tag)[tag]
            assignments = rep_assignments(fset.rows, cv)
            scores = selection.score_features(fset, assignments, jobs=jobs)
            subsets = selection.build_subsets(scores)
            for name in classifiers:
                winner, evaluated = selection.select_best(
                    subsets, fset, assignments, name, jobs=jobs
                )
                report = make_report(
                    {
                        "feature_set": tag,
                        "classifier": name,
                        "frame_ms": frame_ms,
                        "repetitions": cv.repetitions,
                        "master_seed": cv.master_seed,
                    },
                    evaluated[winner.rank]["per_repetition"],
                    selection.subset_to_dict(winner),
                )
                cur = out[tag][name]
                if cur is None or report.mean["auc"] > cur.mean["auc"]:
                    out[tag][name] = report
    return out


def monte_carlo_lengths(n_draws: int = 20, seed: int = 0, lo: int = 2, hi: int = 700,
                        excluded=range(20, 101)) -> list[int]:
    """Distinct integer frame lengths (ms) outside the regular grid."""
    allowed = np.array([v for v in range(lo, hi + 1) if v not in excluded])
    rng = np.random.default_rng(seed)
    drawn = rng.choice(allowed, size=n_draws, replace=False)
    return sorted(int(v) for v in drawn)


def sweep_monte_carlo(
    segments,
    cv: CvProtocol,
    tags: str = "DEFLM",
    n_draws: int = 20,
    seed: int = 0,
    n_bands: int = 20,
    classifier: str = "svm-linear",
    jobs: int = 1,
) -> dict:
    lengths = monte_carlo_lengths(n_draws, seed)
    out: dict = {tag: {} for tag in tags}
    for frame_ms in lengths:
        for tag in tags:
            out[tag][frame_ms] = run_pipeline(
                segments, tag, float(frame_ms), n_bands, cv, classifier, jobs=jobs
            )
    return out


def sweep_nbands(
    segments,
    cv: CvProtocol,
    tags: str = "DELM",
    grid=tuple(range(10, 76)),
    frame_ms_by_tag=None,
    classifier: str = "svm-linear",
    jobs: int = 1,
) -> dict:
    """Band-count sweep at each set's fixed per-tag frame length."""
    frame_ms_by_tag = dict(TABLE_FRAME_MS, **(frame_ms_by_tag or {}))
    out: dict = {tag: {} for tag in tags}
    for tag in tags:
        for nb in grid:
            out[tag][int(nb)] = run_pipeline(
                segments, tag, float(frame_ms_by_tag[tag]), int(nb), cv, classifier,
                jobs=jobs,
            )
    return out
