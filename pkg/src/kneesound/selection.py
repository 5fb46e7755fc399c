"""Threshold-driven feature selection.

Every feature vector (one coefficient of one derivative order, i.e. an
11-column block of the feature matrix) is scored alone under the linear-SVM
cross-validation protocol. A 21 x 21 grid of (F0.5, MCC) thresholds, with
the error-rate threshold fixed at the majority-predictor rate, then carves
the scored features into candidate subsets: a feature joins a subset when it
beats all three thresholds. Duplicates are dropped, empty subsets are
dropped, and the survivors (nested by construction) are ranked by decreasing
size. The winner is the subset with the best mean AUC when re-evaluated
under the requested classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import experiment
from .errors import EmptyInputError
from .features import FeatureSet, VectorInfo

THETA_ER_DEFAULT = 0.456
GRID_STEP_DEFAULT = 0.05


@dataclass(frozen=True)
class FeatureScore:
    """Standalone CV performance of a single feature vector."""

    vector: VectorInfo
    position: int
    mean_error_rate: float
    mean_f05: float
    mean_mcc: float


@dataclass(frozen=True)
class SubsetSelection:
    """A thresholded feature subset; mean_auc is filled in by evaluation.

    fallback marks the emergency single-feature subset used when no feature
    clears the thresholds (otherwise evaluation would have nothing to rank).
    """

    theta_er: float
    theta_f05: float | None
    theta_mcc: float | None
    positions: tuple
    vectors: tuple
    rank: int = 0
    mean_auc: float | None = None
    fallback: bool = False


def score_features(fset: FeatureSet, assignments, jobs: int = 1) -> list[FeatureScore]:
    """Score each feature vector alone with the linear SVM over all reps."""
    y = fset.labels
    positions = list(range(len(fset.vectors)))

    def one(pos: int) -> FeatureScore:
        cols = fset.columns_for([pos])
        per = experiment.pooled_cv(fset.X[:, cols], y, assignments, "svm-linear")
        return FeatureScore(
            fset.vectors[pos],
            pos,
            float(np.mean(per["error_rate"])),
            float(np.mean(per["f05"])),
            float(np.mean(per["mcc"])),
        )

    if jobs > 1:
        from joblib import Parallel, delayed

        return list(Parallel(n_jobs=jobs)(delayed(one)(p) for p in positions))
    return [one(p) for p in positions]


def build_subsets(
    scores: list[FeatureScore],
    theta_er: float = THETA_ER_DEFAULT,
    grid_step: float = GRID_STEP_DEFAULT,
    fallback_best: bool = True,
) -> list[SubsetSelection]:
    """Candidate subsets from the threshold grid.

    A feature enters the subset at (t_f05, t_mcc) when its mean error rate
    is <= theta_er, mean F0.5 >= t_f05 and mean MCC >= t_mcc. The grid runs
    both thresholds over 0, grid_step, ..., 1. Duplicate member sets keep
    their loosest thresholds; empty sets are dropped; ranks order subsets by
    decreasing size (they are nested, so this is threshold order too).
    """
    if not scores:
        raise EmptyInputError("no feature scores")
    m = int(round(1.0 / grid_step))
    grid = [i * grid_step for i in range(m + 1)]
    eligible = [s for s in scores if s.mean_error_rate <= theta_er]
    f05 = np.asarray([s.mean_f05 for s in eligible])
    mcc = np.asarray([s.mean_mcc for s in eligible])
    seen: set = set()
    raw: list[SubsetSelection] = []
    for t_f05 in grid:
        for t_mcc in grid:
            picked = np.flatnonzero((f05 >= t_f05) & (mcc >= t_mcc))
            if picked.size == 0:
                continue
            members = tuple(eligible[k].position for k in picked)
            if members in seen:
                continue
            seen.add(members)
            raw.append(
                SubsetSelection(
                    theta_er=theta_er,
                    theta_f05=t_f05,
                    theta_mcc=t_mcc,
                    positions=members,
                    vectors=tuple(eligible[k].vector for k in picked),
                )
            )
    if not raw and fallback_best:
        best = min(scores, key=lambda s: (s.mean_error_rate, s.position))
        raw.append(
            SubsetSelection(
                theta_er=theta_er,
                theta_f05=None,
                theta_mcc=None,
                positions=(best.position,),
                vectors=(best.vector,),
                fallback=True,
            )
        )
    raw.sort(key=lambda s: (-len(s.positions), s.theta_f05 or 0.0, s.theta_mcc or 0.0))
    return [replace(s, rank=r + 1) for r, s in enumerate(raw)]


def evaluate_subsets(
    subsets: list[SubsetSelection],
    fset: FeatureSet,
    assignments,
    classifier: str,
    jobs: int = 1,
) -> dict:
    """Re-run CV per subset; returns {rank: {"subset", "per_repetition"}}."""
    if not subsets:
        raise EmptyInputError("no subsets to evaluate")
    y = fset.labels

    def one(subset: SubsetSelection):
        cols = fset.columns_for(subset.positions)
        per = experiment.pooled_cv(fset.X[:, cols], y, assignments, classifier)
        done = replace(subset, mean_auc=float(np.mean(per["auc"])))
        return done.rank, {"subset": done, "per_repetition": per}

    if jobs > 1:
        from joblib import Parallel, delayed

        pairs = Parallel(n_jobs=jobs)(delayed(one)(s) for s in subsets)
    else:
        pairs = [one(s) for s in subsets]
    return dict(pairs)


def select_best(
    subsets: list[SubsetSelection],
    fset: FeatureSet,
    assignments,
    classifier: str = "svm-linear",
    jobs: int = 1,
):
    """Evaluate all subsets and pick the winner.

    Best mean AUC wins; ties fall to fewer features, then lower mean error
    rate, then rank (pure determinism guard).
    """
    evaluated = evaluate_subsets(subsets, fset, assignments, classifier, jobs=jobs)

    def key(rank):
        entry = evaluated[rank]
        subset = entry["subset"]
        return (
            -subset.mean_auc,
            len(subset.positions),
            float(np.mean(entry["per_repetition"]["error_rate"])),
            rank,
        )

    best_rank = min(evaluated, key=key)
    return evaluated[best_rank]["subset"], evaluated


def subset_to_dict(subset: SubsetSelection) -> dict:
    return {
        "theta_er": subset.theta_er,
        "theta_f05": subset.theta_f05,
        "theta_mcc": subset.theta_mcc,
        "rank": subset.rank,
        "mean_auc": subset.mean_auc,
        "fallback": subset.fallback,
        "members": [
            {
                "position": int(pos),
                "tag": vec.tag,
                "coeff": vec.coeff,
                "deriv": vec.deriv,
                "center_hz": vec.center_hz,
            }
            for pos, vec in zip(subset.positions, subset.vectors)
        ],
    }


def selection_report(
    scores: list[FeatureScore],
    subsets: list[SubsetSelection],
    evaluated: dict | None = None,
) -> dict:
    """JSON-ready record of the entire selection stage."""
    payload = {
        "feature_scores": [
            {
                "position": s.position,
                "tag": s.vector.tag,
                "coeff": s.vector.coeff,
                "deriv": s.vector.deriv,
                "center_hz": s.vector.center_hz,
                "mean_error_rate": s.mean_error_rate,
                "mean_f05": s.mean_f05,
                "mean_mcc": s.mean_mcc,
            }
            for s in scores
        ],
        "subsets": [subset_to_dict(s) for s in subsets],
    }
    if evaluated is not None:
        for entry in payload["subsets"]:
            got = evaluated.get(entry["rank"])
            if got is not None:
                entry["mean_auc"] = got["subset"].mean_auc
                entry["per_repetition_auc"] = [
                    float(v) for v in got["per_repetition"]["auc"]
                ]
    return payload
