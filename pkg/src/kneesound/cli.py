"""Command-line front end.

Subcommands: synth, extract, score, select, evaluate, sweep. All outputs are
UTF-8 JSON/CSV with sorted keys and no timestamps, so a repeated run with
the same flags and seed produces byte-identical files. Feature matrices are
cached on disk keyed by (corpus hash, frame length, band count); --no-cache
bypasses the cache in both directions.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment, features, selection, signal_io, synthgen
from .errors import KneesoundError
from .features import FeatureSet, RowKey, VectorInfo


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _corpus_hash(manifest_path: Path) -> str:
    """Digest of manifest bytes plus every referenced WAV payload."""
    h = hashlib.sha256()
    h.update(manifest_path.read_bytes())
    for row in signal_io.read_manifest(manifest_path):
        wav = Path(row["path"])
        if not wav.is_absolute():
            wav = manifest_path.parent / wav
        with open(wav, "rb") as fh:
            while chunk := fh.read(1 << 20):
                h.update(chunk)
    return h.hexdigest()


def _cache_base(cache_dir: Path, corpus_digest: str, tag: str, frame_ms: float,
                n_bands: int, segment_s: float, include_deltas: bool) -> Path:
    key = f"{corpus_digest}|{tag}|{frame_ms}|{n_bands}|{segment_s}|{include_deltas}"
    return cache_dir / hashlib.sha256(key.encode()).hexdigest()[:24]


def _cache_save(fset: FeatureSet, base: Path) -> None:
    base.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(base.with_suffix(".npz"), X=fset.X)
    meta = {
        "tag": fset.tag,
        "params": fset.params,
        "rows": [[r.knee_id, r.segment_index, r.label] for r in fset.rows],
        "vectors": [[v.tag, v.coeff, v.deriv, v.center_hz] for v in fset.vectors],
    }
    _write_json(meta, base.with_suffix(".json"))


def _cache_load(base: Path) -> FeatureSet | None:
    npz, meta_path = base.with_suffix(".npz"), base.with_suffix(".json")
    if not (npz.exists() and meta_path.exists()):
        return None
    with open(meta_path) as fh:
        meta = json.load(fh)
    X = np.load(npz)["X"]
    rows = [RowKey(k, int(i), lab) for k, i, lab in meta["rows"]]
    vectors = [VectorInfo(t, int(c), int(d), cz) for t, c, d, cz in meta["vectors"]]
    return FeatureSet(meta["tag"], X, vectors, rows, meta["params"])


def _load_segments(manifest: Path, segment_s: float, target_rate: int):
    corpus = signal_io.load_corpus(manifest, target_rate=target_rate)
    return signal_io.segment_corpus(corpus, segment_s)


def _get_feature_set(args, cfg, tag: str) -> FeatureSet:
    """Cached feature extraction for one parameterisation."""
    manifest = Path(args.corpus)
    frame_ms = _opt(args, cfg, "frame_ms", 20.0)
    n_bands = int(_opt(args, cfg, "nbands", 20))
    segment_s = float(cfg.get("segment_s", signal_io.DEFAULT_SEGMENT_S))
    target_rate = int(cfg.get("target_rate", signal_io.DEFAULT_RATE))
    include_deltas = bool(cfg.get("include_full_deltas", False))
    use_cache = not args.no_cache
    base = None
    if use_cache:
        cache_dir = Path(args.out) / ".feature_cache"
        digest = _corpus_hash(manifest)
        base = _cache_base(cache_dir, digest, tag, frame_ms, n_bands,
                           segment_s, include_deltas)
        cached = _cache_load(base)
        if cached is not None:
            return cached
    segments = _load_segments(manifest, segment_s, target_rate)
    fset = features.build_feature_sets(
        segments, frame_ms, n_bands, tags=tag, include_full_deltas=include_deltas
    )[tag]
    if base is not None:
        _cache_save(fset, base)
    return fset


def _opt(args, cfg: dict, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _protocol(args, cfg) -> experiment.CvProtocol:
    return experiment.CvProtocol(
        repetitions=int(_opt(args, cfg, "reps", cfg.get("repetitions", 100))),
        master_seed=int(_opt(args, cfg, "seed", 0)),
    )


def _add_common(p: argparse.ArgumentParser, *, corpus: bool = True) -> None:
    if corpus:
        p.add_argument("--corpus", required=True, help="manifest CSV path")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallelism degree")
    p.add_argument("--reps", type=int, default=None, help="CV repetitions")
    p.add_argument("--no-cache", action="store_true", help="bypass feature cache")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kneesound",
        description="Knee-sound screening experiments: synthesis, features, "
                    "selection and cross-validated evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", help="JSON file with SynthSpec fields")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("extract", help="write feature CSVs for a corpus")
    _add_common(p)
    p.add_argument("--feature-set", choices=list(features.TAGS) + ["all"], default="all")
    p.add_argument("--frame-ms", dest="frame_ms", type=float, default=None)
    p.add_argument("--nbands", type=int, default=None)

    for name, help_text in (
        ("score", "per-feature linear-SVM scores"),
        ("select", "threshold-grid subset selection"),
        ("evaluate", "cross-validated evaluation of one feature set"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--feature-set", choices=list(features.TAGS), required=True)
        p.add_argument("--frame-ms", dest="frame_ms", type=float, default=None)
        p.add_argument("--nbands", type=int, default=None)
        if name != "score":
            p.add_argument("--classifier", choices=classify_names(), default="svm-linear")

    p = sub.add_parser("sweep", help="parameter sweeps")
    _add_common(p)
    p.add_argument("--kind", choices=("framelen", "local", "montecarlo", "nbands"),
                   default="framelen")
    p.add_argument("--feature-set", choices=list(features.TAGS), default="M")
    p.add_argument("--classifier", choices=classify_names(), default="svm-linear")
    p.add_argument("--nbands", type=int, default=None)
    p.add_argument("--frame-ms", dest="frame_ms", type=float, default=None,
                   help="centre for --kind local (defaults to the per-set table)")
    return parser


def classify_names():
    from .classify import CLASSIFIER_NAMES

    return CLASSIFIER_NAMES


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def cmd_synth(args) -> int:
    cfg = _read_config(args.config)
    spec = synthgen.spec_from_dict(cfg)
    if args.seed is not None:
        spec.seed = args.seed
    manifest = synthgen.write_corpus(synthgen.generate(spec), args.out)
    print(manifest)
    return 0


def cmd_extract(args) -> int:
    cfg = _read_config(args.config)
    tags = features.TAGS if args.feature_set == "all" else (args.feature_set,)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tag in tags:
        fset = _get_feature_set(args, cfg, tag)
        features.save_feature_set(fset, out / f"features_{tag}.csv")
    return 0


def cmd_score(args) -> int:
    cfg = _read_config(args.config)
    fset = _get_feature_set(args, cfg, args.feature_set)
    cv = _protocol(args, cfg)
    assignments = experiment.rep_assignments(fset.rows, cv)
    scores = selection.score_features(fset, assignments, jobs=args.jobs)
    payload = selection.selection_report(scores, [])
    payload["config"] = {
        "feature_set": args.feature_set,
        "repetitions": cv.repetitions,
        "master_seed": cv.master_seed,
        "params": fset.params,
    }
    _write_json(payload, Path(args.out) / f"scores_{args.feature_set}.json")
    return 0


def cmd_select(args) -> int:
    cfg = _read_config(args.config)
    fset = _get_feature_set(args, cfg, args.feature_set)
    cv = _protocol(args, cfg)
    assignments = experiment.rep_assignments(fset.rows, cv)
    scores = selection.score_features(fset, assignments, jobs=args.jobs)
    subsets = selection.build_subsets(
        scores,
        theta_er=float(cfg.get("theta_er", selection.THETA_ER_DEFAULT)),
        grid_step=float(cfg.get("grid_step", selection.GRID_STEP_DEFAULT)),
    )
    winner, evaluated = selection.select_best(
        subsets, fset, assignments, args.classifier, jobs=args.jobs
    )
    payload = selection.selection_report(scores, subsets, evaluated)
    payload["winner"] = selection.subset_to_dict(winner)
    payload["config"] = {
        "feature_set": args.feature_set,
        "classifier": args.classifier,
        "repetitions": cv.repetitions,
        "master_seed": cv.master_seed,
        "params": fset.params,
    }
    _write_json(payload, Path(args.out) / f"selection_{args.feature_set}.json")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _read_config(args.config)
    fset = _get_feature_set(args, cfg, args.feature_set)
    cv = _protocol(args, cfg)
    report = experiment.run_cv(fset, cv, classifier=args.classifier)
    experiment.write_report(report, Path(args.out) / f"report_{args.feature_set}.json")
    return 0


def cmd_sweep(args) -> int:
    cfg = _read_config(args.config)
    cv = _protocol(args, cfg)
    tag = args.feature_set
    manifest = Path(args.corpus)
    segment_s = float(cfg.get("segment_s", signal_io.DEFAULT_SEGMENT_S))
    target_rate = int(cfg.get("target_rate", signal_io.DEFAULT_RATE))
    segments = _load_segments(manifest, segment_s, target_rate)
    n_bands = int(_opt(args, cfg, "nbands", 20))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.kind == "framelen":
        grid = cfg.get("grid", list(range(20, 101, 4)))
        results = experiment.sweep_framelen(
            segments, cv, tags=tag, grid=grid, n_bands=n_bands,
            classifier=args.classifier, jobs=args.jobs,
        )
        for value, report in results[tag].items():
            experiment.write_report(report, out / f"framelen_{tag}_{value:03d}ms.json")
    elif args.kind == "local":
        center = _opt(args, cfg, "frame_ms", experiment.TABLE_FRAME_MS[tag])
        results = experiment.local_search(
            segments, cv, {tag: int(center)}, n_bands=n_bands, jobs=args.jobs
        )
        for clf, report in results[tag].items():
            experiment.write_report(report, out / f"local_{tag}_{clf}.json")
    elif args.kind == "montecarlo":
        results = experiment.sweep_monte_carlo(
            segments, cv, tags=tag, n_draws=int(cfg.get("n_draws", 20)),
            seed=cv.master_seed, n_bands=n_bands,
            classifier=args.classifier, jobs=args.jobs,
        )
        for value, report in results[tag].items():
            experiment.write_report(report, out / f"montecarlo_{tag}_{value:03d}ms.json")
    else:
        grid = cfg.get("grid", list(range(10, 76)))
        results = experiment.sweep_nbands(
            segments, cv, tags=tag, grid=grid, classifier=args.classifier,
            jobs=args.jobs,
        )
        for value, report in results[tag].items():
            experiment.write_report(report, out / f"nbands_{tag}_{value:02d}.json")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "score": cmd_score,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except KneesoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
