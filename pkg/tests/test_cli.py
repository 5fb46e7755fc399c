"""End-to-end command-line runs on a miniature corpus."""

import json
from pathlib import Path

import pytest

from kneesound.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """A six-knee corpus small enough for full pipeline runs in seconds."""
    root = tmp_path_factory.mktemp("cli")
    spec = root / "spec.json"
    spec.write_text(json.dumps({"knees_per_class": 3, "duration_s": 4.0}))
    out = root / "corpus"
    assert main(["synth", "--config", str(spec), "--out", str(out), "--seed", "4"]) == 0
    return out / "manifest.csv"


@pytest.fixture(scope="module")
def run_cfg(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("cfg") / "run.json"
    cfg.write_text(json.dumps({"segment_s": 2.0, "nbands": 8}))
    return cfg


def test_synth_prints_manifest(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"knees_per_class": 1, "duration_s": 1.0}))
    assert main(["synth", "--config", str(spec), "--out", str(tmp_path / "c")]) == 0
    printed = capsys.readouterr().out.strip()
    assert printed.endswith("manifest.csv")
    assert Path(printed).exists()
    lines = Path(printed).read_text().strip().splitlines()
    assert len(lines) == 3  # header + one knee per class


def test_extract_writes_all_sets(corpus, run_cfg, tmp_path):
    out = tmp_path / "feats"
    code = main(
        ["extract", "--corpus", str(corpus), "--config", str(run_cfg),
         "--out", str(out)]
    )
    assert code == 0
    names = sorted(p.name for p in out.glob("features_*.csv"))
    assert names == [f"features_{t}.csv" for t in "DEFLM"]
    header = (out / "features_M.csv").read_text().splitlines()[0]
    assert header.startswith("knee_id,segment_index,label,")
    assert "M_c0_d0_mean" in header


def test_score_deterministic_and_cached(corpus, run_cfg, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["--feature-set", "M", "--reps", "2", "--seed", "0"]
    assert main(["score", "--corpus", str(corpus), "--config", str(run_cfg),
                 "--out", str(out1), *args]) == 0
    assert main(["score", "--corpus", str(corpus), "--config", str(run_cfg),
                 "--out", str(out2), *args]) == 0
    f1, f2 = out1 / "scores_M.json", out2 / "scores_M.json"
    assert f1.read_bytes() == f2.read_bytes()
    payload = json.loads(f1.read_text())
    assert len(payload["feature_scores"]) == 24  # 8 coeffs x 3 derivative orders
    assert payload["config"]["repetitions"] == 2
    # first run left a feature cache; rerun in the same out dir hits it
    cache_files = list((out1 / ".feature_cache").iterdir())
    assert len(cache_files) == 2  # matrix + metadata
    mtimes = {p: p.stat().st_mtime_ns for p in cache_files}
    assert main(["score", "--corpus", str(corpus), "--config", str(run_cfg),
                 "--out", str(out1), *args]) == 0
    assert {p: p.stat().st_mtime_ns for p in cache_files} == mtimes
    assert f1.read_bytes() == f2.read_bytes()


def test_no_cache_bypasses_cache_dir(corpus, run_cfg, tmp_path):
    out = tmp_path / "nc"
    assert main(["score", "--corpus", str(corpus), "--config", str(run_cfg),
                 "--out", str(out), "--feature-set", "M", "--reps", "1",
                 "--no-cache"]) == 0
    assert not (out / ".feature_cache").exists()
    assert (out / "scores_M.json").exists()


def test_select_reports_winner(corpus, run_cfg, tmp_path):
    out = tmp_path / "sel"
    code = main(["select", "--corpus", str(corpus), "--config", str(run_cfg),
                 "--out", str(out), "--feature-set", "M", "--reps", "2",
                 "--classifier", "lda"])
    assert code == 0
    payload = json.loads((out / "selection_M.json").read_text())
    assert payload["config"]["classifier"] == "lda"
    winner = payload["winner"]
    assert winner["rank"] >= 1
    assert len(winner["members"]) >= 1
    ranked = {s["rank"]: s for s in payload["subsets"]}
    assert winner["mean_auc"] == max(
        s["mean_auc"] for s in payload["subsets"] if s["mean_auc"] is not None
    )
    assert set(m["position"] for m in winner["members"]) == set(
        m["position"] for m in ranked[winner["rank"]]["members"]
    )


def test_evaluate_writes_schema_valid_report(corpus, run_cfg, tmp_path):
    import jsonschema

    from kneesound.experiment import load_report_schema

    out = tmp_path / "ev"
    code = main(["evaluate", "--corpus", str(corpus), "--config", str(run_cfg),
                 "--out", str(out), "--feature-set", "L", "--reps", "2",
                 "--classifier", "cart"])
    assert code == 0
    payload = json.loads((out / "report_L.json").read_text())
    jsonschema.validate(payload, load_report_schema())
    assert payload["config"]["classifier"] == "cart"
    assert len(payload["per_repetition"]["auc"]) == 2


def test_sweep_framelen_files(corpus, run_cfg, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"segment_s": 2.0, "nbands": 8, "grid": [20, 24]}))
    out = tmp_path / "sw"
    code = main(["sweep", "--corpus", str(corpus), "--config", str(cfg),
                 "--out", str(out), "--reps", "2"])
    assert code == 0
    names = sorted(p.name for p in out.glob("framelen_*.json"))
    assert names == ["framelen_M_020ms.json", "framelen_M_024ms.json"]
    payload = json.loads((out / "framelen_M_020ms.json").read_text())
    assert payload["winning_subset"] is not None


def test_sweep_montecarlo_files(corpus, run_cfg, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"segment_s": 2.0, "nbands": 8, "n_draws": 2}))
    out = tmp_path / "mc"
    code = main(["sweep", "--corpus", str(corpus), "--config", str(cfg),
                 "--out", str(out), "--kind", "montecarlo", "--reps", "2",
                 "--feature-set", "D"])
    assert code == 0
    files = sorted(out.glob("montecarlo_D_*ms.json"))
    assert len(files) == 2


def test_sweep_nbands_files(corpus, run_cfg, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"segment_s": 2.0, "grid": [6, 8], "frame_ms": 21}))
    out = tmp_path / "nb"
    code = main(["sweep", "--corpus", str(corpus), "--config", str(cfg),
                 "--out", str(out), "--kind", "nbands", "--reps", "2",
                 "--feature-set", "D"])
    assert code == 0
    names = sorted(p.name for p in out.glob("nbands_*.json"))
    assert names == ["nbands_D_06.json", "nbands_D_08.json"]


def test_missing_required_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["score", "--out", "somewhere"])
    assert exc.value.code == 2
    assert "--corpus" in capsys.readouterr().err


def test_bad_inputs_exit_1(tmp_path, capsys):
    assert main(["score", "--corpus", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path), "--feature-set", "M"]) == 1
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path)]) == 1
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"knees": 4}))
    assert main(["synth", "--config", str(unknown), "--out", str(tmp_path)]) == 1
