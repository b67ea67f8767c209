"""Command line verbs, output files, and exit codes."""

from __future__ import annotations

import json

import numpy as np
import pytest

from contre.cli import main
from contre.data_io import (ManifestRow, PredictionRecord, REPORT_KEYS,
                            read_report, write_manifest, write_predictions)
from contre.png_io import encode_png


def checker(seed):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)


@pytest.fixture()
def dataset(tmp_path):
    rows = []
    for i in range(4):
        rel = f"img{i}.png"
        encode_png(checker(i), tmp_path / rel)
        rows.append(ManifestRow(sample_id=f"s{i}", path=rel, label=i % 3))
    manifest = tmp_path / "manifest.csv"
    write_manifest(rows, manifest)
    return manifest


SEPARATION = {"a": 3.0, "b": 2.0, "c": 1.0}


def predictions_for(model_id, correct_per_view, n=6, with_features=True):
    """Records over n samples; correct_per_view maps view -> #correct."""
    records = []
    sep = SEPARATION.get(model_id, 1.0)
    for view, n_correct in correct_per_view.items():
        for i in range(n):
            label = i % 3
            pred = label if i < n_correct else (label + 1) % 3
            feature = None
            if with_features and view in ("train_orig", "train_contre"):
                feature = np.array([label * sep + 0.05 * i, 1.0 - 0.03 * i],
                                   dtype=np.float32)
            records.append(PredictionRecord(
                model_id=model_id, view=view, sample_id=f"s{i}",
                view_index=0 if view.endswith("_orig") else 1,
                label=label, pred=pred, feature=feature,
                feature_dim=None if feature is None else len(feature)))
    return records


@pytest.fixture()
def pred_files(tmp_path):
    # test and contre identically ordered; train deliberately disagrees so
    # the partial correlation has a nonzero denominator
    spec = {"a": {"test_orig": 6, "train_contre": 5, "train_orig": 6},
            "b": {"test_orig": 4, "train_contre": 4, "train_orig": 4},
            "c": {"test_orig": 2, "train_contre": 3, "train_orig": 5}}
    paths = []
    for model_id, views in spec.items():
        path = tmp_path / f"{model_id}.jsonl"
        write_predictions(predictions_for(model_id, views), path)
        paths.append(str(path))
    return paths


# --- gen ---------------------------------------------------------------------

def test_gen_writes_views_and_manifest(dataset, tmp_path, capsys):
    out = tmp_path / "views"
    code = main(["-q", "gen", "--data", str(dataset), "--out", str(out),
                 "--views", "2", "--n", "1", "--m", "10", "--seed", "3"])
    assert code == 0
    assert (out / "manifest.csv").exists()
    assert len(list((out / "images").glob("*.png"))) == 8
    assert "wrote 8 views" in capsys.readouterr().out


def test_gen_respects_restricted_pool(dataset, tmp_path):
    out = tmp_path / "views"
    code = main(["-q", "gen", "--data", str(dataset), "--out", str(out),
                 "--ops", "Rotate,Invert", "--n", "2"])
    assert code == 0
    lines = (out / "manifest.csv").read_text().splitlines()[1:]
    for line in lines:
        ops = line.split(",")[4]
        for op in ops.split(";"):
            assert op.split(":")[0] in ("Rotate", "Invert")


def test_gen_unknown_operator_exits_2(dataset, tmp_path, capsys):
    code = main(["-q", "gen", "--data", str(dataset),
                 "--out", str(tmp_path / "v"), "--ops", "Rotate,Wobble"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_gen_missing_manifest_exits_3(tmp_path, capsys):
    code = main(["-q", "gen", "--data", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "v")])
    assert code == 3


# --- score -------------------------------------------------------------------

def test_score_writes_tables(pred_files, tmp_path, capsys):
    out = tmp_path / "scores.json"
    code = main(["-q", "score", "--pred", *pred_files, "--out", str(out)])
    assert code == 0
    obj = json.loads(out.read_text())
    accs = {r["model_id"]: r["accuracy"] for r in obj["scores"]["test_orig"]}
    assert accs == {"a": 1.0, "b": pytest.approx(4 / 6),
                    "c": pytest.approx(2 / 6)}
    assert "a test_orig: 1.0000 (6 records)" in capsys.readouterr().out


def test_score_malformed_line_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"model_id": "a"\n', encoding="utf-8")
    code = main(["-q", "score", "--pred", str(bad),
                 "--out", str(tmp_path / "s.json")])
    assert code == 3
    assert "bad.jsonl:1:" in capsys.readouterr().err


# --- correlate ---------------------------------------------------------------

def test_correlate_emits_full_report(pred_files, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["-q", "correlate", "--pred", *pred_files,
                 "--out", str(out), "--reduce-dim", "2"])
    assert code == 0
    report = read_report(out)
    assert list(report) == list(REPORT_KEYS)
    assert report["correlations"]["test_vs_contre"]["value"] == 1.0
    assert report["config"]["source"] == "correlate"
    assert sorted(report["config"]["predictions"]) == \
        ["a.jsonl", "b.jsonl", "c.jsonl"]
    assert "test_vs_contre: +1.0000 (3 models)" in capsys.readouterr().out


def test_correlate_degenerate_exits_4_but_writes_report(tmp_path, capsys):
    spec = {"a": {"test_orig": 6, "train_contre": 5},
            "b": {"test_orig": 6, "train_contre": 4},
            "c": {"test_orig": 6, "train_contre": 3}}
    paths = []
    for model_id, views in spec.items():
        path = tmp_path / f"{model_id}.jsonl"
        write_predictions(
            predictions_for(model_id, views, with_features=False), path)
        paths.append(str(path))
    out = tmp_path / "report.json"
    code = main(["-q", "correlate", "--pred", *paths, "--out", str(out)])
    assert code == 4
    report = read_report(out)
    assert report["correlations"]["test_vs_contre"]["value"] is None
    assert "undefined" in capsys.readouterr().out


# --- fisher ------------------------------------------------------------------

def test_fisher_writes_per_model_values(pred_files, tmp_path, capsys):
    out = tmp_path / "fisher.json"
    code = main(["-q", "fisher", "--pred", *pred_files, "--out", str(out),
                 "--reduce-dim", "2"])
    assert code == 0
    obj = json.loads(out.read_text())
    models = [row["model_id"] for row in obj["fisher"]["per_model"]]
    assert models == ["a", "b", "c"]
    assert "fisher=" in capsys.readouterr().out


def test_fisher_without_features_exits_3(tmp_path, capsys):
    path = tmp_path / "a.jsonl"
    write_predictions(
        predictions_for("a", {"train_orig": 6}, with_features=False), path)
    code = main(["-q", "fisher", "--pred", str(path),
                 "--out", str(tmp_path / "f.json")])
    assert code == 3
    assert "no feature vectors" in capsys.readouterr().err


# --- sweep -------------------------------------------------------------------

@pytest.fixture()
def experiment_config(tmp_path):
    from contre.harness import write_shapes_data
    train = write_shapes_data(tmp_path / "data", 24, 5, "tr")
    test = write_shapes_data(tmp_path / "data", 18, 99, "te")
    cfg = {"train_manifest": train, "test_manifest": test,
           "policy": {"master_seed": 5},
           "cohort": [
               {"model_id": "lin", "hidden_widths": [], "epochs": 2,
                "init_seed": 11},
               {"model_id": "w8", "hidden_widths": [8], "epochs": 6,
                "init_seed": 12},
               {"model_id": "w16", "hidden_widths": [16], "epochs": 8,
                "init_seed": 13}]}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def test_sweep_nm_writes_grid(experiment_config, tmp_path, capsys):
    out = tmp_path / "sweep"
    code = main(["-q", "sweep", "--mode", "nm",
                 "--config", str(experiment_config), "--out", str(out),
                 "--n-grid", "1", "--m-grid", "8,24"])
    assert code == 0
    lines = (out / "sweep_nm.csv").read_text().splitlines()
    assert lines[0] == "n_ops,magnitude,spearman_test_contre,note"
    assert len(lines) == 3
    assert "n=1 m=8:" in capsys.readouterr().out


def test_sweep_single_mode_uses_requested_ops(experiment_config, tmp_path,
                                              capsys):
    out = tmp_path / "sweep"
    code = main(["-q", "sweep", "--mode", "single",
                 "--config", str(experiment_config), "--out", str(out),
                 "--ops", "Identity,Rotate"])
    assert code == 0
    lines = (out / "sweep_single_ops.csv").read_text().splitlines()
    assert len(lines) == 3
    assert "2 cells written" in capsys.readouterr().out


def test_sweep_bad_grid_exits_2(experiment_config, tmp_path, capsys):
    code = main(["-q", "sweep", "--mode", "nm",
                 "--config", str(experiment_config),
                 "--out", str(tmp_path / "s"), "--m-grid", "8,oops"])
    assert code == 2
    assert "bad sweep grid" in capsys.readouterr().err


def test_sweep_unknown_config_key_exits_2(tmp_path, capsys):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"train_manifest": "x", "test_manifest": "y",
                                "surprise": 1}), encoding="utf-8")
    code = main(["-q", "sweep", "--mode", "nm", "--config", str(path),
                 "--out", str(tmp_path / "s")])
    assert code == 2
    assert "surprise" in capsys.readouterr().err


# --- e2e and report ----------------------------------------------------------

def test_e2e_smoke_and_report_reemit(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["-q", "e2e", "--out", str(out), "--seed", "5",
                 "--train-size", "30", "--test-size", "24",
                 "--n", "1", "--m", "8"])
    assert code in (0, 4)  # tiny cohorts may tie somewhere; report either way
    assert (out / "report.json").exists()
    capsys.readouterr()

    plots = tmp_path / "replots"
    code = main(["-q", "report", "--report", str(out / "report.json"),
                 "--out", str(plots)])
    assert code == 0
    assert (plots / "plots" / "test_vs_contre.svg").exists()
    assert "test_vs_contre:" in capsys.readouterr().out


def test_unknown_verb_is_an_argparse_error():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
