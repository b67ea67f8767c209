"""Pipeline orchestration: correlation blocks, sweeps, reports, config files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from contre.augment import AugmentPolicy
from contre.data_io import REPORT_KEYS, ScoreRow, ScoreTable, read_report
from contre.errors import ConfigError, DataError, InsufficientCohort
from contre.harness import (ExperimentConfig, _Workbench, build_correlations,
                            build_fisher, default_cohort,
                            load_experiment_config, run_e2e, run_pipeline,
                            sweep_nm, sweep_pairs, sweep_single_ops,
                            write_shapes_data)
from contre.reference_model import ModelConfig
from contre.stats import spearman


def table(view, accs):
    rows = tuple(ScoreRow(model_id=m, accuracy=a, sample_count=100)
                 for m, a in sorted(accs.items()))
    return ScoreTable(view=view, rows=rows)


TINY_COHORT = (
    ModelConfig(model_id="lin", hidden_widths=(), epochs=2, init_seed=11),
    ModelConfig(model_id="w8", hidden_widths=(8,), epochs=6, init_seed=12),
    ModelConfig(model_id="w16", hidden_widths=(16,), epochs=8, init_seed=13),
)


@pytest.fixture(scope="module")
def shapes(tmp_path_factory):
    root = tmp_path_factory.mktemp("shapes")
    train = write_shapes_data(root, 48, 5, "tr")
    test = write_shapes_data(root, 36, 99, "te")
    return train, test


@pytest.fixture(scope="module")
def tiny_config(shapes):
    train, test = shapes
    return ExperimentConfig(
        train_manifest=train, test_manifest=test, cohort=TINY_COHORT,
        policy=AugmentPolicy(n_ops=1, magnitude=8.0, master_seed=5))


@pytest.fixture(scope="module")
def pipeline(tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline")
    return run_pipeline(tiny_config, out)


# --- correlation block -------------------------------------------------------

def test_identically_ordered_cohort_gives_exactly_one():
    tables = [table("test_orig", {"a": 0.9, "b": 0.8, "c": 0.7}),
              table("train_contre", {"a": 0.6, "b": 0.5, "c": 0.4})]
    block, _, notes, degenerate = build_correlations(tables)
    assert block["test_vs_contre"]["value"] == 1.0
    assert not degenerate and notes == []


def test_reversed_ordering_gives_exactly_minus_one():
    tables = [table("test_orig", {"a": 0.9, "b": 0.8, "c": 0.7}),
              table("train_contre", {"a": 0.1, "b": 0.2, "c": 0.3})]
    block, _, _, _ = build_correlations(tables)
    assert block["test_vs_contre"]["value"] == -1.0


def test_constant_accuracy_is_reported_not_raised():
    tables = [table("test_orig", {"a": 0.5, "b": 0.5, "c": 0.5}),
              table("train_contre", {"a": 0.6, "b": 0.5, "c": 0.4})]
    block, _, notes, degenerate = build_correlations(tables)
    assert degenerate
    assert block["test_vs_contre"]["value"] is None
    assert "note" in block["test_vs_contre"]
    assert any("test_orig" in n for n in notes)


def test_missing_required_views_raises():
    with pytest.raises(DataError):
        build_correlations([table("test_orig", {"a": 1, "b": 2, "c": 3})])


def test_fewer_than_three_models_raises():
    tables = [table("test_orig", {"a": 0.9, "b": 0.8}),
              table("train_contre", {"a": 0.6, "b": 0.5})]
    with pytest.raises(InsufficientCohort):
        build_correlations(tables)


def test_partial_entry_controls_for_training_accuracy():
    # hand-picked so all three pairwise rank correlations are distinct
    tables = [table("test_orig", {"a": 0.9, "b": 0.7, "c": 0.8, "d": 0.6}),
              table("train_contre", {"a": 0.8, "b": 0.6, "c": 0.7, "d": 0.5}),
              table("train_orig", {"a": 1.0, "b": 0.9, "c": 0.8, "d": 0.7})]
    block, _, _, _ = build_correlations(tables)
    entry = block["partial_test_contre_given_train"]
    assert entry["control"] == "train_orig:accuracy"
    r_xy = spearman([0.8, 0.6, 0.7, 0.5], [0.9, 0.7, 0.8, 0.6])
    r_xz = spearman([0.8, 0.6, 0.7, 0.5], [1.0, 0.9, 0.8, 0.7])
    r_yz = spearman([0.9, 0.7, 0.8, 0.6], [1.0, 0.9, 0.8, 0.7])
    expected = (r_xy - r_xz * r_yz) / np.sqrt((1 - r_xz**2) * (1 - r_yz**2))
    assert entry["value"] == pytest.approx(expected, abs=1e-15)


def test_partial_with_control_equal_to_x_goes_degenerate():
    # train ranks contre exactly, so controlling for train divides by zero
    tables = [table("test_orig", {"a": 0.9, "b": 0.7, "c": 0.8}),
              table("train_contre", {"a": 0.8, "b": 0.6, "c": 0.7}),
              table("train_orig", {"a": 0.95, "b": 0.75, "c": 0.85})]
    block, _, notes, degenerate = build_correlations(tables)
    entry = block["partial_test_contre_given_train"]
    assert degenerate and entry["value"] is None
    assert any("partial" in n for n in notes)


def test_consistency_rows_are_train_minus_contre():
    tables = [table("test_orig", {"a": 0.9, "b": 0.7, "c": 0.8}),
              table("train_contre", {"a": 0.5, "b": 0.6, "c": 0.7}),
              table("train_orig", {"a": 0.9, "b": 0.8, "c": 0.7})]
    _, rows, _, _ = build_correlations(tables)
    assert [r["model_id"] for r in rows["per_model"]] == ["a", "b", "c"]
    gaps = [r["value"] for r in rows["per_model"]]
    assert gaps == pytest.approx([0.4, 0.2, 0.0], abs=1e-15)


def test_fisher_correlation_needs_three_carrying_models():
    tables = [table("test_orig", {"a": 0.9, "b": 0.7, "c": 0.8}),
              table("train_contre", {"a": 0.5, "b": 0.6, "c": 0.7})]
    fisher = {"a": {"train_contre": {"value": 2.0}},
              "b": {"train_contre": {"value": None}},
              "c": {"train_contre": {"value": 1.0}}}
    block, _, notes, _ = build_correlations(tables, fisher)
    entry = block["test_vs_fisher_contre"]
    assert entry["value"] is None
    assert "fewer than 3" in entry["note"]


def test_fisher_correlation_uses_only_carrying_models():
    tables = [table("test_orig", {"a": 0.9, "b": 0.7, "c": 0.8, "d": 0.6}),
              table("train_contre", {"a": 0.5, "b": 0.6, "c": 0.7, "d": 0.4})]
    fisher = {m: {"train_contre": {"value": v}}
              for m, v in [("a", 3.0), ("b", 1.0), ("c", 2.0), ("d", None)]}
    block, _, _, _ = build_correlations(tables, fisher)
    entry = block["test_vs_fisher_contre"]
    assert entry["model_ids"] == ["a", "b", "c"]
    assert entry["value"] == 1.0


# --- fisher block ------------------------------------------------------------

def test_build_fisher_clamps_to_numerical_rank():
    rng = np.random.default_rng(3)
    feats = np.zeros((20, 5))
    feats[:, :3] = rng.normal(size=(20, 3))  # two dead directions
    labels = np.arange(20) % 2
    notes: list[str] = []
    block = build_fisher({"m": {"train_contre": (feats, labels)}},
                         reduce_dim=5, within_weighting="standard",
                         notes=notes)
    entry = block["per_model"][0]["views"]["train_contre"]
    assert entry["dim"] <= 3
    assert entry["value"] is not None and np.isfinite(entry["value"])
    assert notes == []


def test_build_fisher_retries_singular_within_with_ridge():
    # two point-mass classes: within-class scatter is exactly zero
    feats = np.repeat(np.array([[0.0, 0.0], [1.0, 1.0]]), 8, axis=0)
    labels = np.repeat([0, 1], 8)
    notes: list[str] = []
    block = build_fisher({"m": {"train_orig": (feats, labels)}},
                         reduce_dim=2, within_weighting="standard",
                         notes=notes)
    entry = block["per_model"][0]["views"]["train_orig"]
    assert entry["ridge"] > 0
    assert entry["value"] is not None
    assert any("ridge" in n for n in notes)


def test_build_fisher_orders_models_and_views():
    rng = np.random.default_rng(4)
    feats = rng.normal(size=(12, 3))
    labels = np.arange(12) % 3
    data = {"zeta": {"train_orig": (feats, labels)},
            "alpha": {"train_contre": (feats, labels),
                      "train_orig": (feats, labels)}}
    block = build_fisher(data, 3, "standard", [])
    assert [row["model_id"] for row in block["per_model"]] == ["alpha", "zeta"]
    assert list(block["per_model"][0]["views"]) == ["train_contre",
                                                    "train_orig"]


# --- pipeline ----------------------------------------------------------------

def test_pipeline_writes_complete_report(pipeline):
    assert list(pipeline.report) == list(REPORT_KEYS)
    on_disk = read_report(pipeline.report_path)
    assert on_disk == pipeline.report
    views = pipeline.report["scores"]["views"]
    assert set(views) == {"train_orig", "train_contre", "test_orig"}
    assert {Path(p).stem for p in pipeline.prediction_paths} == \
        {"lin", "w8", "w16"}
    for path in pipeline.prediction_paths + pipeline.plot_paths:
        assert Path(path).exists()


def test_pipeline_headline_entries_present(pipeline):
    corr = pipeline.report["correlations"]
    for key in ("test_vs_contre", "test_vs_train",
                "partial_test_contre_given_train",
                "test_vs_fisher_contre", "test_vs_fisher_orig"):
        assert key in corr, key


def test_pipeline_manifest_paths_outside_out_dir_kept_verbatim(
        pipeline, tiny_config):
    # the data lives outside the report directory, so no rewriting happens
    assert pipeline.report["config"]["train_manifest"] == \
        tiny_config.train_manifest


def test_pipeline_plots_cover_headline_figures(pipeline):
    names = sorted(Path(p).name for p in pipeline.plot_paths)
    assert names == ["test_vs_contre.csv", "test_vs_contre.svg",
                     "test_vs_fisher.csv", "test_vs_fisher.svg",
                     "test_vs_train.csv", "test_vs_train.svg"]


def test_pipeline_is_byte_deterministic(tiny_config, tmp_path):
    a = run_pipeline(tiny_config, tmp_path / "a")
    b = run_pipeline(tiny_config, tmp_path / "b")
    bytes_a = Path(a.report_path).read_bytes()
    bytes_b = Path(b.report_path).read_bytes()
    assert bytes_a == bytes_b
    for pa, pb in zip(sorted(a.plot_paths), sorted(b.plot_paths)):
        assert Path(pa).read_bytes() == Path(pb).read_bytes()


def test_pipeline_transform_test_adds_view(shapes, tmp_path):
    train, test = shapes
    config = ExperimentConfig(
        train_manifest=train, test_manifest=test, cohort=TINY_COHORT,
        policy=AugmentPolicy(n_ops=1, magnitude=8.0, master_seed=5),
        transform_test=True, include_features=False)
    result = run_pipeline(config, tmp_path)
    assert "test_contre" in result.report["scores"]["views"]
    assert "testcontre_vs_contre" in result.report["correlations"]


def test_pipeline_views_per_sample_multiplies_counts(shapes, tmp_path):
    train, test = shapes
    config = ExperimentConfig(
        train_manifest=train, test_manifest=test, cohort=TINY_COHORT,
        policy=AugmentPolicy(n_ops=1, magnitude=8.0, master_seed=5),
        views_per_sample=2, include_features=False)
    result = run_pipeline(config, tmp_path)
    rows = result.report["scores"]["views"]["train_contre"]
    assert all(r["sample_count"] == 96 for r in rows)


def test_pipeline_rejects_undersized_cohort(shapes, tmp_path):
    train, test = shapes
    config = ExperimentConfig(train_manifest=train, test_manifest=test,
                              cohort=TINY_COHORT[:2])
    with pytest.raises(InsufficientCohort):
        run_pipeline(config, tmp_path)


# --- sweeps ------------------------------------------------------------------

@pytest.fixture(scope="module")
def bench(tiny_config):
    return _Workbench(tiny_config)


def test_sweep_cell_matches_fresh_pipeline_run(tiny_config, bench, tmp_path):
    cells = sweep_nm(tiny_config, tmp_path, n_values=[1], m_values=[8.0],
                     workbench=bench)
    fresh = run_pipeline(tiny_config, tmp_path / "fresh")
    assert cells[0]["spearman_test_contre"] == \
        fresh.report["correlations"]["test_vs_contre"]["value"]


def test_sweep_nm_grid_is_sorted_and_complete(tiny_config, bench, tmp_path):
    cells = sweep_nm(tiny_config, tmp_path, n_values=[2, 1],
                     m_values=[20.0, 4.0], workbench=bench)
    assert [(c["n_ops"], c["magnitude"]) for c in cells] == \
        [(1, 4.0), (1, 20.0), (2, 4.0), (2, 20.0)]
    lines = (tmp_path / "sweep_nm.csv").read_text().splitlines()
    assert lines[0] == "n_ops,magnitude,spearman_test_contre,note"
    assert len(lines) == 5


def test_sweep_cells_do_not_depend_on_evaluation_order(tiny_config, bench):
    policy_a = AugmentPolicy(n_ops=1, magnitude=4.0, master_seed=5)
    policy_b = AugmentPolicy(n_ops=2, magnitude=28.0, master_seed=5)
    first_a = bench.cell_correlation(policy_a)
    first_b = bench.cell_correlation(policy_b)
    assert bench.cell_correlation(policy_a) == first_a
    assert bench.cell_correlation(policy_b) == first_b


def test_identity_sweep_equals_train_correlation(tiny_config, bench,
                                                 tmp_path):
    # an Identity-only view leaves images untouched, so the cell reduces to
    # the plain train-vs-test rank correlation
    cells = sweep_single_ops(tiny_config, tmp_path, ops=["Identity"],
                             workbench=bench)
    ids = sorted(bench.test_acc)
    expected = spearman([bench.train_acc[m] for m in ids],
                        [bench.test_acc[m] for m in ids])
    assert cells[0]["spearman_test_contre"] == expected


def test_single_op_sweep_covers_requested_ops(tiny_config, bench, tmp_path):
    cells = sweep_single_ops(tiny_config, tmp_path,
                             ops=["Rotate", "Invert"], workbench=bench)
    assert [c["op"] for c in cells] == ["Rotate", "Invert"]
    lines = (tmp_path / "sweep_single_ops.csv").read_text().splitlines()
    assert lines[0] == "op,spearman_test_contre,note"
    assert len(lines) == 3


def test_pair_sweep_emits_full_ordered_matrix(tiny_config, bench, tmp_path):
    cells = sweep_pairs(tiny_config, tmp_path, ops=["Rotate", "Invert"],
                        workbench=bench)
    assert [(c["first_op"], c["second_op"]) for c in cells] == \
        [("Rotate", "Rotate"), ("Rotate", "Invert"),
         ("Invert", "Rotate"), ("Invert", "Invert")]


def test_workbench_requires_three_models(shapes):
    train, test = shapes
    config = ExperimentConfig(train_manifest=train, test_manifest=test,
                              cohort=TINY_COHORT[:2])
    with pytest.raises(InsufficientCohort):
        _Workbench(config)


# --- default cohort and e2e --------------------------------------------------

def test_default_cohort_shape():
    cohort = default_cohort(7)
    assert len(cohort) == 10
    ids = [m.model_id for m in cohort]
    assert len(set(ids)) == 10
    assert any(m.label_noise > 0 for m in cohort)
    assert any(m.hidden_widths == () for m in cohort)
    assert default_cohort(7) == cohort
    seeds_7 = {m.init_seed for m in cohort}
    seeds_8 = {m.init_seed for m in default_cohort(8)}
    assert seeds_7.isdisjoint(seeds_8)


def test_e2e_smoke_writes_data_and_report(tmp_path):
    result = run_e2e(tmp_path, seed=5, n_train=30, n_test=24, n_ops=1,
                     magnitude=8.0, cohort=TINY_COHORT)
    assert (tmp_path / "data" / "tr_manifest.csv").exists()
    assert result.report["config"]["train_manifest"] == "data/tr_manifest.csv"
    assert result.report["correlations"]["test_vs_contre"]["model_ids"] == \
        ["lin", "w16", "w8"]


# --- config files ------------------------------------------------------------

def write_config(path, **extra):
    obj = {"train_manifest": "tr_manifest.csv",
           "test_manifest": "te_manifest.csv",
           "policy": {"n_ops": 3, "magnitude": 10.0, "master_seed": 4},
           "cohort": [{"model_id": "a", "hidden_widths": [8], "epochs": 2}]}
    obj.update(extra)
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


def test_config_file_round_trip(tmp_path):
    path = write_config(tmp_path / "exp.json")
    config = load_experiment_config(path)
    assert config.train_manifest == str(tmp_path / "tr_manifest.csv")
    assert config.policy.n_ops == 3
    assert config.policy.magnitude == 10.0
    assert config.cohort[0].model_id == "a"
    assert config.cohort[0].hidden_widths == (8,)


def test_config_overrides_route_into_policy(tmp_path):
    path = write_config(tmp_path / "exp.json")
    config = load_experiment_config(
        path, overrides={"magnitude": 25.0, "master_seed": 9,
                         "reduce_dim": 16, "n_ops": None})
    assert config.policy.magnitude == 25.0
    assert config.policy.master_seed == 9
    assert config.policy.n_ops == 3  # None override leaves the file value
    assert config.reduce_dim == 16


def test_config_rejects_unknown_keys(tmp_path):
    path = write_config(tmp_path / "exp.json", typo_key=1)
    with pytest.raises(ConfigError, match="typo_key"):
        load_experiment_config(path)


def test_config_rejects_unknown_policy_keys(tmp_path):
    path = write_config(tmp_path / "exp.json",
                        policy={"n_ops": 2, "strength": 5})
    with pytest.raises(ConfigError, match="strength"):
        load_experiment_config(path)


def test_config_requires_manifests(tmp_path):
    obj = {"policy": {"n_ops": 2}}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    with pytest.raises(ConfigError, match="train_manifest"):
        load_experiment_config(path)


def test_config_rejects_invalid_json(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_experiment_config(path)
