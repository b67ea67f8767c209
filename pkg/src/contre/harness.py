"""End-to-end orchestration: generate views, collect predictions, analyze.

``run_pipeline`` wires the full flow for a cohort of reference models plus
any externally produced prediction files: contrastive view generation,
prediction, accuracy tables, rank correlations, consistency gaps, and
Fisher-ratio feature analysis, all persisted as a report plus plot
artifacts.  The sweeps reuse one trained cohort across every cell, so grid
position and evaluation order cannot affect any cell's result.

Reports contain no timestamps and only out_dir-relative paths, so running
the same experiment twice (in different directories) produces byte-identical
report and plot files.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augment import (AugmentPolicy, GenerationResult, _fnv1a,
                      generate_contrastive_set, render_view, sample_view)
from .data_io import (ManifestRow, PredictionRecord, SCHEMA_VERSION, ScoreTable,
                      read_manifest, read_predictions, score, write_manifest,
                      write_predictions, write_report)
from .errors import (ConfigError, DataError, DegenerateStatistics,
                     InsufficientCohort, SingularWithin)
from .image_ops import OP_NAMES
from .plots import write_scatter
from .png_io import decode_png, encode_png
from .reference_model import (ModelConfig, TrainedModel,
                              extract_features_batch, make_shapes_dataset,
                              predict_batch, train)
from .stats import (consistency, fisher_ratio, partial_from_pairwise,
                    scatter_matrices, spearman, svd_reduce)

log = logging.getLogger("contre")

SOFTWARE_VERSION = "0.1.0"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a pipeline run depends on."""

    train_manifest: str
    test_manifest: str
    cohort: tuple[ModelConfig, ...] = ()
    external_predictions: tuple[str, ...] = ()
    policy: AugmentPolicy = field(default_factory=AugmentPolicy)
    views_per_sample: int = 1
    transform_test: bool = False
    include_features: bool = True
    reduce_dim: int = 64
    within_weighting: str = "standard"

    def __post_init__(self):
        if self.views_per_sample < 1:
            raise ConfigError(f"views_per_sample must be >= 1, got "
                              f"{self.views_per_sample}")
        if self.reduce_dim < 1:
            raise ConfigError(f"reduce_dim must be >= 1, got "
                              f"{self.reduce_dim}")
        if self.within_weighting not in ("standard", "paper_literal"):
            raise ConfigError(f"within_weighting must be 'standard' or "
                              f"'paper_literal', got "
                              f"{self.within_weighting!r}")
        ids = [m.model_id for m in self.cohort]
        if len(set(ids)) != len(ids):
            raise ConfigError("cohort contains duplicate model ids")


@dataclass
class PipelineResult:
    report: dict
    report_path: str
    out_dir: str
    prediction_paths: list[str]
    plot_paths: list[str]
    degenerate: bool


def default_cohort(seed: int = 0) -> tuple[ModelConfig, ...]:
    """Ten reference models spanning capacity, training length, and label
    noise, so their test accuracies spread over a wide range.

    The mix matters for rank analysis: under-trained models keep training
    accuracy informative, saturated models only differ in robustness, and
    label-noise models fit their training set better than they generalize.
    """
    specs = [
        ("lin_short", (), 2, 0.0),
        ("lin_mid", (), 6, 0.0),
        ("lin_long", (), 24, 0.0),
        ("w4_short", (4,), 2, 0.0),
        ("w8_long", (8,), 24, 0.0),
        ("w16_mid", (16,), 8, 0.0),
        ("w32_short", (32,), 2, 0.0),
        ("w128_long", (128,), 24, 0.0),
        ("mem_light", (128,), 100, 0.2),
        ("mem_mid", (128,), 100, 0.35),
    ]
    # Seeds are salted by name, not list position, so editing the roster
    # never silently retrains the survivors.
    return tuple(
        ModelConfig(model_id=name, hidden_widths=widths, epochs=epochs,
                    label_noise=noise,
                    init_seed=seed * 1009 + _fnv1a(name.encode()) % 100003)
        for name, widths, epochs, noise in specs)


# --- data loading ------------------------------------------------------------

def _load_images(rows: Sequence[ManifestRow]) -> tuple[np.ndarray, np.ndarray,
                                                        list[str]]:
    """Decode every manifest row, sorted by sample id, into one batch."""
    ordered = sorted(rows, key=lambda r: r.sample_id)
    images = np.stack([decode_png(r.path) for r in ordered])
    labels = np.array([r.label for r in ordered], dtype=np.int64)
    ids = [r.sample_id for r in ordered]
    return images, labels, ids


def _predict_records(model: TrainedModel, images: np.ndarray,
                     labels: np.ndarray, ids: Sequence[str], view: str,
                     view_indices: Sequence[int],
                     with_features: bool) -> list[PredictionRecord]:
    preds = predict_batch(model, images)
    feats = extract_features_batch(model, images).astype(np.float32) \
        if with_features else None
    records = []
    for i, sid in enumerate(ids):
        records.append(PredictionRecord(
            model_id=model.config.model_id, view=view, sample_id=sid,
            view_index=int(view_indices[i]), label=int(labels[i]),
            pred=int(preds[i]),
            feature=None if feats is None else feats[i],
            feature_dim=None if feats is None else int(feats.shape[1])))
    return records


# --- analysis blocks ---------------------------------------------------------

def _tables_by_view(tables: Iterable[ScoreTable]) -> dict[str, dict[str, ...]]:
    by_view: dict[str, dict] = {}
    for table in tables:
        by_view[table.view] = {row.model_id: row for row in table.rows}
    return by_view


def _paired(by_view: dict, view_x: str, view_y: str
            ) -> tuple[list[str], list[float], list[float]]:
    ids = sorted(set(by_view.get(view_x, {})) & set(by_view.get(view_y, {})))
    xs = [by_view[view_x][m].accuracy for m in ids]
    ys = [by_view[view_y][m].accuracy for m in ids]
    return ids, xs, ys


def _corr_entry(ids: list[str], xs: list[float], ys: list[float],
                x_name: str, y_name: str, notes: list[str]
                ) -> tuple[dict, bool]:
    """One correlation entry; degenerate statistics become value null plus a
    reason, never a silent NaN."""
    entry: dict = {"x": x_name, "y": y_name, "model_ids": ids}
    if len(ids) < 3:
        raise InsufficientCohort(
            f"need at least 3 models with both {x_name} and {y_name}, "
            f"got {len(ids)}")
    try:
        entry["value"] = spearman(xs, ys)
        return entry, False
    except DegenerateStatistics as exc:
        entry["value"] = None
        entry["note"] = str(exc)
        notes.append(f"{y_name} vs {x_name}: {exc}")
        return entry, True


def build_correlations(tables: Iterable[ScoreTable],
                       fisher_per_model: dict[str, dict] | None = None
                       ) -> tuple[dict, dict, list[str], bool]:
    """Correlation block, consistency rows, notes, and a degenerate flag.

    Requires test_orig and train_contre accuracies; train_orig additionally
    enables the train-accuracy-controlled partial correlation and the
    consistency gaps.  ``fisher_per_model`` maps model_id to per-view Fisher
    entries (value or null) and enables the feature-based correlations.
    """
    by_view = _tables_by_view(tables)
    if "test_orig" not in by_view or "train_contre" not in by_view:
        raise DataError("correlation analysis requires test_orig and "
                        "train_contre records")
    notes: list[str] = []
    degenerate = False
    block: dict = {}

    ids, contre_acc, test_acc = _paired(by_view, "train_contre", "test_orig")
    entry, bad = _corr_entry(ids, contre_acc, test_acc,
                             "train_contre:accuracy", "test_orig:accuracy",
                             notes)
    block["test_vs_contre"] = entry
    degenerate |= bad

    have_train = "train_orig" in by_view
    if have_train:
        ids_t, train_acc, test_acc_t = _paired(by_view, "train_orig",
                                               "test_orig")
        entry, bad = _corr_entry(ids_t, train_acc, test_acc_t,
                                 "train_orig:accuracy", "test_orig:accuracy",
                                 notes)
        block["test_vs_train"] = entry
        degenerate |= bad

        partial_ids = sorted(set(by_view["test_orig"])
                             & set(by_view["train_contre"])
                             & set(by_view["train_orig"]))
        p_entry: dict = {"x": "train_contre:accuracy",
                         "y": "test_orig:accuracy",
                         "control": "train_orig:accuracy",
                         "model_ids": partial_ids}
        if len(partial_ids) < 3:
            raise InsufficientCohort(
                f"need at least 3 models across all three views, "
                f"got {len(partial_ids)}")
        t_acc = [by_view["test_orig"][m].accuracy for m in partial_ids]
        c_acc = [by_view["train_contre"][m].accuracy for m in partial_ids]
        tr_acc = [by_view["train_orig"][m].accuracy for m in partial_ids]
        try:
            r_xy = spearman(c_acc, t_acc)
            r_xz = spearman(c_acc, tr_acc)
            r_yz = spearman(t_acc, tr_acc)
            p_entry["value"] = partial_from_pairwise(r_xy, r_xz, r_yz)
        except DegenerateStatistics as exc:
            p_entry["value"] = None
            p_entry["note"] = str(exc)
            notes.append(f"partial correlation: {exc}")
            degenerate = True
        block["partial_test_contre_given_train"] = p_entry

    if "test_contre" in by_view:
        ids_c, contre_x, test_c = _paired(by_view, "train_contre",
                                          "test_contre")
        entry, bad = _corr_entry(ids_c, contre_x, test_c,
                                 "train_contre:accuracy",
                                 "test_contre:accuracy", notes)
        block["testcontre_vs_contre"] = entry
        degenerate |= bad

    if fisher_per_model is not None:
        for view, key in (("train_contre", "test_vs_fisher_contre"),
                          ("train_orig", "test_vs_fisher_orig")):
            ids_f = sorted(m for m, per_view in fisher_per_model.items()
                           if per_view.get(view, {}).get("value") is not None
                           and m in by_view["test_orig"])
            entry = {"x": f"{view}:fisher_ratio", "y": "test_orig:accuracy",
                     "model_ids": ids_f}
            if len(ids_f) < 3:
                entry["value"] = None
                entry["note"] = (f"fewer than 3 models carry a Fisher ratio "
                                 f"on {view}")
                notes.append(entry["note"])
            else:
                fx = [fisher_per_model[m][view]["value"] for m in ids_f]
                ty = [by_view["test_orig"][m].accuracy for m in ids_f]
                e2, bad = _corr_entry(ids_f, fx, ty,
                                      f"{view}:fisher_ratio",
                                      "test_orig:accuracy", notes)
                entry = e2
                degenerate |= bad
            block[key] = entry

    consistency_rows: dict = {"definition":
                              "train_orig accuracy - train_contre accuracy",
                              "per_model": []}
    if have_train:
        gap_ids = sorted(set(by_view["train_orig"])
                         & set(by_view["train_contre"]))
        for m in gap_ids:
            value = consistency(by_view["train_orig"][m].accuracy,
                                by_view["train_contre"][m].accuracy)
            consistency_rows["per_model"].append({"model_id": m,
                                                  "value": value})
    return block, consistency_rows, notes, degenerate


def build_fisher(features_by_model: dict[str, dict[str, tuple]],
                 reduce_dim: int, within_weighting: str,
                 notes: list[str]) -> dict:
    """Per-model Fisher ratios on the feature views that carry features.

    Features are centered and projected with svd_reduce to at most
    ``reduce_dim`` dimensions, clamped to the data's numerical rank so
    zero-variance directions (dead units) never reach the scatter matrices.
    A numerically singular within-class scatter is retried once with a small
    trace-scaled ridge; if that also fails the value is null with a reason.
    """
    per_model = []
    for model_id in sorted(features_by_model):
        views_out: dict = {}
        for view in sorted(features_by_model[model_id]):
            feats, labels = features_by_model[model_id][view]
            n, d = feats.shape
            singular = np.linalg.svd(feats - feats.mean(axis=0),
                                     compute_uv=False)
            rank = int(np.sum(singular > singular[0] * 1e-10)) \
                if singular[0] > 0 else 0
            target = max(min(reduce_dim, rank), 1)
            reduced, retained = svd_reduce(feats, target)
            entry: dict = {"dim": target,
                           "retained_variance": retained,
                           "ridge": 0.0}
            pair = scatter_matrices(reduced, labels,
                                    within_weighting=within_weighting)
            try:
                entry["value"] = fisher_ratio(pair)
            except SingularWithin:
                ridge = 1e-8 * max(float(np.trace(pair.s_w)) / target, 1.0)
                entry["ridge"] = ridge
                try:
                    entry["value"] = fisher_ratio(pair, ridge=ridge)
                    notes.append(f"{model_id}/{view}: within-class scatter "
                                 f"singular; used ridge {ridge:.3e}")
                except SingularWithin as exc:
                    entry["value"] = None
                    entry["note"] = str(exc)
                    notes.append(f"{model_id}/{view}: {exc}")
            views_out[view] = entry
        per_model.append({"model_id": model_id, "views": views_out})
    return {"within_weighting": within_weighting,
            "reduce_dim": reduce_dim,
            "per_model": per_model}


def _scores_block(tables: Iterable[ScoreTable]) -> dict:
    views: dict = {}
    for table in tables:
        views[table.view] = [
            {"model_id": r.model_id, "accuracy": r.accuracy,
             "sample_count": r.sample_count} for r in table.rows]
    return {"views": views}


def _policy_dict(policy: AugmentPolicy) -> dict:
    return {"n_ops": policy.n_ops, "magnitude": policy.magnitude,
            "op_pool": list(policy.op_pool),
            "master_seed": policy.master_seed,
            "sequence": None if policy.sequence is None
            else list(policy.sequence)}


def _model_dict(config: ModelConfig) -> dict:
    return {"model_id": config.model_id,
            "hidden_widths": list(config.hidden_widths),
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "weight_decay": config.weight_decay,
            "batch_size": config.batch_size,
            "init_seed": config.init_seed,
            "label_noise": config.label_noise}


def _portable_path(path: str, out_dir: Path) -> str:
    """Relative to out_dir when inside it (keeps reports byte-identical
    across working directories), otherwise as given."""
    try:
        return Path(path).resolve().relative_to(out_dir.resolve()).as_posix()
    except ValueError:
        return path


def _config_block(config: ExperimentConfig, out_dir: Path) -> dict:
    return {
        "software_version": SOFTWARE_VERSION,
        "train_manifest": _portable_path(config.train_manifest, out_dir),
        "test_manifest": _portable_path(config.test_manifest, out_dir),
        "policy": _policy_dict(config.policy),
        "views_per_sample": config.views_per_sample,
        "transform_test": config.transform_test,
        "include_features": config.include_features,
        "reduce_dim": config.reduce_dim,
        "within_weighting": config.within_weighting,
        "cohort": [_model_dict(m) for m in config.cohort],
        "external_predictions": [
            _portable_path(p, out_dir) for p in config.external_predictions],
    }


_BASE_NOTES = (
    "operator pool covers the 16 pixel and geometry operators; no "
    "occlusion-style cutout is applied",
)


def assemble_report(config_block: dict, tables: Iterable[ScoreTable],
                    fisher_block: dict | None,
                    extra_notes: Iterable[str] = ()) -> tuple[dict, bool]:
    """Build the full report dict; returns it plus a degenerate flag."""
    tables = list(tables)
    fisher_per_model = None
    if fisher_block is not None:
        fisher_per_model = {row["model_id"]: row["views"]
                            for row in fisher_block["per_model"]}
    correlations, consistency_rows, notes, degenerate = \
        build_correlations(tables, fisher_per_model)
    scores = _scores_block(tables)
    scores["consistency"] = consistency_rows
    all_notes = list(_BASE_NOTES) + list(extra_notes) + notes
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": config_block,
        "scores": scores,
        "correlations": correlations,
        "fisher": fisher_block,
        "notes": all_notes,
    }
    return report, degenerate


def emit_plots(report: dict, out_dir: str | os.PathLike) -> list[str]:
    """Scatter CSV+SVG per headline figure; deterministic bytes."""
    plots_dir = Path(out_dir) / "plots"
    by_view = {view: {row["model_id"]: row["accuracy"] for row in rows}
               for view, rows in report["scores"]["views"].items()}
    written: list[str] = []

    def points_for(x_map: dict, y_map: dict) -> list:
        ids = sorted(set(x_map) & set(y_map))
        return [(x_map[m], y_map[m], m) for m in ids]

    if "train_contre" in by_view and "test_orig" in by_view:
        written += write_scatter(
            points_for(by_view["train_contre"], by_view["test_orig"]),
            plots_dir, "test_vs_contre",
            "Test accuracy vs contrastive accuracy",
            "accuracy on contrastive training views", "test accuracy")
    if "train_orig" in by_view and "test_orig" in by_view:
        written += write_scatter(
            points_for(by_view["train_orig"], by_view["test_orig"]),
            plots_dir, "test_vs_train",
            "Test accuracy vs training accuracy",
            "training accuracy", "test accuracy")
    fisher_block = report.get("fisher")
    if fisher_block and "test_orig" in by_view:
        fisher_map = {
            row["model_id"]: row["views"]["train_contre"]["value"]
            for row in fisher_block["per_model"]
            if row["views"].get("train_contre", {}).get("value") is not None}
        pts = points_for(fisher_map, by_view["test_orig"])
        if pts:
            written += write_scatter(
                pts, plots_dir, "test_vs_fisher",
                "Test accuracy vs Fisher ratio on contrastive views",
                "Fisher ratio (contrastive features)", "test accuracy")
    return written


# --- the pipeline ------------------------------------------------------------

def run_pipeline(config: ExperimentConfig,
                 out_dir: str | os.PathLike) -> PipelineResult:
    """Full flow: generate views, predict, score, correlate, report.

    Writes per-model prediction files under ``out_dir/predictions/``, the
    generated view sets under ``out_dir/contre_train/`` (and
    ``contre_test/`` when the test set is transformed too), plot artifacts
    under ``out_dir/plots/``, and ``out_dir/report.json``.
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    train_rows = read_manifest(config.train_manifest)
    test_rows = read_manifest(config.test_manifest)

    total_models = len(config.cohort) + len(config.external_predictions)
    if total_models < 3:
        raise InsufficientCohort(
            f"need at least 3 models (cohort plus external prediction "
            f"files), got {total_models}")

    log.info("generating contrastive training views (%d samples x %d)",
             len(train_rows), config.views_per_sample)
    gen_train = generate_contrastive_set(
        config.policy, train_rows, out_path / "contre_train",
        views_per_sample=config.views_per_sample)
    gen_test: GenerationResult | None = None
    if config.transform_test:
        gen_test = generate_contrastive_set(
            config.policy, test_rows, out_path / "contre_test",
            views_per_sample=config.views_per_sample)

    train_images, train_labels, train_ids = _load_images(train_rows)
    test_images, test_labels, test_ids = _load_images(test_rows)

    def load_generated(gen: GenerationResult):
        base = Path(gen.out_dir)
        images = np.stack([decode_png(base / v.path) for v in gen.views])
        labels = np.array([v.label for v in gen.views], dtype=np.int64)
        ids = [v.sample_id for v in gen.views]
        indices = [v.view_index for v in gen.views]
        return images, labels, ids, indices

    ct_images, ct_labels, ct_ids, ct_indices = load_generated(gen_train)
    if gen_test is not None:
        tt_images, tt_labels, tt_ids, tt_indices = load_generated(gen_test)

    records: list[PredictionRecord] = []
    prediction_paths: list[str] = []
    pred_dir = out_path / "predictions"
    pred_dir.mkdir(exist_ok=True)
    for model_config in config.cohort:
        log.info("training %s", model_config.model_id)
        model = train(model_config, train_images, train_labels)
        model_records = []
        model_records += _predict_records(
            model, train_images, train_labels, train_ids, "train_orig",
            [0] * len(train_ids), config.include_features)
        model_records += _predict_records(
            model, ct_images, ct_labels, ct_ids, "train_contre", ct_indices,
            config.include_features)
        model_records += _predict_records(
            model, test_images, test_labels, test_ids, "test_orig",
            [0] * len(test_ids), False)
        if gen_test is not None:
            model_records += _predict_records(
                model, tt_images, tt_labels, tt_ids, "test_contre",
                tt_indices, False)
        path = pred_dir / f"{model_config.model_id}.jsonl"
        write_predictions(model_records, path)
        prediction_paths.append(str(path))
        records += model_records

    for external in config.external_predictions:
        log.info("reading external predictions %s", external)
        records += list(read_predictions(external))

    tables = score(records)

    fisher_block = None
    extra_notes: list[str] = []
    if config.include_features:
        features_by_model: dict[str, dict[str, tuple]] = {}
        grouped_feats: dict[tuple[str, str], list] = {}
        grouped_labels: dict[tuple[str, str], list] = {}
        for rec in records:
            if rec.feature is None or rec.view not in ("train_orig",
                                                       "train_contre"):
                continue
            key = (rec.model_id, rec.view)
            grouped_feats.setdefault(key, []).append(rec.feature)
            grouped_labels.setdefault(key, []).append(rec.label)
        for (model_id, view), feats in grouped_feats.items():
            features_by_model.setdefault(model_id, {})[view] = (
                np.stack(feats).astype(np.float64),
                np.array(grouped_labels[(model_id, view)], dtype=np.int64))
        if features_by_model:
            fisher_block = build_fisher(features_by_model, config.reduce_dim,
                                        config.within_weighting, extra_notes)

    report, degenerate = assemble_report(
        _config_block(config, out_path), tables, fisher_block, extra_notes)
    report_path = out_path / "report.json"
    write_report(report, report_path)
    plot_paths = emit_plots(report, out_path)
    log.info("report written to %s", report_path)
    return PipelineResult(report=report, report_path=str(report_path),
                          out_dir=str(out_path),
                          prediction_paths=prediction_paths,
                          plot_paths=plot_paths, degenerate=degenerate)


# --- sweeps ------------------------------------------------------------------

class _Workbench:
    """One trained cohort reused across sweep cells.

    Contrastive views for each cell are rendered in memory with the same
    per-(sample, view) seed derivation the file-based generator uses, so a
    cell's accuracies match a fresh file-based pipeline run exactly, and no
    cell can see another cell's state.
    """

    def __init__(self, config: ExperimentConfig):
        if len(config.cohort) < 3:
            raise InsufficientCohort(
                f"sweeps re-predict per cell, which needs a trained cohort "
                f"of at least 3 models, got {len(config.cohort)}")
        self.config = config
        train_rows = read_manifest(config.train_manifest)
        test_rows = read_manifest(config.test_manifest)
        self.train_images, self.train_labels, self.train_ids = \
            _load_images(train_rows)
        test_images, test_labels, _ = _load_images(test_rows)
        self.models = []
        for model_config in config.cohort:
            log.info("training %s", model_config.model_id)
            self.models.append(train(model_config, self.train_images,
                                     self.train_labels))
        self.test_acc = {}
        self.train_acc = {}
        for model in self.models:
            preds = predict_batch(model, test_images)
            self.test_acc[model.config.model_id] = \
                float(np.mean(preds == test_labels))
            preds = predict_batch(model, self.train_images)
            self.train_acc[model.config.model_id] = \
                float(np.mean(preds == self.train_labels))

    def contre_accuracies(self, policy: AugmentPolicy) -> dict[str, float]:
        views = []
        for i, sid in enumerate(self.train_ids):
            for k in range(1, self.config.views_per_sample + 1):
                desc = sample_view(policy, sid, k)
                views.append(render_view(desc, policy.magnitude,
                                         self.train_images[i]))
        batch = np.stack(views)
        labels = np.repeat(self.train_labels, self.config.views_per_sample)
        return {model.config.model_id:
                float(np.mean(predict_batch(model, batch) == labels))
                for model in self.models}

    def cell_correlation(self, policy: AugmentPolicy
                         ) -> tuple[float | None, str]:
        accs = self.contre_accuracies(policy)
        ids = sorted(accs)
        try:
            value = spearman([accs[m] for m in ids],
                             [self.test_acc[m] for m in ids])
            return value, ""
        except DegenerateStatistics as exc:
            return None, str(exc)


def _write_rows_csv(path: Path, header: str, rows: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")


def _cell_text(value: float | None) -> str:
    return "" if value is None else repr(value)


def sweep_nm(config: ExperimentConfig, out_dir: str | os.PathLike,
             n_values: Sequence[int] = (1, 2, 3),
             m_values: Sequence[float] = (4.0, 12.0, 20.0, 28.0),
             workbench: _Workbench | None = None) -> list[dict]:
    """Correlation per (n_ops, magnitude) grid cell; writes sweep_nm.csv.

    Cells are written in sorted (n, m) order and each depends only on the
    policy seeds, never on evaluation order.
    """
    bench = workbench or _Workbench(config)
    cells = []
    for n in sorted(set(n_values)):
        for m in sorted(set(m_values)):
            policy = replace(config.policy, n_ops=int(n), magnitude=float(m),
                             sequence=None)
            value, note = bench.cell_correlation(policy)
            cells.append({"n_ops": int(n), "magnitude": float(m),
                          "spearman_test_contre": value, "note": note})
            log.info("sweep cell n=%d m=%g -> %s", n, m, value)
    rows = [f"{c['n_ops']},{c['magnitude']!r},"
            f"{_cell_text(c['spearman_test_contre'])},{c['note']}"
            for c in cells]
    _write_rows_csv(Path(out_dir) / "sweep_nm.csv",
                    "n_ops,magnitude,spearman_test_contre,note", rows)
    return cells


def sweep_single_ops(config: ExperimentConfig, out_dir: str | os.PathLike,
                     ops: Sequence[str] = OP_NAMES,
                     workbench: _Workbench | None = None) -> list[dict]:
    """Correlation when every view applies exactly one fixed operator."""
    bench = workbench or _Workbench(config)
    cells = []
    for op in ops:
        policy = replace(config.policy, n_ops=1, sequence=(op,))
        value, note = bench.cell_correlation(policy)
        cells.append({"op": op, "spearman_test_contre": value, "note": note})
        log.info("sweep op %s -> %s", op, value)
    rows = [f"{c['op']},{_cell_text(c['spearman_test_contre'])},{c['note']}"
            for c in cells]
    _write_rows_csv(Path(out_dir) / "sweep_single_ops.csv",
                    "op,spearman_test_contre,note", rows)
    return cells


def sweep_pairs(config: ExperimentConfig, out_dir: str | os.PathLike,
                ops: Sequence[str] = OP_NAMES,
                workbench: _Workbench | None = None) -> list[dict]:
    """Correlation for every ordered operator pair (first applied first).

    Diagonal cells apply the operator twice, mirroring the off-diagonal
    two-op chains; single-op behavior is sweep_single_ops' job.
    """
    bench = workbench or _Workbench(config)
    cells = []
    for first in ops:
        for second in ops:
            policy = replace(config.policy, n_ops=2,
                             sequence=(first, second))
            value, note = bench.cell_correlation(policy)
            cells.append({"first_op": first, "second_op": second,
                          "spearman_test_contre": value, "note": note})
        log.info("sweep pairs row %s done", first)
    rows = [f"{c['first_op']},{c['second_op']},"
            f"{_cell_text(c['spearman_test_contre'])},{c['note']}"
            for c in cells]
    _write_rows_csv(Path(out_dir) / "sweep_pairs.csv",
                    "first_op,second_op,spearman_test_contre,note", rows)
    return cells


# --- synthetic end-to-end ----------------------------------------------------

def write_shapes_data(out_dir: str | os.PathLike, n: int, seed: int,
                      prefix: str) -> str:
    """Render a shapes dataset to PNG files plus a manifest; returns the
    manifest path.  Paths inside the manifest are relative to it."""
    out_path = Path(out_dir)
    (out_path / "images").mkdir(parents=True, exist_ok=True)
    images, labels = make_shapes_dataset(n, seed)
    rows = []
    for i in range(n):
        sample_id = f"{prefix}{i:04d}"
        rel = f"images/{sample_id}.png"
        encode_png(images[i], out_path / rel)
        rows.append(ManifestRow(sample_id=sample_id, path=rel,
                                label=int(labels[i])))
    manifest_path = out_path / f"{prefix}_manifest.csv"
    write_manifest(rows, manifest_path)
    return str(manifest_path)


def run_e2e(out_dir: str | os.PathLike, seed: int = 7, n_train: int = 300,
            n_test: int = 300, n_ops: int = 2, magnitude: float = 20.0,
            views_per_sample: int = 1, reduce_dim: int = 64,
            within_weighting: str = "standard",
            cohort: tuple[ModelConfig, ...] | None = None) -> PipelineResult:
    """Self-contained run on the synthetic shapes task.

    Renders train and test sets under ``out_dir/data/``, trains the default
    ten-model cohort, and runs the full pipeline.  Every random draw descends
    from ``seed``.
    """
    out_path = Path(out_dir)
    data_dir = out_path / "data"
    train_manifest = write_shapes_data(data_dir, n_train, seed, "tr")
    test_manifest = write_shapes_data(data_dir, n_test, seed + 1000003, "te")
    config = ExperimentConfig(
        train_manifest=train_manifest,
        test_manifest=test_manifest,
        cohort=cohort if cohort is not None else default_cohort(seed),
        policy=AugmentPolicy(n_ops=n_ops, magnitude=magnitude,
                             master_seed=seed),
        views_per_sample=views_per_sample,
        reduce_dim=reduce_dim,
        within_weighting=within_weighting)
    return run_pipeline(config, out_path)


# --- experiment config files -------------------------------------------------

_CONFIG_KEYS = {"train_manifest", "test_manifest", "cohort",
                "external_predictions", "policy", "views_per_sample",
                "transform_test", "include_features", "reduce_dim",
                "within_weighting"}
_POLICY_KEYS = {"n_ops", "magnitude", "op_pool", "master_seed", "sequence"}


def load_experiment_config(path: str | os.PathLike,
                           overrides: dict | None = None) -> ExperimentConfig:
    """Read an experiment config JSON file; ``overrides`` (typically from
    command-line flags) replace file values key for key.  Relative manifest
    and prediction paths are resolved against the config file's directory."""
    p = Path(path)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{p}: unknown config keys {sorted(unknown)}")
    merged = dict(obj)
    for key, value in (overrides or {}).items():
        if value is not None:
            if key in ("n_ops", "magnitude", "master_seed"):
                merged.setdefault("policy", {})
                merged["policy"] = dict(merged["policy"])
                merged["policy"][key] = value
            else:
                merged[key] = value

    def resolve(rel: str) -> str:
        return rel if os.path.isabs(rel) else str(p.parent / rel)

    try:
        policy_obj = merged.get("policy", {})
        unknown = set(policy_obj) - _POLICY_KEYS
        if unknown:
            raise ConfigError(f"{p}: unknown policy keys {sorted(unknown)}")
        policy = AugmentPolicy(
            n_ops=int(policy_obj.get("n_ops", 2)),
            magnitude=float(policy_obj.get("magnitude", 20.0)),
            op_pool=tuple(policy_obj.get("op_pool", OP_NAMES)),
            master_seed=int(policy_obj.get("master_seed", 0)),
            sequence=None if policy_obj.get("sequence") is None
            else tuple(policy_obj["sequence"]))
        cohort = tuple(
            ModelConfig(
                model_id=m["model_id"],
                hidden_widths=tuple(m.get("hidden_widths", (32,))),
                epochs=int(m.get("epochs", 10)),
                learning_rate=float(m.get("learning_rate", 0.05)),
                weight_decay=float(m.get("weight_decay", 1e-4)),
                batch_size=int(m.get("batch_size", 32)),
                init_seed=int(m.get("init_seed", 0)),
                label_noise=float(m.get("label_noise", 0.0)))
            for m in merged.get("cohort", ()))
        for required in ("train_manifest", "test_manifest"):
            if required not in merged:
                raise ConfigError(f"{p}: missing required key {required!r}")
        return ExperimentConfig(
            train_manifest=resolve(merged["train_manifest"]),
            test_manifest=resolve(merged["test_manifest"]),
            cohort=cohort,
            external_predictions=tuple(
                resolve(e) for e in merged.get("external_predictions", ())),
            policy=policy,
            views_per_sample=int(merged.get("views_per_sample", 1)),
            transform_test=bool(merged.get("transform_test", False)),
            include_features=bool(merged.get("include_features", True)),
            reduce_dim=int(merged.get("reduce_dim", 64)),
            within_weighting=merged.get("within_weighting", "standard"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{p}: bad config value ({exc})") from None
