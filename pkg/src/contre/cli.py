"""Command line front end.

Verbs:

* ``gen``        render contrastive views for a dataset manifest
* ``score``      accuracy tables from prediction files
* ``correlate``  full correlation/consistency/Fisher report from predictions
* ``fisher``     Fisher-ratio feature analysis only
* ``sweep``      operator-count/magnitude, single-op, or op-pair sweeps
* ``e2e``        self-contained run on the synthetic shapes task
* ``report``     re-emit plots and a summary from an existing report

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
statistics (the report is still written; the affected values are null with
a reason attached).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy, generate_contrastive_set
from .data_io import (SCHEMA_VERSION, read_manifest, read_predictions,
                      read_report, score, write_report)
from .errors import ConfigError, ContreError, DataError, DegenerateStatistics
from .harness import (SOFTWARE_VERSION, _Workbench, assemble_report,
                      build_fisher, emit_plots, load_experiment_config,
                      run_e2e, run_pipeline, sweep_nm, sweep_pairs,
                      sweep_single_ops)

log = logging.getLogger("contre")


def _add_policy_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None,
                        help="operators per view (default 2)")
    parser.add_argument("--m", type=float, default=None,
                        help="shared magnitude in [0, 30] (default 20)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (default 0)")


def _add_analysis_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--reduce-dim", type=int, default=64,
                        help="feature projection dimension (default 64)")
    parser.add_argument("--within-weighting", default="standard",
                        choices=("standard", "paper_literal"),
                        help="within-class scatter weighting")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contre",
        description="Generalization estimation from contrastive examples")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="suppress progress logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="render contrastive views")
    p.add_argument("--data", required=True, help="dataset manifest CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--views", type=int, default=1,
                   help="views per sample (default 1)")
    p.add_argument("--ops", default=None,
                   help="comma-separated operator pool (default: all)")
    _add_policy_flags(p)

    p = sub.add_parser("score", help="accuracy per model and view")
    p.add_argument("--pred", required=True, nargs="+",
                   help="prediction JSONL files")
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("correlate", help="correlation report from predictions")
    p.add_argument("--pred", required=True, nargs="+")
    p.add_argument("--out", required=True, help="report JSON path")
    _add_analysis_flags(p)

    p = sub.add_parser("fisher", help="Fisher-ratio feature analysis")
    p.add_argument("--pred", required=True, nargs="+")
    p.add_argument("--out", required=True, help="output JSON path")
    _add_analysis_flags(p)

    p = sub.add_parser("sweep", help="policy sweeps over a trained cohort")
    p.add_argument("--mode", required=True, choices=("nm", "single", "pairs"))
    p.add_argument("--config", required=True,
                   help="experiment config JSON (manifests plus cohort)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-grid", default="1,2,3",
                   help="comma-separated operator counts (mode nm)")
    p.add_argument("--m-grid", default="4,12,20,28",
                   help="comma-separated magnitudes (mode nm)")
    p.add_argument("--ops", default=None,
                   help="comma-separated operators (modes single/pairs)")
    _add_policy_flags(p)

    p = sub.add_parser("e2e", help="synthetic end-to-end run")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--views", type=int, default=1)
    p.add_argument("--train-size", type=int, default=300)
    p.add_argument("--test-size", type=int, default=300)
    _add_policy_flags(p)
    _add_analysis_flags(p)

    p = sub.add_parser("report", help="plots and summary from a report")
    p.add_argument("--report", required=True, help="existing report JSON")
    p.add_argument("--out", required=True, help="directory for plots")
    return parser


def _collect_records(paths):
    for path in paths:
        yield from read_predictions(path)


def _scores_obj(tables) -> dict:
    return {view.view: [{"model_id": r.model_id, "accuracy": r.accuracy,
                         "sample_count": r.sample_count}
                        for r in view.rows] for view in tables}


def _features_from_records(records) -> dict:
    grouped: dict = {}
    for rec in records:
        if rec.feature is None or rec.view not in ("train_orig",
                                                   "train_contre"):
            continue
        entry = grouped.setdefault(rec.model_id, {}).setdefault(
            rec.view, ([], []))
        entry[0].append(rec.feature)
        entry[1].append(rec.label)
    return {model: {view: (np.stack(feats).astype(np.float64),
                           np.array(labels, dtype=np.int64))
                    for view, (feats, labels) in views.items()}
            for model, views in grouped.items()}


def _print_summary(report: dict) -> None:
    for name, entry in report["correlations"].items():
        value = entry.get("value")
        text = "undefined" if value is None else f"{value:+.4f}"
        print(f"{name}: {text} ({len(entry['model_ids'])} models)")
    for note in report["notes"]:
        print(f"note: {note}")


def _cmd_gen(args) -> int:
    pool = tuple(args.ops.split(",")) if args.ops else None
    policy = AugmentPolicy(
        n_ops=args.n if args.n is not None else 2,
        magnitude=args.m if args.m is not None else 20.0,
        master_seed=args.seed if args.seed is not None else 0,
        **({"op_pool": pool} if pool else {}))
    rows = read_manifest(args.data)
    result = generate_contrastive_set(policy, rows, args.out,
                                      views_per_sample=args.views)
    print(f"wrote {len(result.views)} views; manifest: "
          f"{result.manifest_path}")
    return 0


def _cmd_score(args) -> int:
    tables = score(_collect_records(args.pred))
    obj = {"schema_version": SCHEMA_VERSION, "scores": _scores_obj(tables)}
    Path(args.out).write_text(json.dumps(obj, indent=2) + "\n",
                              encoding="utf-8")
    for table in tables:
        for row in table.rows:
            print(f"{row.model_id} {table.view}: {row.accuracy:.4f} "
                  f"({row.sample_count} records)")
    return 0


def _cmd_correlate(args) -> int:
    records = list(_collect_records(args.pred))
    tables = score(records)
    features = _features_from_records(records)
    extra_notes: list[str] = []
    fisher_block = build_fisher(features, args.reduce_dim,
                                args.within_weighting, extra_notes) \
        if features else None
    config_block = {
        "software_version": SOFTWARE_VERSION,
        "source": "correlate",
        "predictions": [Path(p).name for p in args.pred],
        "reduce_dim": args.reduce_dim,
        "within_weighting": args.within_weighting,
    }
    report, degenerate = assemble_report(config_block, tables, fisher_block,
                                         extra_notes)
    write_report(report, args.out)
    _print_summary(report)
    print(f"report written to {args.out}")
    return 4 if degenerate else 0


def _cmd_fisher(args) -> int:
    records = list(_collect_records(args.pred))
    features = _features_from_records(records)
    if not features:
        raise DataError("no feature vectors found in the prediction files")
    notes: list[str] = []
    block = build_fisher(features, args.reduce_dim, args.within_weighting,
                         notes)
    obj = {"schema_version": SCHEMA_VERSION, "fisher": block, "notes": notes}
    Path(args.out).write_text(json.dumps(obj, indent=2) + "\n",
                              encoding="utf-8")
    degenerate = False
    for row in block["per_model"]:
        for view, entry in row["views"].items():
            value = entry["value"]
            degenerate |= value is None
            text = "undefined" if value is None else f"{value:.6g}"
            print(f"{row['model_id']} {view}: fisher={text} "
                  f"(dim {entry['dim']}, retained "
                  f"{entry['retained_variance']:.4f})")
    return 4 if degenerate else 0


def _policy_overrides(args) -> dict:
    return {"n_ops": args.n, "magnitude": args.m, "master_seed": args.seed}


def _cmd_sweep(args) -> int:
    config = load_experiment_config(args.config,
                                    overrides=_policy_overrides(args))
    bench = _Workbench(config)
    if args.mode == "nm":
        try:
            n_values = [int(v) for v in args.n_grid.split(",") if v]
            m_values = [float(v) for v in args.m_grid.split(",") if v]
        except ValueError as exc:
            raise ConfigError(f"bad sweep grid: {exc}") from None
        cells = sweep_nm(config, args.out, n_values, m_values,
                         workbench=bench)
        for cell in cells:
            value = cell["spearman_test_contre"]
            text = "undefined" if value is None else f"{value:+.4f}"
            print(f"n={cell['n_ops']} m={cell['magnitude']:g}: {text}")
    else:
        ops = tuple(args.ops.split(",")) if args.ops else \
            config.policy.op_pool
        runner = sweep_single_ops if args.mode == "single" else sweep_pairs
        cells = runner(config, args.out, ops, workbench=bench)
        print(f"{len(cells)} cells written")
    return 0


def _cmd_e2e(args) -> int:
    result = run_e2e(
        args.out,
        seed=args.seed if args.seed is not None else 7,
        n_train=args.train_size, n_test=args.test_size,
        n_ops=args.n if args.n is not None else 2,
        magnitude=args.m if args.m is not None else 20.0,
        views_per_sample=args.views, reduce_dim=args.reduce_dim,
        within_weighting=args.within_weighting)
    _print_summary(result.report)
    print(f"report written to {result.report_path}")
    return 4 if result.degenerate else 0


def _cmd_report(args) -> int:
    report = read_report(args.report)
    paths = emit_plots(report, args.out)
    _print_summary(report)
    for path in paths:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "score": _cmd_score,
    "correlate": _cmd_correlate,
    "fisher": _cmd_fisher,
    "sweep": _cmd_sweep,
    "e2e": _cmd_e2e,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        stream=sys.stderr, format="%(message)s")
    try:
        return _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateStatistics as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ContreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
