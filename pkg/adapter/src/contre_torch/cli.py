"""Command line entry point; flags mirror AdapterConfig one to one.

Exit codes follow the pipeline's convention: 0 success, 2 configuration
error, 3 data or model error.
"""

from __future__ import annotations

import argparse
import sys

from .export import (VIEWS, AdapterConfig, ConfigError, DataError,
                     ModelLoadError, export_predictions)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contre-torch",
        description="Export PyTorch classifier predictions as JSON lines "
                    "for the contre pipeline")
    parser.add_argument("--model", required=True,
                        help="checkpoint path or torchvision model name")
    parser.add_argument("--manifest", required=True,
                        help="dataset or generation manifest CSV")
    parser.add_argument("--view", required=True, choices=VIEWS,
                        help="view tag recorded on every line")
    parser.add_argument("--out", required=True,
                        help="output JSON-lines path")
    parser.add_argument("--model-id", default=None,
                        help="model_id column (default: checkpoint stem)")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu",
                        help="torch device (default cpu)")
    parser.add_argument("--feature-layer", default=None,
                        help="module whose output is the feature vector "
                             "(default: the classifier's input)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            model=args.model, manifest=args.manifest, view=args.view,
            out=args.out, model_id=args.model_id,
            batch_size=args.batch_size, device=args.device,
            feature_layer=args.feature_layer)
        result = export_predictions(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"wrote {result.record_count} records: {result.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
