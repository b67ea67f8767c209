"""A first full run: does a model's accuracy on distorted copies of its own
training images predict its accuracy on unseen data?

The script renders a small synthetic shapes dataset, trains the built-in
ten-model cohort (capacities from a linear probe to a 128-unit MLP, training
lengths from 2 to 100 epochs, two label-noise levels), transforms the
training images with two random operators at magnitude 20 per view, and rank
correlates per-model accuracies.  Nothing here reads the test set until the
final comparison, which is the point: the contrastive accuracy is computed
from training data alone.

Run from the repository root:

    python demos/quickstart.py --out demo_out/quickstart
"""

from __future__ import annotations

import argparse
import logging

from contre import run_e2e


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo_out/quickstart")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--train-size", type=int, default=300)
    parser.add_argument("--test-size", type=int, default=300)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    result = run_e2e(args.out, seed=args.seed, n_train=args.train_size,
                     n_test=args.test_size)

    report = result.report
    print()
    print("per-model accuracies")
    print(f"{'model':12s} {'train':>7s} {'contre':>7s} {'test':>7s}")
    views = report["scores"]["views"]
    by_model = {
        view: {row["model_id"]: row["accuracy"] for row in rows}
        for view, rows in views.items()}
    for model_id in sorted(by_model["test_orig"]):
        print(f"{model_id:12s}"
              f" {by_model['train_orig'][model_id]:7.3f}"
              f" {by_model['train_contre'][model_id]:7.3f}"
              f" {by_model['test_orig'][model_id]:7.3f}")

    print()
    print("rank correlations with test accuracy")
    corr = report["correlations"]
    for key, label in [
            ("test_vs_contre", "contrastive accuracy"),
            ("test_vs_train", "plain training accuracy"),
            ("partial_test_contre_given_train",
             "contrastive, controlling for training accuracy"),
            ("test_vs_fisher_contre", "Fisher ratio of contrastive features")]:
        value = corr[key]["value"]
        text = "undefined" if value is None else f"{value:+.3f}"
        print(f"  {label}: {text}")

    print()
    print(f"full report: {result.report_path}")
    print(f"scatter plots: {', '.join(sorted(result.plot_paths))}")


if __name__ == "__main__":
    main()
