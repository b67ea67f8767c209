"""How the correlation responds to the distortion policy.

Trains one cohort, then reuses it across every cell of two sweeps:

* an operator-count x magnitude grid, which shows that very weak distortion
  carries little ranking signal (the transformed images are nearly the
  training images, so every well-fit model looks alike);
* a single-operator sweep, which ranks each operator by how informative it
  is on its own.  The Identity row is a built-in control: it must equal the
  plain train-vs-test correlation exactly.

Run from the repository root:

    python demos/ablation_sweep.py --out demo_out/ablation
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from contre import (AugmentPolicy, ExperimentConfig, default_cohort,
                    sweep_nm, sweep_single_ops, write_shapes_data)
from contre.harness import _Workbench


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo_out/ablation")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--train-size", type=int, default=300)
    parser.add_argument("--test-size", type=int, default=300)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out)
    train = write_shapes_data(out / "data", args.train_size, args.seed, "tr")
    test = write_shapes_data(out / "data", args.test_size,
                             args.seed + 1000003, "te")
    config = ExperimentConfig(
        train_manifest=train, test_manifest=test,
        cohort=default_cohort(args.seed),
        policy=AugmentPolicy(master_seed=args.seed))
    bench = _Workbench(config)

    n_values = (1, 2, 3)
    m_values = (4.0, 12.0, 20.0, 28.0)
    cells = sweep_nm(config, out, n_values, m_values, workbench=bench)
    print()
    print("spearman(test accuracy, contrastive accuracy) per (N, M) cell")
    header = "      " + "".join(f"M={m:<8g}" for m in m_values)
    print(header)
    for n in n_values:
        row = [c for c in cells if c["n_ops"] == n]
        text = "".join(
            f"{c['spearman_test_contre']:+.3f}   "
            if c["spearman_test_contre"] is not None else "  n/a     "
            for c in row)
        print(f"N={n}   {text}")

    singles = sweep_single_ops(config, out, workbench=bench)
    singles.sort(key=lambda c: -(c["spearman_test_contre"] or -2))
    print()
    print("single-operator correlations, strongest first")
    for cell in singles:
        value = cell["spearman_test_contre"]
        text = "undefined" if value is None else f"{value:+.3f}"
        print(f"  {cell['op']:13s} {text}")

    print()
    print(f"grids written to {out / 'sweep_nm.csv'} and "
          f"{out / 'sweep_single_ops.csv'}")


if __name__ == "__main__":
    main()
