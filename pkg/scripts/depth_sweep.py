#!/usr/bin/env python3
"""Cross-validated RMSE of a single regression tree across depth limits.

Prints one row per depth and optionally writes the table as CSV, e.g.

    python3 scripts/depth_sweep.py --depths 1,2,3,4,5,6,8,10 --out depth.csv
"""

import argparse
import sys

import numpy as np

from _common import add_data_args, load_examples
from shadecount.evaluation import cross_validate
from shadecount.tree import TreeConfig, tree_fitter


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_data_args(parser)
    parser.add_argument("--depths", default="1,2,3,4,5,6,8,10")
    parser.add_argument("--min-samples-split", type=int, default=2)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    X, y, dates, plan = load_examples(args)
    depths = [int(s) for s in args.depths.split(",") if s]

    print(f"{len(y)} examples, {plan.k} folds")
    print("depth  rmse_mean  rmse_std")
    lines = ["depth,rmse_mean,rmse_std"]
    for depth in depths:
        config = TreeConfig(max_depth=depth,
                            min_samples_split=args.min_samples_split)
        report = cross_validate(X, y, dates, plan, tree_fitter(config),
                                jobs=args.jobs)
        std = float(np.std(report.per_fold_rmse))
        print(f"{depth:5d}  {report.overall_rmse:9.3f}  {std:8.3f}")
        lines.append(f"{depth},{report.overall_rmse!r},{std!r}")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
