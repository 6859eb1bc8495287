#!/usr/bin/env python3
"""RMSE over the (depth, n_trees) forest grid, plot-ready CSV out.

Tree counts default to a log-spaced ladder so the long flat tail past a few
dozen trees is visible without re-running the dense range:

    python3 scripts/forest_sweep.py --depths 3,5,7 --tree-counts 1,3,10,30,100
"""

import argparse
import sys

from _common import add_data_args, load_examples
from shadecount.forest import ForestConfig, sweep_forest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_data_args(parser)
    parser.add_argument("--depths", default="3,5,7")
    parser.add_argument("--tree-counts", default="1,3,10,30,100")
    parser.add_argument("--model-seed", type=int, default=42)
    parser.add_argument("--out", default="forest_sweep.csv")
    args = parser.parse_args()

    X, y, dates, plan = load_examples(args)
    depths = [int(s) for s in args.depths.split(",") if s]
    counts = [int(s) for s in args.tree_counts.split(",") if s]

    cells = sweep_forest(X, y, dates, plan, depths, counts,
                         base_config=ForestConfig(seed=args.model_seed),
                         jobs=args.jobs)

    print("depth  n_trees  rmse_mean  rmse_std")
    lines = ["depth,n_trees,rmse_mean,rmse_std"]
    for c in cells:
        mark = "  <- operating point" if (c.depth, c.n_trees) == (5, 10) else ""
        print(f"{c.depth:5d}  {c.n_trees:7d}  {c.rmse_mean:9.3f}  "
              f"{c.rmse_std:8.3f}{mark}")
        lines.append(f"{c.depth},{c.n_trees},{c.rmse_mean!r},{c.rmse_std!r}")

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
