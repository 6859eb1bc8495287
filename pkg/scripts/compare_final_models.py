#!/usr/bin/env python3
"""Three-model comparison at the final operating points.

Cross-validates a depth-5 tree, a 10-tree depth-5 forest, and a 3x16 adam
network on the same day folds, then prints the comparison table plus the
per-day RMSE quartiles of the best model.
"""

import argparse
import sys

from _common import add_data_args, load_examples
from shadecount.evaluation import (
    compare_models,
    cross_validate,
    quartile_summary,
    render_comparison,
)
from shadecount.forest import ForestConfig, forest_fitter
from shadecount.nn import NetConfig, nn_fitter
from shadecount.tree import TreeConfig, tree_fitter


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_data_args(parser)
    parser.add_argument("--epochs", type=int, default=150)
    parser.add_argument("--model-seed", type=int, default=42)
    args = parser.parse_args()

    X, y, dates, plan = load_examples(args)
    tree_cfg = TreeConfig(max_depth=5)
    fitters = {
        "decision_tree": tree_fitter(tree_cfg),
        "random_forest": forest_fitter(ForestConfig(
            n_trees=10, tree_config=tree_cfg, seed=args.model_seed)),
        "neural_network": nn_fitter(NetConfig(
            hidden_layers=3, width=16, epochs=args.epochs,
            seed=args.model_seed)),
    }
    rows = compare_models(X, y, dates, plan, fitters, jobs=args.jobs)
    print(render_comparison(rows))

    best = min(rows, key=lambda r: r.rmse)
    report = cross_validate(X, y, dates, plan, fitters[best.model],
                            jobs=args.jobs)
    q = quartile_summary(report.per_day_rmse)
    print(f"\nbest model: {best.model}")
    print(f"per-day RMSE quartiles: Q1 {q.q1:.2f}, median {q.median:.2f}, "
          f"Q3 {q.q3:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
