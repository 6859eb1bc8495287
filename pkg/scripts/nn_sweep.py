#!/usr/bin/env python3
"""Ranked (learning_rate, width, hidden_layers) network sweep.

The grid is the cross product of the three flag lists; rows come back sorted
by cross-validated RMSE with the parameter count alongside, so the cheap-vs-
accurate tradeoff is readable straight off the table.
"""

import argparse
import itertools
import sys

from _common import add_data_args, load_examples
from shadecount.nn import NetConfig, sweep_nn


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_data_args(parser)
    parser.add_argument("--lrs", default="0.01,0.001")
    parser.add_argument("--widths", default="16,64")
    parser.add_argument("--hidden-layer-counts", default="1,3")
    parser.add_argument("--epochs", type=int, default=150)
    parser.add_argument("--optimizer", default="adam", choices=("sgd", "adam"))
    parser.add_argument("--model-seed", type=int, default=42)
    parser.add_argument("--out", default="nn_sweep.csv")
    args = parser.parse_args()

    X, y, dates, plan = load_examples(args)
    lrs = [float(s) for s in args.lrs.split(",") if s]
    widths = [int(s) for s in args.widths.split(",") if s]
    layer_counts = [int(s) for s in args.hidden_layer_counts.split(",") if s]
    grid = list(itertools.product(lrs, widths, layer_counts))

    base = NetConfig(epochs=args.epochs, optimizer=args.optimizer,
                     seed=args.model_seed)
    rows = sweep_nn(X, y, dates, plan, grid, base_config=base, jobs=args.jobs)

    print("lr       width  layers  params  rmse_mean  rmse_std")
    lines = ["learning_rate,width,hidden_layers,param_count,rmse_mean,rmse_std"]
    for r in rows:
        print(f"{r.learning_rate:<8g} {r.width:5d}  {r.hidden_layers:6d}  "
              f"{r.param_count:6d}  {r.rmse_mean:9.3f}  {r.rmse_std:8.3f}")
        lines.append(f"{r.learning_rate!r},{r.width},{r.hidden_layers},"
                     f"{r.param_count},{r.rmse_mean!r},{r.rmse_std!r}")

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
