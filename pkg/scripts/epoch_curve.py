#!/usr/bin/env python3
"""Train one network with a held-out day split and dump the epoch curve.

Validation days are the last fold of the day plan; everything else trains.
Output CSV has epoch,train_rmse,val_rmse (epoch 0 = untrained network).
"""

import argparse
import sys

import numpy as np

from _common import add_data_args, load_examples
from shadecount.nn import NetConfig, train, write_trace_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_data_args(parser)
    parser.add_argument("--epochs", type=int, default=300)
    parser.add_argument("--lr", type=float, default=0.001)
    parser.add_argument("--width", type=int, default=16)
    parser.add_argument("--hidden-layers", type=int, default=3)
    parser.add_argument("--optimizer", default="adam", choices=("sgd", "adam"))
    parser.add_argument("--patience", type=int, default=None)
    parser.add_argument("--model-seed", type=int, default=42)
    parser.add_argument("--out", default="epoch_curve.csv")
    args = parser.parse_args()

    X, y, dates, plan = load_examples(args)
    val_days = set(plan.folds[-1])
    val_mask = np.array([d in val_days for d in dates])
    config = NetConfig(hidden_layers=args.hidden_layers, width=args.width,
                       learning_rate=args.lr, optimizer=args.optimizer,
                       epochs=args.epochs,
                       early_stopping_patience=args.patience,
                       seed=args.model_seed)
    result = train(X[~val_mask], y[~val_mask], config,
                   validation=(X[val_mask], y[val_mask]))

    last = result.trace[-1]
    print(f"{int(val_mask.sum())} validation rows over {len(val_days)} days")
    print(f"stopped_early={result.stopped_early} at epoch {last.epoch}: "
          f"train {last.train_rmse:.3f}, val {last.val_rmse:.3f}")
    write_trace_csv(result.trace, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
