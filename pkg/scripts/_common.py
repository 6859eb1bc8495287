"""Shared data loading for the experiment scripts."""

import argparse

from shadecount.dataset import group_days, make_folds
from shadecount.features import build_all_examples, read_feature_csv, to_matrix
from shadecount.synth import SynthConfig, generate


def add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--features", default=None,
                        help="feature CSV from `shadecount ingest`; omit to synthesize")
    parser.add_argument("--days", type=int, default=75)
    parser.add_argument("--noise", type=float, default=8.0)
    parser.add_argument("--data-seed", type=int, default=0)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--jobs", type=int, default=1)


def load_examples(args):
    """(X, y, dates, plan) from a feature CSV or a synthetic season."""
    if args.features is not None:
        examples = read_feature_csv(args.features)
    else:
        obs, _ = generate(SynthConfig(n_days=args.days, noise_std=args.noise,
                                      seed=args.data_seed))
        examples = build_all_examples(group_days(obs).days)
    X, y, dates = to_matrix(examples)
    plan = make_folds(sorted(set(dates)), k=args.folds, seed=args.data_seed)
    return X, y, dates, plan
