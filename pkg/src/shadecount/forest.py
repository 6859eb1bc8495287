"""Random forest: bagged regression trees with per-tree feature subsets.

Tree i draws its bootstrap rows from the stream (seed, "bootstrap", i) and
its feature subset (without replacement) from (seed, "features", i), so a
forest is a pure function of (data, config) no matter how its trees are
scheduled. Prediction is the plain mean over member trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np

from .dataset import FoldPlan
from .errors import ArityMismatch, EmptyTrainingSet
from .evaluation import cross_validate
from .rng import stream
from .tree import RegressionTree, TreeConfig, fit_tree, predict_matrix, predict_tree


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 10
    tree_config: TreeConfig = TreeConfig(max_depth=5)
    features_per_tree: int = 3
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.features_per_tree < 1:
            raise ValueError(
                f"features_per_tree must be >= 1, got {self.features_per_tree}"
            )


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[tuple[RegressionTree, tuple[int, ...]], ...]
    config: ForestConfig
    n_features: int


def bootstrap_indices(seed: int, tree_index: int, n: int) -> np.ndarray:
    """Row indices of tree ``tree_index``'s bootstrap sample (size n, with
    replacement), from the dedicated per-tree stream."""
    rng = stream(seed, "bootstrap", tree_index)
    return rng.integers(0, n, size=n)


def feature_subset(seed: int, tree_index: int, n_features: int, k: int) -> tuple[int, ...]:
    """k distinct feature indices for tree ``tree_index``."""
    rng = stream(seed, "features", tree_index)
    picked = rng.choice(n_features, size=k, replace=False)
    return tuple(sorted(int(i) for i in picked))


def fit_forest(
    X,
    y,
    config: ForestConfig = ForestConfig(),
    feature_names: Sequence[str] | None = None,
) -> RandomForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit a forest on zero examples")
    n, d = X.shape
    if config.features_per_tree > d:
        raise ValueError(
            f"features_per_tree={config.features_per_tree} exceeds {d} features"
        )

    members = []
    for i in range(config.n_trees):
        if config.bootstrap:
            rows = bootstrap_indices(config.seed, i, n)
            X_i, y_i = X[rows], y[rows]
        else:
            X_i, y_i = X, y
        subset = feature_subset(config.seed, i, d, config.features_per_tree)
        tree = fit_tree(
            X_i, y_i, config.tree_config, feature_subset=subset,
            feature_names=feature_names,
        )
        members.append((tree, subset))
    return RandomForest(tuple(members), config, d)


def predict_forest(forest: RandomForest, row) -> float:
    row = np.asarray(row, dtype=float)
    if row.shape != (forest.n_features,):
        raise ArityMismatch(
            f"row has shape {row.shape}, forest expects ({forest.n_features},)"
        )
    return float(np.mean([predict_tree(t, row) for t, _ in forest.trees]))


def predict_forest_matrix(forest: RandomForest, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ArityMismatch(
            f"matrix has shape {X.shape}, forest expects (*, {forest.n_features})"
        )
    stack = np.stack([predict_matrix(t, X) for t, _ in forest.trees])
    return stack.mean(axis=0)


def _forest_fit(config: ForestConfig, X, y):
    forest = fit_forest(X, y, config)
    return lambda X_test: predict_forest_matrix(forest, X_test)


def forest_fitter(config: ForestConfig):
    """Picklable fit callable for the cross-validation driver."""
    return partial(_forest_fit, config)


@dataclass(frozen=True)
class SweepCell:
    depth: int
    n_trees: int
    rmse_mean: float
    rmse_std: float


def sweep_forest(
    X,
    y,
    dates,
    plan: FoldPlan,
    depths: Sequence[int],
    tree_counts: Sequence[int],
    base_config: ForestConfig = ForestConfig(),
    jobs: int = 1,
) -> list[SweepCell]:
    """Cross-validated RMSE over the (depth, n_trees) grid.

    rmse_mean is the unweighted mean of per-fold RMSE, rmse_std the
    population standard deviation across folds.
    """
    if not depths or not tree_counts:
        raise ValueError("sweep grids must be non-empty")
    cells = []
    for depth in depths:
        for n_trees in tree_counts:
            config = ForestConfig(
                n_trees=n_trees,
                tree_config=TreeConfig(
                    max_depth=depth,
                    min_samples_split=base_config.tree_config.min_samples_split,
                    split_weighting=base_config.tree_config.split_weighting,
                ),
                features_per_tree=base_config.features_per_tree,
                bootstrap=base_config.bootstrap,
                seed=base_config.seed,
            )
            report = cross_validate(X, y, dates, plan, forest_fitter(config), jobs=jobs)
            cells.append(
                SweepCell(
                    depth=depth,
                    n_trees=n_trees,
                    rmse_mean=report.overall_rmse,
                    rmse_std=float(np.std(report.per_fold_rmse)),
                )
            )
    return cells
