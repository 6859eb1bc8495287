"""CART-style regression tree with exhaustive variance-minimizing splits.

Each node is split by scanning every (feature, midpoint-threshold) pair and
keeping the one with the lowest objective. The objective comes in two
flavors behind ``split_weighting``: the standard size-weighted form
SSE(left) + SSE(right), and an unweighted form var(left) + var(right) for
comparison runs. Leaves predict the mean of the targets routed to them;
routing is ``left iff feature value <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np

from .errors import ArityMismatch, EmptyTrainingSet

SPLIT_WEIGHTINGS = ("size_weighted", "unweighted")

# relative improvement below this counts as a tie and resolves to scan order
TIE_MARGIN = 1e-10


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None  # None = grow until the other rules stop
    min_samples_split: int = 2
    split_weighting: str = "size_weighted"

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(
                f"min_samples_split must be >= 2, got {self.min_samples_split}"
            )
        if self.split_weighting not in SPLIT_WEIGHTINGS:
            raise ValueError(f"unknown split_weighting {self.split_weighting!r}")


@dataclass(frozen=True)
class SplitRule:
    feature_index: int
    threshold: float


@dataclass(frozen=True)
class Leaf:
    prediction: float
    n_samples: int


@dataclass(frozen=True)
class Internal:
    rule: SplitRule
    left: "TreeNode"
    right: "TreeNode"
    n_samples: int


TreeNode = Leaf | Internal


@dataclass(frozen=True)
class RegressionTree:
    root: TreeNode
    config: TreeConfig
    n_features: int
    feature_names: tuple[str, ...]


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    feature_indices: Sequence[int],
    weighting: str = "size_weighted",
) -> tuple[int, float, float] | None:
    """Lowest-objective (feature, threshold, objective), or None if nothing
    strictly beats the parent node's objective.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; when two values are adjacent floats and the midpoint rounds up
    to the higher one, the lower value itself is used so the threshold
    always realizes the scanned partition.

    Tie-break: a candidate replaces the incumbent only when it improves the
    objective by more than 1 part in 1e10; anything closer counts as a tie
    and resolves to scan order, i.e. lowest feature index first, smallest
    threshold first. The margin matters because two features can induce the
    identical partition (hence mathematically equal objectives) and a
    strict float comparison would let last-ulp rounding pick the winner.

    Per feature the scan sorts once and sweeps prefix sums of the targets
    centered on the node mean; centering keeps the SSE terms accurate
    enough that the brute-force oracle agrees to ~1e-12 relative.
    """
    n = y.size
    size_weighted = weighting == "size_weighted"
    yc = y - y.mean()
    n_left = np.arange(1, n)
    n_right = n - n_left

    best: tuple[float, int, float] | None = None
    for f in sorted(feature_indices):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if xs[0] == xs[-1]:  # constant feature, no candidates
            continue
        ys = yc[order]
        cy = np.cumsum(ys)
        cy2 = np.cumsum(ys * ys)
        total_y = cy[-1]
        total_y2 = cy2[-1]

        sse_left = cy2[:-1] - cy[:-1] ** 2 / n_left
        sse_right = (total_y2 - cy2[:-1]) - (total_y - cy[:-1]) ** 2 / n_right
        np.maximum(sse_left, 0.0, out=sse_left)
        np.maximum(sse_right, 0.0, out=sse_right)
        if size_weighted:
            obj = sse_left + sse_right
        else:
            obj = sse_left / n_left + sse_right / n_right

        obj[xs[:-1] == xs[1:]] = np.inf  # only boundaries between distinct values
        i = int(np.argmin(obj))
        if not np.isfinite(obj[i]):
            continue
        if best is None or obj[i] < best[0] * (1.0 - TIE_MARGIN):
            thr = 0.5 * (xs[i] + xs[i + 1])
            if thr >= xs[i + 1]:
                thr = float(xs[i])
            best = (float(obj[i]), f, float(thr))

    if best is None:
        return None
    total_y2 = float(np.dot(yc, yc))
    parent = total_y2 if size_weighted else total_y2 / n
    if not best[0] < parent:
        return None
    return best[1], best[2], best[0]


def fit_tree(
    X,
    y,
    config: TreeConfig = TreeConfig(),
    feature_subset: Sequence[int] | None = None,
    feature_names: Sequence[str] | None = None,
) -> RegressionTree:
    """Grow a tree on rows X with targets y.

    Splitting recurses until a node is smaller than min_samples_split,
    sits at max_depth, has all-equal targets, or no candidate strictly
    reduces the objective. ``feature_subset`` restricts the searched
    features (used by the forest) without changing row arity.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y shape {y.shape} does not match {X.shape[0]} rows")
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit a tree on zero examples")

    d = X.shape[1]
    if feature_subset is None:
        features: tuple[int, ...] = tuple(range(d))
    else:
        features = tuple(sorted(set(int(i) for i in feature_subset)))
        if not features:
            raise ValueError("feature_subset must be non-empty when given")
        if features[0] < 0 or features[-1] >= d:
            raise ValueError(f"feature_subset {features} outside [0, {d})")
    if feature_names is None:
        names = tuple(f"f{i}" for i in range(d))
    else:
        names = tuple(feature_names)
        if len(names) != d:
            raise ValueError(f"{len(names)} feature names for {d} features")

    def grow(rows: np.ndarray, targets: np.ndarray, depth: int) -> TreeNode:
        n = targets.size
        if (
            n < config.min_samples_split
            or (config.max_depth is not None and depth >= config.max_depth)
            or np.all(targets == targets[0])
        ):
            return Leaf(float(targets.mean()), n)
        found = best_split(rows, targets, features, config.split_weighting)
        if found is None:
            return Leaf(float(targets.mean()), n)
        f, thr, _ = found
        mask = rows[:, f] <= thr
        left = grow(rows[mask], targets[mask], depth + 1)
        right = grow(rows[~mask], targets[~mask], depth + 1)
        return Internal(SplitRule(f, thr), left, right, n)

    return RegressionTree(grow(X, y, 0), config, d, names)


def predict_tree(tree: RegressionTree, row) -> float:
    """Route one feature row to its leaf mean."""
    row = np.asarray(row, dtype=float)
    if row.shape != (tree.n_features,):
        raise ArityMismatch(
            f"row has shape {row.shape}, tree expects ({tree.n_features},)"
        )
    node = tree.root
    while isinstance(node, Internal):
        if row[node.rule.feature_index] <= node.rule.threshold:
            node = node.left
        else:
            node = node.right
    return node.prediction


def predict_matrix(tree: RegressionTree, X) -> np.ndarray:
    """Vectorized routing of many rows at once."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise ArityMismatch(
            f"matrix has shape {X.shape}, tree expects (*, {tree.n_features})"
        )
    out = np.empty(X.shape[0])

    def route(node: TreeNode, idx: np.ndarray) -> None:
        if isinstance(node, Leaf):
            out[idx] = node.prediction
            return
        mask = X[idx, node.rule.feature_index] <= node.rule.threshold
        route(node.left, idx[mask])
        route(node.right, idx[~mask])

    route(tree.root, np.arange(X.shape[0]))
    return out


def _tree_fit(config: TreeConfig, X, y):
    fitted = fit_tree(X, y, config)
    return lambda X_test: predict_matrix(fitted, X_test)


def tree_fitter(config: TreeConfig):
    """Picklable fit callable for the cross-validation driver."""
    return partial(_tree_fit, config)


def export_tree(tree: RegressionTree) -> dict:
    """JSON-ready nested dict; leaves carry their training-sample share."""
    n_total = _node_samples(tree.root)

    def walk(node: TreeNode) -> dict:
        if isinstance(node, Leaf):
            return {
                "prediction": node.prediction,
                "share_pct": 100.0 * node.n_samples / n_total,
            }
        return {
            "feature": tree.feature_names[node.rule.feature_index],
            "threshold": node.rule.threshold,
            "left": walk(node.left),
            "right": walk(node.right),
        }

    return walk(tree.root)


def render_tree(tree: RegressionTree) -> str:
    """Indented text rendering: rules on internals, mean and share on leaves."""
    n_total = _node_samples(tree.root)
    lines: list[str] = []

    def walk(node: TreeNode, depth: int) -> None:
        pad = "  " * depth
        if isinstance(node, Leaf):
            share = 100.0 * node.n_samples / n_total
            lines.append(f"{pad}predict {node.prediction:.2f}  ({share:.1f}%)")
            return
        name = tree.feature_names[node.rule.feature_index]
        lines.append(f"{pad}{name} <= {node.rule.threshold:.6g}")
        walk(node.left, depth + 1)
        lines.append(f"{pad}{name} > {node.rule.threshold:.6g}")
        walk(node.right, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines)


def tree_from_export(
    exported: dict,
    feature_names: Sequence[str],
    n_train: int,
    config: TreeConfig = TreeConfig(),
) -> RegressionTree:
    """Rebuild a tree from :func:`export_tree` output.

    Leaf sample counts are recovered from the stored shares and ``n_train``;
    exact as long as counts fit comfortably in a double.
    """
    names = tuple(feature_names)
    index = {name: i for i, name in enumerate(names)}

    def walk(node: dict) -> TreeNode:
        if "prediction" in node:
            n = int(np.rint(node["share_pct"] / 100.0 * n_train))
            return Leaf(float(node["prediction"]), n)
        left = walk(node["left"])
        right = walk(node["right"])
        rule = SplitRule(index[node["feature"]], float(node["threshold"]))
        return Internal(rule, left, right, _node_samples(left) + _node_samples(right))

    return RegressionTree(walk(exported), config, len(names), names)


def _node_samples(node: TreeNode) -> int:
    return node.n_samples
