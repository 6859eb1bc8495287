"""Fully connected regression network trained by backpropagation.

Architecture is fixed in shape: ``hidden_layers`` ReLU layers of equal
width, then one linear output unit. Inputs are standardized with training
split statistics; targets stay in count units unless ``scale_target`` is
set, so reported RMSE reads directly in animals. Optimizers are plain SGD
and Adam (0.9 / 0.999 / 1e-8). All randomness (init, epoch shuffles) comes
from purpose-tagged substreams of the config seed, so sequential training
is bit-reproducible.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArityMismatch, EmptyTrainingSet, NonFiniteLoss
from .rng import stream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

TRACE_CSV_HEADER = "epoch,train_rmse,val_rmse"


@dataclass(frozen=True)
class NetConfig:
    hidden_layers: int = 3
    width: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    epochs: int = 50
    batch_size: int = 32
    early_stopping_patience: int | None = None
    scale_target: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hidden_layers < 1:
            raise ValueError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        # 0 is allowed as a no-update sanity control
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.early_stopping_patience is not None and self.early_stopping_patience < 1:
            raise ValueError("early_stopping_patience must be >= 1 when set")


def param_count(input_dim: int, hidden_layers: int, width: int) -> int:
    """Trainable scalars of the fixed architecture."""
    return (
        (input_dim + 1) * width
        + (hidden_layers - 1) * (width + 1) * width
        + (width + 1)
    )


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray  # zero-variance columns fall back to 1.0

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds = np.where(stds > 0.0, stds, 1.0)
        return cls(means, stds)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.stds


class DenseLayer:
    """Affine map plus activation; W is (out x in)."""

    def __init__(self, W: np.ndarray, b: np.ndarray, activation: str):
        if activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {activation!r}")
        self.W = W
        self.b = b
        self.activation = activation

    def apply(self, A: np.ndarray) -> np.ndarray:
        Z = A @ self.W.T + self.b
        if self.activation == "relu":
            return np.maximum(Z, 0.0)
        return Z


class Network:
    """hidden ReLU layers, one linear output unit, standardized inputs.

    ``mse_loss`` and :func:`backprop_grads` work in the network's internal
    target space (scaled when the training config asked for it), so the
    finite-difference oracle and backprop always see the same objective.
    ``predict``/``forward`` always return original count units.
    """

    def __init__(
        self,
        layers: list[DenseLayer],
        standardizer: Standardizer,
        target_standardizer: Standardizer | None = None,
    ):
        self.layers = layers
        self.standardizer = standardizer
        self.target_standardizer = target_standardizer

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[1]

    def n_params(self) -> int:
        return sum(layer.W.size + layer.b.size for layer in self.layers)

    def _raw_output(self, X: np.ndarray) -> np.ndarray:
        A = self.standardizer.transform(X)
        for layer in self.layers:
            A = layer.apply(A)
        return A[:, 0]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ArityMismatch(
                f"matrix has shape {X.shape}, network expects (*, {self.input_dim})"
            )
        out = self._raw_output(X)
        if self.target_standardizer is not None:
            out = out * self.target_standardizer.stds[0] + self.target_standardizer.means[0]
        return out

    def _internal_targets(self, y: np.ndarray) -> np.ndarray:
        if self.target_standardizer is None:
            return y
        return (y - self.target_standardizer.means[0]) / self.target_standardizer.stds[0]

    def mse_loss(self, X, y) -> float:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        resid = self._raw_output(X) - self._internal_targets(y)
        return float(np.mean(resid**2))


def forward(net: Network, row) -> float:
    """Single-row prediction in count units."""
    row = np.asarray(row, dtype=float)
    if row.shape != (net.input_dim,):
        raise ArityMismatch(
            f"row has shape {row.shape}, network expects ({net.input_dim},)"
        )
    return float(net.predict(row[None, :])[0])


def init_network(input_dim: int, config: NetConfig) -> Network:
    """He-style init: W ~ N(0, 2/fan_in), biases zero; identity standardizer
    until train() fits the real one."""
    dims = [input_dim] + [config.width] * config.hidden_layers + [1]
    layers = []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        rng = stream(config.seed, "init", l)
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        activation = "relu" if l < len(dims) - 2 else "linear"
        layers.append(DenseLayer(W, b, activation))
    ident = Standardizer(np.zeros(input_dim), np.ones(input_dim))
    return Network(layers, ident)


def backprop_grads(net: Network, X, y) -> list[tuple[np.ndarray, np.ndarray]]:
    """Reverse-mode gradients of the batch MSE, one (dW, db) per layer.

    Loss is mean over the batch of squared residuals (no 1/2 factor); the
    ReLU subgradient at exactly 0 is taken as 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot take gradients on an empty batch")
    n = X.shape[0]

    A = net.standardizer.transform(X)
    activations = [A]  # inputs to each layer
    pre = []  # pre-activation values per layer
    for layer in net.layers:
        Z = A @ layer.W.T + layer.b
        pre.append(Z)
        A = np.maximum(Z, 0.0) if layer.activation == "relu" else Z
        activations.append(A)

    resid = activations[-1][:, 0] - net._internal_targets(y)
    delta = (2.0 / n) * resid[:, None]  # dL/dZ of the linear output layer
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for l in range(len(net.layers) - 1, -1, -1):
        grads[l] = (delta.T @ activations[l], delta.sum(axis=0))
        if l > 0:
            delta = delta @ net.layers[l].W
            delta = delta * (pre[l - 1] > 0.0)
    return grads


@dataclass(frozen=True)
class TraceEpoch:
    epoch: int  # 0 = after init, before any update
    train_rmse: float
    val_rmse: float | None


@dataclass(frozen=True)
class TrainResult:
    network: Network
    trace: tuple[TraceEpoch, ...]
    stopped_early: bool


def _rmse_units(net: Network, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((net.predict(X) - y) ** 2)))


def train(
    X,
    y,
    config: NetConfig = NetConfig(),
    validation: tuple | None = None,
) -> TrainResult:
    """Mini-batch training with per-epoch RMSE trace (epoch 0 = untrained).

    Shuffles each epoch on the stream (seed, "shuffle", epoch). With
    ``early_stopping_patience`` set and a validation set given, training
    stops after that many epochs without a new best validation RMSE and the
    best snapshot is restored. Raises NonFiniteLoss when the epoch train
    RMSE goes non-finite or grows 10x over its running minimum.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot train on zero examples")

    net = init_network(X.shape[1], config)
    net.standardizer = Standardizer.fit(X)
    if config.scale_target:
        net.target_standardizer = Standardizer.fit(y[:, None])

    X_val = y_val = None
    if validation is not None:
        X_val = np.asarray(validation[0], dtype=float)
        y_val = np.asarray(validation[1], dtype=float)

    def snapshot_rmse(epoch: int) -> TraceEpoch:
        val = _rmse_units(net, X_val, y_val) if X_val is not None else None
        return TraceEpoch(epoch, _rmse_units(net, X, y), val)

    adam_m = [
        (np.zeros_like(l.W), np.zeros_like(l.b)) for l in net.layers
    ]
    adam_v = [
        (np.zeros_like(l.W), np.zeros_like(l.b)) for l in net.layers
    ]
    adam_t = 0

    trace = [snapshot_rmse(0)]
    best_val = trace[0].val_rmse
    best_layers = copy.deepcopy(net.layers) if best_val is not None else None
    stale = 0
    min_train = trace[0].train_rmse
    stopped_early = False
    n = X.shape[0]

    for epoch in range(1, config.epochs + 1):
        order = stream(config.seed, "shuffle", epoch - 1).permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = backprop_grads(net, X[batch], y[batch])
            if config.optimizer == "sgd":
                for layer, (gW, gb) in zip(net.layers, grads):
                    layer.W -= config.learning_rate * gW
                    layer.b -= config.learning_rate * gb
            else:
                adam_t += 1
                c1 = 1.0 - ADAM_BETA1**adam_t
                c2 = 1.0 - ADAM_BETA2**adam_t
                for l, (layer, (gW, gb)) in enumerate(zip(net.layers, grads)):
                    for arr, g, m, v in (
                        (layer.W, gW, adam_m[l][0], adam_v[l][0]),
                        (layer.b, gb, adam_m[l][1], adam_v[l][1]),
                    ):
                        m *= ADAM_BETA1
                        m += (1.0 - ADAM_BETA1) * g
                        v *= ADAM_BETA2
                        v += (1.0 - ADAM_BETA2) * g * g
                        arr -= config.learning_rate * (m / c1) / (
                            np.sqrt(v / c2) + ADAM_EPS
                        )

        entry = snapshot_rmse(epoch)
        trace.append(entry)
        if not np.isfinite(entry.train_rmse):
            raise NonFiniteLoss(
                f"train RMSE became {entry.train_rmse} at epoch {epoch}"
            )
        if min_train > 0.0 and entry.train_rmse > 10.0 * min_train:
            raise NonFiniteLoss(
                f"train RMSE {entry.train_rmse:.6g} at epoch {epoch} exceeds "
                f"10x its minimum {min_train:.6g}; training diverged"
            )
        min_train = min(min_train, entry.train_rmse)

        if config.early_stopping_patience is not None and entry.val_rmse is not None:
            if best_val is None or entry.val_rmse < best_val:
                best_val = entry.val_rmse
                best_layers = copy.deepcopy(net.layers)
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stopping_patience:
                    stopped_early = True
                    break

    if config.early_stopping_patience is not None and best_layers is not None:
        net.layers = best_layers  # best validation snapshot, not the last epoch

    return TrainResult(net, tuple(trace), stopped_early)


def _nn_fit(config: NetConfig, X, y):
    return train(X, y, config).network.predict


def nn_fitter(config: NetConfig):
    """Picklable fit callable for the cross-validation driver."""
    return partial(_nn_fit, config)


@dataclass(frozen=True)
class NnSweepRow:
    learning_rate: float
    width: int
    hidden_layers: int
    param_count: int
    rmse_mean: float
    rmse_std: float


def sweep_nn(
    X,
    y,
    dates,
    plan,
    grid: Sequence[tuple[float, int, int]],
    base_config: NetConfig = NetConfig(),
    jobs: int = 1,
) -> list[NnSweepRow]:
    """Cross-validated RMSE per (learning_rate, width, hidden_layers) cell,
    sorted ascending by RMSE."""
    from .evaluation import cross_validate  # driver lives downstream

    if not grid:
        raise ValueError("sweep grid must be non-empty")
    input_dim = np.asarray(X).shape[1]
    rows = []
    for lr, width, hidden in grid:
        config = NetConfig(
            hidden_layers=hidden,
            width=width,
            learning_rate=lr,
            optimizer=base_config.optimizer,
            epochs=base_config.epochs,
            batch_size=base_config.batch_size,
            early_stopping_patience=base_config.early_stopping_patience,
            scale_target=base_config.scale_target,
            seed=base_config.seed,
        )
        report = cross_validate(X, y, dates, plan, nn_fitter(config), jobs=jobs)
        rows.append(
            NnSweepRow(
                learning_rate=lr,
                width=width,
                hidden_layers=hidden,
                param_count=param_count(input_dim, hidden, width),
                rmse_mean=report.overall_rmse,
                rmse_std=float(np.std(report.per_fold_rmse)),
            )
        )
    rows.sort(key=lambda r: r.rmse_mean)
    return rows


def write_trace_csv(trace, path: str | Path, meta: dict | None = None) -> None:
    lines = []
    if meta is not None:
        lines.append("# meta " + json.dumps(meta, sort_keys=True))
    lines.append(TRACE_CSV_HEADER)
    for e in trace:
        val = "" if e.val_rmse is None else repr(e.val_rmse)
        lines.append(f"{e.epoch},{e.train_rmse!r},{val}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_network(
    net: Network, config: NetConfig, path: str | Path, meta: dict | None = None
) -> None:
    """JSON with config, standardizers, and row-major layer weights."""
    doc = {
        "format": "nn",
        "config": {
            "hidden_layers": config.hidden_layers,
            "width": config.width,
            "learning_rate": config.learning_rate,
            "optimizer": config.optimizer,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "early_stopping_patience": config.early_stopping_patience,
            "scale_target": config.scale_target,
            "seed": config.seed,
        },
        "standardizer": {
            "means": net.standardizer.means.tolist(),
            "stds": net.standardizer.stds.tolist(),
        },
        "target_standardizer": None
        if net.target_standardizer is None
        else {
            "means": net.target_standardizer.means.tolist(),
            "stds": net.target_standardizer.stds.tolist(),
        },
        "layers": [
            {
                "weights": layer.W.tolist(),
                "biases": layer.b.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }
    if meta is not None:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_network(path: str | Path) -> tuple[Network, NetConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    config = NetConfig(**doc["config"])
    std = Standardizer(
        np.asarray(doc["standardizer"]["means"], dtype=float),
        np.asarray(doc["standardizer"]["stds"], dtype=float),
    )
    tstd = None
    if doc["target_standardizer"] is not None:
        tstd = Standardizer(
            np.asarray(doc["target_standardizer"]["means"], dtype=float),
            np.asarray(doc["target_standardizer"]["stds"], dtype=float),
        )
    layers = [
        DenseLayer(
            np.asarray(l["weights"], dtype=float),
            np.asarray(l["biases"], dtype=float),
            l["activation"],
        )
        for l in doc["layers"]
    ]
    return Network(layers, std, tstd), config
