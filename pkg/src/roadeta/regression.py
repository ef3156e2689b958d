"""MLP regression head, dataset split protocol, and the error metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .optim import AdamState, ParamStore, adam_step
from .encoders import glorot
from .tensorio import load_store, save_store


class ZeroTarget(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class NaNLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class MlpConfig:
    """Affine-ReLU stack with a linear scalar output (seconds)."""

    input_dim: int
    hidden: tuple = (256, 64)

    def __post_init__(self):
        if self.input_dim <= 0 or any(w <= 0 for w in self.hidden):
            raise ValueError("layer widths must be positive")


@dataclass(frozen=True)
class SplitSpec:
    """First ``train_count`` records train; the rest halves into val/test."""

    train_count: int


@dataclass(frozen=True)
class MetricsReport:
    mae_s: float
    rmse_s: float
    mape_pct: float
    count: int


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray


class Mlp:
    """Plain multi-layer perceptron with explicit backward.

    ``target_offset`` and ``target_scale`` are fixed (non-trainable) output
    denormalization constants: predictions are offset + scale * net(x).
    Setting them to the training-target mean/std keeps the learnable weights
    near unit scale regardless of the target magnitude in seconds.
    ``input_offset``/``input_scale`` standardize the columns of x the same
    way; all four are conditioning constants baked into the checkpoint, not
    learnable parameters.
    """

    def __init__(self, config, seed=0, output_bias=0.0, target_offset=0.0,
                 target_scale=1.0, input_offset=None, input_scale=None):
        self.config = config
        self.target_offset = float(target_offset)
        self.target_scale = float(target_scale)
        self.input_offset = np.zeros(config.input_dim) if input_offset is None \
            else np.asarray(input_offset, dtype=np.float64)
        self.input_scale = np.ones(config.input_dim) if input_scale is None \
            else np.asarray(input_scale, dtype=np.float64)
        if self.input_offset.shape != (config.input_dim,) \
                or self.input_scale.shape != (config.input_dim,):
            raise LengthMismatch("input conditioning constants must match "
                                 "the input width")
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        dims = [config.input_dim, *config.hidden, 1]
        self.weights = []
        self.biases = []
        self._gw = []
        self._gb = []
        for i in range(len(dims) - 1):
            w = self.store.register(f"mlp/layer{i}/W", glorot(rng, dims[i], dims[i + 1]))
            b = self.store.register(f"mlp/layer{i}/b", np.zeros(dims[i + 1]))
            self.weights.append(w)
            self.biases.append(b)
            self._gw.append(self.store.grad(f"mlp/layer{i}/W"))
            self._gb.append(self.store.grad(f"mlp/layer{i}/b"))
        self.biases[-1][0] = output_bias

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise LengthMismatch(f"expected (*, {self.config.input_dim}) input, "
                                 f"got {x.shape}")
        h = (x - self.input_offset) / self.input_scale
        tape = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = h @ w + b
            tape.append({"h": h, "pre": pre})
            h = pre if i == last else np.maximum(pre, 0.0)
        return self.target_offset + self.target_scale * h[:, 0], tape

    def backward(self, tape, d_pred):
        g = d_pred[:, None] * self.target_scale
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            if i != last:
                g = g * (tape[i]["pre"] > 0)  # grad through the ReLU
            self._gw[i] += tape[i]["h"].T @ g
            self._gb[i] += g.sum(axis=0)
            g = g @ self.weights[i].T
        return g


def conditioned_mlp(config, x_train, y_train, seed=0):
    """Mlp with input/target conditioning constants from the training split."""
    input_scale = np.std(x_train, axis=0)
    input_scale[input_scale == 0] = 1.0
    target_scale = float(np.std(y_train))
    return Mlp(config, seed=seed,
               target_offset=float(np.mean(y_train)),
               target_scale=target_scale if target_scale > 0 else 1.0,
               input_offset=np.mean(x_train, axis=0),
               input_scale=input_scale)


def mlp_forward(mlp, x):
    """Predictions in seconds, no tape."""
    pred, _ = mlp.forward(x)
    return pred


def split_dataset(items, spec):
    """Order-preserving (train, val, test) split; val gets the odd element."""
    total = len(items)
    rest = total - spec.train_count
    if spec.train_count <= 0 or rest < 2:
        raise InsufficientData(f"cannot split {total} records with "
                               f"train_count={spec.train_count}")
    val_count = (rest + 1) // 2
    train = items[:spec.train_count]
    val = items[spec.train_count:spec.train_count + val_count]
    test = items[spec.train_count + val_count:]
    return train, val, test


def train_regressor(train, val, mlp, epochs, lr=0.0001, batch_size=256, seed=0):
    """Minibatch MSE training with Adam; returns the best-on-validation model.

    ``train`` and ``val`` are (X, y) pairs.  Curves rows are
    (epoch, mean train MSE, validation MAE).  Deterministic given the seed.
    """
    x_train, y_train = train
    x_val, y_val = val
    n = x_train.shape[0]
    opt = AdamState(mlp.store, lr=lr)
    rng = np.random.default_rng(seed)
    curves = []
    best_mae = np.inf
    best_state = mlp.store.state_dict()
    for epoch in range(epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = x_train[idx], y_train[idx]
            pred, tape = mlp.forward(xb)
            diff = pred - yb
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise NaNLoss(f"training loss became non-finite at epoch {epoch}")
            mlp.store.zero_grads()
            mlp.backward(tape, 2.0 * diff / idx.size)
            adam_step(mlp.store, opt)
            batch_losses.append(loss)
        val_mae = float(np.mean(np.abs(mlp_forward(mlp, x_val) - y_val)))
        curves.append((epoch, float(np.mean(batch_losses)), val_mae))
        if val_mae < best_mae:
            best_mae = val_mae
            best_state = mlp.store.state_dict()
    mlp.store.load_state_dict(best_state)
    return mlp, curves


def compute_metrics(y, y_pred):
    """MAE, RMSE and percentage MAPE over positive targets."""
    y = np.asarray(y, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y.shape != y_pred.shape or y.ndim != 1 or y.size == 0:
        raise LengthMismatch(f"incompatible shapes {y.shape} and {y_pred.shape}")
    if np.any(y <= 0):
        raise ZeroTarget("targets must be strictly positive for MAPE")
    diff = y - y_pred
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    mape = float(100.0 * np.mean(np.abs(diff / y)))
    return MetricsReport(mae_s=mae, rmse_s=rmse, mape_pct=mape, count=y.size)


def save_mlp(dirpath, mlp):
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    with open(dirpath / "config.json", "w") as fh:
        json.dump({"model": "mlp", "input_dim": mlp.config.input_dim,
                   "hidden": list(mlp.config.hidden),
                   "target_offset": mlp.target_offset,
                   "target_scale": mlp.target_scale,
                   "input_offset": mlp.input_offset.tolist(),
                   "input_scale": mlp.input_scale.tolist()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_store(dirpath, mlp.store)


def load_mlp(dirpath):
    dirpath = Path(dirpath)
    with open(dirpath / "config.json") as fh:
        descriptor = json.load(fh)
    mlp = Mlp(MlpConfig(input_dim=descriptor["input_dim"],
                        hidden=tuple(descriptor["hidden"])),
              target_offset=descriptor.get("target_offset", 0.0),
              target_scale=descriptor.get("target_scale", 1.0),
              input_offset=descriptor.get("input_offset"),
              input_scale=descriptor.get("input_scale"))
    load_store(dirpath, mlp.store)
    return mlp


def error_histogram(y, y_pred, bin_width_s):
    """Signed-error histogram of (y_pred - y) on bin-width-aligned edges."""
    if bin_width_s <= 0:
        raise ValueError("bin width must be positive")
    y = np.asarray(y, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y.shape != y_pred.shape or y.size == 0:
        raise LengthMismatch(f"incompatible shapes {y.shape} and {y_pred.shape}")
    errors = y_pred - y
    left = np.floor(errors.min() / bin_width_s) * bin_width_s
    right = np.floor(errors.max() / bin_width_s) * bin_width_s + bin_width_s
    nbins = int(round((right - left) / bin_width_s))
    edges = left + bin_width_s * np.arange(nbins + 1)
    counts, _ = np.histogram(errors, bins=edges)
    return Histogram(bin_edges=edges, counts=counts)
