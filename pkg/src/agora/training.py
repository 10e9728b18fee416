"""SGD training loop for the budget regressor, with early stopping.

Plain stochastic gradient descent on mean squared error. The dataset is
split once (seeded permutation) into train and test parts; after each
epoch both are re-evaluated, and training stops when the test MSE has
not improved for ``patience`` consecutive epochs. The returned weights
are the snapshot from the best epoch, not the last one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigInvalid, EmptyDataset, ShapeMismatch
from .transformer import ModelWeights, forward, gradients, mse_loss, parameter_shapes


@dataclass
class LabeledSample:
    """One training example: a (T, input_dim) feature sequence and the
    budget the labeling oracle assigned to its final timestep."""

    features: np.ndarray
    label: float


Dataset = Union[Sequence[LabeledSample], Tuple[np.ndarray, np.ndarray]]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 10
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigInvalid("learning_rate, batch_size and max_epochs must be positive")
        if self.patience < 1:
            raise ConfigInvalid("patience must be >= 1")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigInvalid("test_fraction must be in [0, 1)")


def desk_train_config() -> TrainConfig:
    return TrainConfig(learning_rate=1e-3)


def paper_train_config() -> TrainConfig:
    return TrainConfig(learning_rate=1e-5)


@dataclass
class TrainHistory:
    """Loss curves indexed by epoch; entry 0 is the untrained baseline."""

    train_mse: List[float] = field(default_factory=list)
    test_mse: List[float] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0
    label_variance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "train_mse": self.train_mse,
            "test_mse": self.test_mse,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "label_variance": self.label_variance,
        }


def as_arrays(dataset: Dataset, input_dim: int, seq_len: int) -> Tuple[np.ndarray, np.ndarray]:
    """Stack a dataset into (n, T, input_dim) features and (n,) labels."""
    if isinstance(dataset, tuple):
        x, y = dataset
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
    else:
        samples = list(dataset)
        if not samples:
            raise EmptyDataset("dataset holds no samples")
        x = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
        y = np.asarray([s.label for s in samples], dtype=np.float64)
    if x.ndim != 3 or x.shape[0] == 0:
        raise EmptyDataset("dataset holds no samples")
    if x.shape[1] != seq_len or x.shape[2] != input_dim:
        raise ShapeMismatch(
            f"dataset sample shape {x.shape[1:]}, model expects ({seq_len}, {input_dim})"
        )
    if y.shape != (x.shape[0],):
        raise ShapeMismatch(f"{x.shape[0]} samples but {y.shape} labels")
    return x, y


def split_indices(n: int, test_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic train/test index split. A split too small to hold a
    test sample falls back to evaluating on the training data."""
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    n_test = min(n - 1, n_test) if n > 1 else 0
    if n_test == 0:
        return perm, perm.copy()
    return perm[n_test:], perm[:n_test]


def evaluate(weights: ModelWeights, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
    """MSE of the model over a dataset, dropout off, in fixed batches."""
    total, count = 0.0, 0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        pred, _ = forward(weights, xb, train=False)
        loss, _ = mse_loss(pred, yb)
        total += loss * xb.shape[0]
        count += xb.shape[0]
    return total / count


def train(
    weights: ModelWeights,
    cfg: TrainConfig,
    dataset: Dataset,
) -> Tuple[ModelWeights, TrainHistory]:
    """Fit the model; returns (best-epoch weights, loss history).

    The input weights are not mutated. All randomness (split, shuffling,
    dropout) flows from cfg.seed, so results are bit-reproducible.
    """
    x, y = as_arrays(dataset, weights.config.input_dim, weights.config.seq_len)
    train_idx, test_idx = split_indices(x.shape[0], cfg.test_fraction, cfg.seed)
    x_train, y_train = x[train_idx], y[train_idx]
    x_test, y_test = x[test_idx], y[test_idx]

    rng = np.random.Generator(np.random.PCG64(cfg.seed + 1))
    weights = weights.copy()
    history = TrainHistory(label_variance=float(np.var(y_test)))
    history.train_mse.append(evaluate(weights, x_train, y_train))
    history.test_mse.append(evaluate(weights, x_test, y_test))
    best = weights.copy()
    best_test = history.test_mse[0]
    since_best = 0

    names = [name for name, _ in parameter_shapes(weights.config)]
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(x_train.shape[0])
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            _, grads = gradients(weights, x_train[batch], y_train[batch], train=True, rng=rng)
            for name in names:
                weights.params[name] -= cfg.learning_rate * grads[name]
        history.train_mse.append(evaluate(weights, x_train, y_train))
        history.test_mse.append(evaluate(weights, x_test, y_test))
        history.epochs_run = epoch
        if history.test_mse[-1] < best_test:
            best_test = history.test_mse[-1]
            best = weights.copy()
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
        if since_best >= cfg.patience:
            break
    return best, history
