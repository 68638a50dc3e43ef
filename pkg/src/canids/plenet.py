"""The 12,052-parameter 1-D CNN classifier, its training loop, and transfer.

Layer stack: Conv1D(5 filters, kernel 5) -> ReLU -> MaxPool -> Conv1D(20,
kernel 5) -> ReLU -> MaxPool -> Flatten -> Dense(20 -> 500) -> ReLU ->
Dense(500 -> 2) -> Softmax, over a length-16 single-channel input. Shapes
run 16x1 -> 12x5 -> 6x5 -> 2x20 -> 1x20 -> 20 -> 500 -> 2, and the layer
parameter counts are 30 / 520 / 10,500 / 1,002.

Training is mini-batch Adam on categorical cross-entropy with a seeded
shuffle per epoch, validation after every epoch, and parameters restored
from the best-validation-accuracy epoch (earliest on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import PreparedDataset
from .nncore import (
    Adam,
    Conv1D,
    Dense,
    Flatten,
    MaxPool1D,
    Network,
    NonFiniteLoss,
    ReLU,
    Softmax,
    cross_entropy,
    one_hot,
)

INPUT_LENGTH = 16
EXPECTED_PARAM_COUNT = 12_052
EXPECTED_LAYER_COUNTS = (30, 520, 10_500, 1_002)

FREEZE_MODES = ("none", "conv")


class EmptyPartition(ValueError):
    """Training requires non-empty train and validation partitions."""


class DimensionMismatch(ValueError):
    """Source and target feature spaces differ."""


class EmptyDomain(ValueError):
    """Distance between empty feature sets is undefined."""


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.epochs <= 1000:
            raise ValueError("epochs must lie in [1, 1000]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self) -> int:
        return len(self.train_loss)


def build_plenet(seed: int = 0) -> Network:
    """Construct the classifier with seeded init and verify its parameter counts."""
    rng = np.random.default_rng(seed)
    net = Network(
        [
            Conv1D(1, 5, 5, rng),
            ReLU(),
            MaxPool1D(),
            Conv1D(5, 20, 5, rng),
            ReLU(),
            MaxPool1D(),
            Flatten(),
            Dense(20, 500, rng),
            ReLU(),
            Dense(500, 2, rng),
            Softmax(),
        ]
    )
    counts = tuple(net.layer_param_counts())
    if counts != EXPECTED_LAYER_COUNTS or net.param_count() != EXPECTED_PARAM_COUNT:
        raise AssertionError(f"layer construction produced counts {counts}")
    return net


def _as_model_input(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    if x.ndim == 2:
        return x[:, :, None]  # (batch, length, 1 channel)
    return x


def predict(model: Network, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probability pairs and hard labels; an exact 0.5 tie counts as attack.

    The first layer decides the expected input layout: conv stacks take
    (batch, 16) feature rows, dense stacks take them as-is.
    """
    x = np.asarray(x, dtype=np.float64)
    if isinstance(model.layers[0], Conv1D):
        probs = model.forward(_as_model_input(x))
    else:
        probs = model.forward(x if x.ndim == 2 else x[None])
    labels = (probs[:, 1] >= probs[:, 0]).astype(np.uint8)
    return probs, labels


def _evaluate(model: Network, x: np.ndarray, y: np.ndarray, batch_size: int = 512) -> tuple[float, float]:
    total_loss, correct = 0.0, 0
    for start in range(0, len(y), batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        probs, labels = predict(model, xb)
        loss, _ = cross_entropy(probs, one_hot(yb))
        total_loss += loss * len(yb)
        correct += int((labels == yb).sum())
    return total_loss / len(y), correct / len(y)


def train(model: Network, data: PreparedDataset, cfg: TrainConfig) -> tuple[Network, TrainHistory]:
    """Mini-batch Adam with per-epoch seeded shuffle and early stopping.

    Returns the model holding the parameters of the best validation-accuracy
    epoch, stopping after ``cfg.patience`` epochs without improvement.
    """
    if len(data.train_y) == 0 or len(data.val_y) == 0:
        raise EmptyPartition("train and validation partitions must be non-empty")
    if data.train_x.shape[1] != INPUT_LENGTH:
        raise ValueError(f"expected {INPUT_LENGTH}-wide feature rows, got {data.train_x.shape}")

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(
        model.parameters(include_frozen=False),
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.eps,
    )
    conv_input = isinstance(model.layers[0], Conv1D)
    train_x = _as_model_input(data.train_x) if conv_input else data.train_x
    history = TrainHistory()
    best_acc, best_snapshot, stale = -1.0, model.snapshot(), 0

    n = len(data.train_y)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb = train_x[idx]
            targets = one_hot(data.train_y[idx])
            probs = model.forward(xb)
            loss, dprobs = cross_entropy(probs, targets)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}, batch offset {start}")
            model.zero_grads()
            model.backward(dprobs)
            opt.step(model.gradients(include_frozen=False))
            epoch_loss += loss * len(idx)
            correct += int((probs.argmax(axis=1) == data.train_y[idx]).sum())

        val_loss, val_acc = _evaluate(model, data.val_x, data.val_y)
        history.train_loss.append(epoch_loss / n)
        history.train_acc.append(correct / n)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)

        if val_acc > best_acc:
            best_acc = val_acc
            best_snapshot = model.snapshot()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    model.restore(best_snapshot)
    return model, history


def mmd_distance(source: np.ndarray, target: np.ndarray, feature_map: str = "identity") -> float:
    """Euclidean norm of the difference between the empirical feature means."""
    if feature_map != "identity":
        raise ValueError(f"unsupported feature map {feature_map!r}")
    source = np.atleast_2d(np.asarray(source, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise EmptyDomain("both domains need at least one sample")
    if source.shape[1] != target.shape[1]:
        raise DimensionMismatch(f"feature widths differ: {source.shape[1]} vs {target.shape[1]}")
    return float(np.linalg.norm(source.mean(axis=0) - target.mean(axis=0)))


def clone_model(model: Network) -> Network:
    """Independent copy with identical parameters (freeze flags reset)."""
    from .nncore import network_from_descriptor

    copy = network_from_descriptor(model.describe())
    for dst, src in zip(copy.parameters(), model.parameters(), strict=True):
        np.copyto(dst, src)
    return copy


def transfer_finetune(
    source_model: Network,
    target_data: PreparedDataset,
    cfg: TrainConfig,
    freeze: str = "none",
) -> tuple[Network, TrainHistory]:
    """Continue training a copy of the source model on target-domain data.

    ``freeze="conv"`` pins both convolutional layers: they receive no
    optimizer updates and come out bit-identical. Optimizer state starts
    fresh either way.
    """
    if freeze not in FREEZE_MODES:
        raise ValueError(f"freeze must be one of {FREEZE_MODES}")
    model = clone_model(source_model)
    if freeze == "conv":
        for layer in model.layers:
            if isinstance(layer, Conv1D):
                layer.frozen = True
    return train(model, target_data, cfg)
