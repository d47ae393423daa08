"""Seeded mini-batch training loop with patience-based early stopping.

Epochs are 1-indexed. After every epoch the data-term loss (no L2 penalty)
is recorded on the full training and validation sets in inference mode;
training stops when the validation loss has not improved for `patience`
consecutive epochs, and the parameters of the best epoch are restored.
Runs are bit-reproducible for a fixed seed in single-threaded execution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .layers import Dense
from .losses import LOSSES, add_l2_grads
from .network import Network
from .optim import SAG, Adam, SGD

OPTIMIZERS = ("sgd", "adam", "sag")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    l2_lambda: float = 0.0
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class TrainHistory:
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_table(self) -> str:
        lines = ["epoch\ttrain_loss\tval_loss"]
        for i, (tr, va) in enumerate(zip(self.train_losses, self.val_losses), start=1):
            lines.append(f"{i}\t{tr:.10g}\t{va:.10g}")
        return "\n".join(lines) + "\n"


class EarlyStopping:
    """Stop once the monitored loss fails to improve for `patience`
    consecutive epochs; tracks the best epoch seen."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.strikes = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record an epoch's loss; True means stop now."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.strikes = 0
        else:
            self.strikes += 1
        return self.strikes >= self.patience


def forward_in_batches(network: Network, x: np.ndarray,
                       batch_size: int = 256) -> np.ndarray:
    outs = [network.forward(x[i:i + batch_size], train=False)
            for i in range(0, x.shape[0], batch_size)]
    return np.concatenate(outs, axis=0)


def train(
    network: Network,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig,
    loss_kind: str = "bce",
) -> TrainHistory:
    """Fit the network in place and return its loss history.

    y arrays must already be encoded for the head (column vector for a
    single sigmoid unit, one-hot rows otherwise).
    """
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation sets must be non-empty")
    loss_fn, grad_fn = LOSSES[loss_kind]
    m = x_train.shape[0]

    seq = np.random.SeedSequence(config.seed)
    init_rng, shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in seq.spawn(3))
    network.initialize(init_rng)

    sag: Optional[SAG] = None
    if config.optimizer == "sag":
        sag = _make_sag(network, config, m)
        stepper = None
    elif config.optimizer == "adam":
        stepper = Adam(config.learning_rate, config.adam_beta1,
                       config.adam_beta2, config.adam_eps)
    else:
        stepper = SGD(config.learning_rate)

    history = TrainHistory()
    stopper = EarlyStopping(config.patience)
    best_state = network.get_state()

    for epoch in range(1, config.max_epochs + 1):
        if sag is not None:
            _sag_epoch(network, sag, x_train, y_train, config, loss_kind, shuffle_rng)
        else:
            _batch_epoch(network, stepper, x_train, y_train, config, grad_fn,
                         shuffle_rng, dropout_rng, epoch)

        train_loss = loss_fn(forward_in_batches(network, x_train), y_train)
        val_loss = loss_fn(forward_in_batches(network, x_val), y_val)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch} "
                f"(lr={config.learning_rate}, optimizer={config.optimizer})"
            )
        history.train_losses.append(train_loss)
        history.val_losses.append(val_loss)

        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_state = network.get_state()
        if stop:
            history.stopped_epoch = epoch
            break
    else:
        history.stopped_epoch = config.max_epochs

    history.best_epoch = stopper.best_epoch
    network.set_state(best_state)
    return history


def _batch_epoch(network, stepper, x, y, config, grad_fn, shuffle_rng,
                 dropout_rng, epoch) -> None:
    m = x.shape[0]
    perm = shuffle_rng.permutation(m)
    for start in range(0, m, config.batch_size):
        idx = perm[start:start + config.batch_size]
        xb, yb = x[idx], y[idx]
        yhat = network.forward(xb, train=True, rng=dropout_rng)
        if not np.all(np.isfinite(yhat)):
            raise TrainingError(
                f"non-finite activations at epoch {epoch}, batch {start // config.batch_size} "
                f"(lr={config.learning_rate})"
            )
        grad = grad_fn(yhat, yb)
        network.zero_grads()
        network.backward(grad)
        add_l2_grads(network, config.l2_lambda, len(idx))
        stepper.step(network)


def _make_sag(network: Network, config: TrainConfig, m: int) -> SAG:
    params = network.parameters()
    if len(network.layers) != 1 or not isinstance(network.layers[0], Dense) \
            or len(params) != 2:
        raise TrainingError(
            "the sag optimizer supports single dense-layer networks; "
            "use sgd or adam for deeper stacks"
        )
    return SAG(config.learning_rate, m, network.layers[0])


def _sag_epoch(network, sag, x, y, config, loss_kind, shuffle_rng) -> None:
    m = x.shape[0]
    layer = network.layers[0]
    k = layer.n_out
    y2d = np.asarray(y, dtype=np.float64).reshape(m, k)
    for i in shuffle_rng.integers(0, m, size=m):
        yhat = layer.forward(x[i:i + 1], train=False)
        delta = (yhat[0] - y2d[i])
        if loss_kind == "bce":
            delta = delta / k
        sag.step(int(i), x[i], delta, lam=config.l2_lambda)
