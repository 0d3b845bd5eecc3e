"""Mini-batch training: Adam, MSE loss, early stopping, seeded determinism.

One ``fit`` call is single-threaded and fully deterministic given its seed;
independent fits (per horizon, per model, per seed) can safely run in
parallel because they share no mutable state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import ShapeError, Tensor
from .data import SampleWindow, stack_samples
from .models import Model


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class TrainConfig:
    max_epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 0.001
    patience: int = 20
    seed: int = 42

    def __post_init__(self):
        if min(self.max_epochs, self.batch_size, self.patience) < 1 or self.learning_rate <= 0:
            raise ValueError("all training settings must be positive")
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")


class Adam:
    """Bias-corrected Adam with the standard constants."""

    def __init__(self, params: Sequence[Tuple[str, Tensor]], learning_rate: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(t.data) for _, t in self.params]
        self.v = [np.zeros_like(t.data) for _, t in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (_, p) in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all elements of squared residuals."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return (diff * diff).mean()


class EarlyStopping:
    """Tracks the best validation loss and a snapshot of the best weights."""

    def __init__(self, model: Model, patience: int):
        self.model = model
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = 0
        self.epochs_since_improvement = 0
        self._snapshot = None

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record this epoch; returns True when training should stop."""
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.epochs_since_improvement = 0
            self._snapshot = [(name, arr.copy()) for name, arr in self.model.state_arrays()]
        else:
            self.epochs_since_improvement += 1
        return self.epochs_since_improvement >= self.patience

    def restore_best(self) -> None:
        if self._snapshot is None:
            return
        current = dict(self.model.state_arrays())
        params = dict(self.model.parameters())
        for name, arr in self._snapshot:
            if name in params:
                params[name].data = arr.copy()
            else:
                current[name][...] = arr

    def state(self) -> dict:
        return {"best_val_loss": self.best_loss, "best_epoch": self.best_epoch,
                "epochs_since_improvement": self.epochs_since_improvement}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    elapsed_s: float


@dataclass
class TrainingTrace:
    records: List[EpochRecord] = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    wall_time_s: float = 0.0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"epoch": r.epoch, "train_loss": r.train_loss,
                             "val_loss": r.val_loss, "elapsed_s": round(r.elapsed_s, 4)})
                 for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "TrainingTrace":
        trace = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            trace.records.append(EpochRecord(d["epoch"], d["train_loss"],
                                             d["val_loss"], d["elapsed_s"]))
        if trace.records:
            trace.epochs_run = len(trace.records)
            best = min(trace.records, key=lambda r: r.val_loss)
            trace.best_epoch, trace.best_val_loss = best.epoch, best.val_loss
        return trace


def _batch_bounds(n: int, batch_size: int) -> List[Tuple[int, int]]:
    """Contiguous batch index bounds; a trailing singleton joins the previous batch."""
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        bounds.pop(-2)
    return list(zip(bounds[:-1], bounds[1:]))


def evaluate_loss(model: Model, inputs: np.ndarray, targets: np.ndarray) -> float:
    """MSE of eval-mode predictions over a whole sample set."""
    preds = model.predict(inputs)
    return float(np.mean((preds - targets) ** 2))


def fit(model: Model, train_samples: Sequence[SampleWindow],
        val_samples: Sequence[SampleWindow], config: TrainConfig,
        log: Optional[callable] = None) -> TrainingTrace:
    """Train in place and restore the weights of the best validation epoch.

    Shuffling uses a generator seeded from ``config.seed``, so identical
    inputs and seed reproduce the loss trace bit for bit.
    """
    if not len(train_samples) or not len(val_samples):
        raise ValueError("fit requires nonempty training and validation sets")

    x_train, y_train = stack_samples(train_samples)
    x_val, y_val = stack_samples(val_samples)
    rng = np.random.default_rng(config.seed)
    optimizer = Adam(model.parameters(), config.learning_rate)
    stopper = EarlyStopping(model, config.patience)
    trace = TrainingTrace()
    started = time.perf_counter()

    model.train()
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x_train))
        total, seen = 0.0, 0
        for bi, (lo, hi) in enumerate(_batch_bounds(len(order), config.batch_size)):
            idx = order[lo:hi]
            optimizer.zero_grad()
            pred = model.forward(Tensor(x_train[idx]))
            loss = mse_loss(pred, Tensor(y_train[idx]))
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}"
                )
            loss.backward()
            optimizer.step()
            total += value * len(idx)
            seen += len(idx)

        train_loss = total / seen
        val_loss = evaluate_loss(model, x_val, y_val)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        model.train()
        trace.records.append(EpochRecord(epoch, train_loss, val_loss,
                                         time.perf_counter() - started))
        if log is not None:
            log(trace.records[-1])
        if stopper.update(epoch, val_loss):
            break

    stopper.restore_best()
    model.eval()
    trace.epochs_run = len(trace.records)
    trace.best_epoch = stopper.best_epoch
    trace.best_val_loss = stopper.best_loss
    trace.wall_time_s = time.perf_counter() - started
    return trace
