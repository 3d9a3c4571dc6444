"""Mini-batch training loop for the contact classifier.

Adam by default (plain SGD selectable), mean-reduced cross-entropy,
per-window z-score normalization applied on the fly. Deterministic given
the config seed: initialization, shuffling and dropout masks all draw from
one seeded generator. Returns the parameters scoring the best validation
accuracy along with a per-epoch log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import WindowSet, normalize_window
from . import network as net


class EmptyDatasetError(ValueError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 30
    learning_rate: float = 1e-4
    epochs: int = 30
    dropout: float = 0.2
    seed: int = 0
    optimizer: str = "adam"  # "adam" | "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


class _Adam:
    """In-place Adam; scratch buffers keep the big layers allocation-free."""

    def __init__(self, params, config):
        self.cfg = config
        self.step_count = 0
        self.m = [None if p is None else (np.zeros_like(p[0]), np.zeros_like(p[1])) for p in params]
        self.v = [None if p is None else (np.zeros_like(p[0]), np.zeros_like(p[1])) for p in params]
        self.scratch = [None if p is None else (np.empty_like(p[0]), np.empty_like(p[1])) for p in params]

    def step(self, params, grads):
        cfg = self.cfg
        self.step_count += 1
        b1c = 1.0 - cfg.adam_beta1**self.step_count
        b2c = 1.0 - cfg.adam_beta2**self.step_count
        scale = cfg.learning_rate / b1c
        sqrt_b2c = np.sqrt(b2c)
        for i, grad in enumerate(grads):
            if grad is None:
                continue
            for j in range(2):
                g = grad[j]
                m, v, buf = self.m[i][j], self.v[i][j], self.scratch[i][j]
                m *= cfg.adam_beta1
                np.multiply(g, 1.0 - cfg.adam_beta1, out=buf)
                m += buf
                v *= cfg.adam_beta2
                np.multiply(g, g, out=buf)
                buf *= 1.0 - cfg.adam_beta2
                v += buf
                np.sqrt(v, out=buf)
                buf /= sqrt_b2c
                buf += cfg.adam_eps
                np.divide(m, buf, out=buf)
                buf *= scale
                np.subtract(params[i][j], buf, out=params[i][j])
        return params


class _Sgd:
    def __init__(self, params, config):
        self.cfg = config

    def step(self, params, grads):
        lr = self.cfg.learning_rate
        for i, grad in enumerate(grads):
            if grad is None:
                continue
            params[i] = (params[i][0] - lr * grad[0], params[i][1] - lr * grad[1])
        return params


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def evaluate_accuracy(params, spec, windows: WindowSet, batch_size=256):
    """Fraction of windows whose predicted code matches the label."""
    if windows.labels is None:
        raise EmptyDatasetError("window set has no labels")
    n = len(windows)
    correct = 0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        x = normalize_window(windows.batch(idx))
        pred = net.predict_batch(params, spec, x)
        correct += int(np.sum(pred == windows.labels[idx]))
    return correct / n


def train(train_windows: WindowSet, config: TrainConfig, spec, val_windows=None):
    """Optimize the network; returns (best params, per-epoch log rows).

    Log rows are dicts with epoch, train_loss, train_acc, val_acc. "Best"
    means highest validation accuracy (training accuracy when no validation
    set is supplied), ties resolved to the earliest epoch.
    """
    if len(train_windows) == 0:
        raise EmptyDatasetError("empty training set")
    if train_windows.labels is None:
        raise EmptyDatasetError("training windows carry no labels")
    rng = np.random.default_rng(config.seed)
    params = net.init_params(spec, rng)
    opt = (_Adam if config.optimizer == "adam" else _Sgd)(params, config)

    best_params = [None if p is None else (p[0].copy(), p[1].copy()) for p in params]
    best_score = -1.0
    log = []
    n = len(train_windows)
    for epoch in range(1, config.epochs + 1):
        total_loss = 0.0
        total_correct = 0
        for idx in _batches(n, config.batch_size, rng):
            x = normalize_window(train_windows.batch(idx))
            y = train_windows.labels[idx]
            value, grads, logits = net.loss_and_grads(params, spec, x, y, "train", rng)
            params = opt.step(params, grads)
            total_loss += value * len(idx)
            total_correct += int(np.sum(np.argmax(logits, axis=1) == y))
        train_loss = total_loss / n
        train_acc = total_correct / n
        if val_windows is not None and len(val_windows):
            val_acc = evaluate_accuracy(params, spec, val_windows)
        else:
            val_acc = train_acc
        log.append(
            {"epoch": epoch, "train_loss": train_loss, "train_acc": train_acc, "val_acc": val_acc}
        )
        if val_acc > best_score:
            best_score = val_acc
            best_params = [None if p is None else (p[0].copy(), p[1].copy()) for p in params]
    return best_params, log


def write_training_log(path, log):
    with open(path, "w") as f:
        f.write("epoch,train_loss,train_acc,val_acc\n")
        for row in log:
            f.write(
                f"{row['epoch']},{row['train_loss']!r},{row['train_acc']!r},{row['val_acc']!r}\n"
            )
