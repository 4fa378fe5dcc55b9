"""Mini-batch training and batched scoring."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data.features import Arrays
from .errors import InsufficientDataError
from .model.network import DualChannelNet
from .nn.optim import OptimizerState, sgd_step


@dataclass
class LogRow:
    epoch: int
    step: int
    loss: float
    lr: float


def _inputs(model: DualChannelNet, data: Arrays, idx):
    images = data.images[idx] if model.config.uses_deep else None
    feats = data.features[idx] if model.config.uses_wide else None
    return images, feats


def batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index batches; a trailing batch of one is dropped (batch norm needs two)."""
    order = rng.permutation(n)
    out = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(out) > 1 and out[-1].size < 2:
        out.pop()
    return out


def train(model: DualChannelNet, data: Arrays, epochs: int = 10, batch_size: int = 32,
          optimizer: OptimizerState | None = None, seed: int = 0,
          on_epoch: Callable[[int, DualChannelNet], None] | None = None,
          start_epoch: int = 0, fit_standardizer: bool | None = None
          ) -> tuple[OptimizerState, list[LogRow]]:
    """SGD on mean BCE. Shuffling and dropout are driven by ``seed`` alone.

    The wide-channel input scaling is fitted on ``data`` when starting fresh
    (``optimizer`` is None) unless ``fit_standardizer`` says otherwise.
    """
    if len(data) < 2:
        raise InsufficientDataError("training needs at least two samples")
    if batch_size < 2:
        raise ValueError("batch size must be >= 2")
    if fit_standardizer is None:
        fit_standardizer = optimizer is None
    optimizer = optimizer or OptimizerState()
    if fit_standardizer:
        model.fit_standardizer(data.features)
    model.reseed_dropout([seed, start_epoch])
    params = model.params()
    log: list[LogRow] = []
    model.set_training(True)
    try:
        for epoch in range(start_epoch, start_epoch + epochs):
            rng = np.random.default_rng([seed, epoch])
            for idx in batches(len(data), batch_size, rng):
                images, feats = _inputs(model, data, idx)
                lr = optimizer.lr
                loss, _ = model.loss_and_grad(images, feats, data.labels[idx])
                sgd_step(params, model.grads(), optimizer)
                log.append(LogRow(epoch + 1, optimizer.step, float(loss), lr))
            if on_epoch is not None:
                model.set_training(False)
                on_epoch(epoch + 1, model)
                model.set_training(True)
    finally:
        model.set_training(False)
    return optimizer, log


def predict(model: DualChannelNet, data: Arrays, batch_size: int = 64) -> np.ndarray:
    """Spoof probabilities in inference mode."""
    was = model.training
    model.set_training(False)
    out = []
    try:
        for i in range(0, len(data), batch_size):
            idx = np.arange(i, min(i + batch_size, len(data)))
            out.append(model.forward(*_inputs(model, data, idx)))
    finally:
        model.set_training(was)
    return np.concatenate(out).astype(np.float64) if out else np.zeros(0)
