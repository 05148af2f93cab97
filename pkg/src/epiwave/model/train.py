"""Mini-batch training with a running-mean batch loss and Adam."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import autodiff as ad
from ..core.adam import AdamState, adam_step
from ..wmn import denormalize_cases
from .data import Batch, PreparedData

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def batch_loss(tape, pred: ad.Node, target) -> ad.Node:
    """Running mean of per-window squared errors.

    L_1 = l_1, L_m = (m-1)/m * L_{m-1} + l_m / m, which equals the plain mean
    of the window losses.
    """
    losses = ad.squared_error_mean(pred, target, axes=(1, 2))
    total = ad.take(losses, 0)
    for m in range(2, losses.value.shape[0] + 1):
        total = ad.add(ad.scale(total, (m - 1) / m), ad.scale(ad.take(losses, m - 1), 1.0 / m))
    return total


def loss_and_grads(model, params: dict, batch: Batch, train=False, rng=None):
    tape = ad.Tape()
    nodes = {k: tape.param(v, name=k) for k, v in params.items()}
    loss = batch_loss(tape, model.forward(tape, nodes, batch, train=train, rng=rng), batch.target)
    tape.backward(loss)
    grads = {k: (n.grad if n.grad is not None else np.zeros_like(n.value)) for k, n in nodes.items()}
    return float(loss.value), grads


def loss_value(model, params: dict, batch: Batch) -> float:
    tape = ad.Tape()
    nodes = {k: tape.const(v) for k, v in params.items()}
    return float(batch_loss(tape, model.forward(tape, nodes, batch, train=False), batch.target).value)


def forecast(model, params: dict, batch: Batch) -> np.ndarray:
    """Normalized forecasts (B, D2, n) in evaluation mode."""
    tape = ad.Tape()
    nodes = {k: tape.const(v) for k, v in params.items()}
    return model.forward(tape, nodes, batch, train=False).value


@dataclass
class TrainResult:
    params: dict
    best_epoch: int
    log: list = field(default_factory=list)  # one dict per epoch


def train(model, data: PreparedData, train_anchors, val_anchors=(), *, epochs=None, batch_size=None,
          lr=None, seed=None, params=None, frozen=()) -> TrainResult:
    """Fit ``model`` on windows anchored at ``train_anchors``.

    Each epoch shuffles the anchors, runs Adam on every mini-batch and
    evaluates the validation windows. The parameters of the epoch with the
    lowest validation loss (training loss when there are no validation
    windows) are returned. Names in ``frozen`` are never updated.
    """
    cfg = model.cfg
    epochs = cfg.epochs if epochs is None else epochs
    batch_size = cfg.batch_size if batch_size is None else batch_size
    lr = cfg.lr if lr is None else lr
    seed = cfg.seed if seed is None else seed
    train_anchors = np.asarray(train_anchors, dtype=np.int64)
    val_anchors = np.asarray(val_anchors, dtype=np.int64)
    if train_anchors.size == 0:
        raise TrainingError("no training windows")

    if params is None:
        params = model.init_params(np.random.default_rng([seed, 0]))
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    unknown = set(frozen) - set(params)
    if unknown:
        raise KeyError(f"cannot freeze unknown parameters {sorted(unknown)}")
    drop_rng = np.random.default_rng([seed, 1])
    order_rng = np.random.default_rng([seed, 2])
    state = AdamState(lr=lr)
    val_batch = data.batch(val_anchors, cfg.d1, cfg.d2) if val_anchors.size else None

    best = (math.inf, -1, {k: v.copy() for k, v in params.items()})
    history = []
    for epoch in range(epochs):
        order = order_rng.permutation(train_anchors)
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = data.batch(order[start:start + batch_size], cfg.d1, cfg.d2)
            loss, grads = loss_and_grads(model, params, batch, train=True, rng=drop_rng)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting at {start}")
            adam_step(params, grads, state, frozen=frozen)
            epoch_loss += loss * len(batch)
        train_loss = epoch_loss / len(order)
        val_loss = loss_value(model, params, val_batch) if val_batch is not None else train_loss
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.debug("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
        if val_loss < best[0]:
            best = (val_loss, epoch, {k: v.copy() for k, v in params.items()})
    if epochs == 0:
        return TrainResult(params, -1, history)
    return TrainResult(best[2], best[1], history)


def predict_counts(model, params: dict, data: PreparedData, anchors) -> np.ndarray:
    """Forecast case counts (B, D2, n) on the raw scale, floored at zero."""
    cfg = model.cfg
    anchors = np.asarray(anchors, dtype=np.int64)
    out = forecast(model, params, data.batch(anchors, cfg.d1, cfg.d2))
    return np.maximum(denormalize_cases(out, data.stats), 0.0)
