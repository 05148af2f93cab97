"""Comparison forecasters: historical averages, LSTM and seq2seq."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import autodiff as ad
from .model.config import ModelConfig
from .model.data import Batch
from .model.network import (district_sequence, lstm_params, rows_to_batch, run_stack, temporal_forward,
                            temporal_params, uniform_init)

KINDS = ("ha_all", "ha_window", "lstm", "seq2seq")
FEATURES = ("I", "IW")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str
    features: str = "I"
    window: int | None = None  # ha_window length; None means D1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}; expected one of {KINDS}")
        if self.features not in FEATURES:
            raise ValueError(f"unknown feature set {self.features!r}; expected one of {FEATURES}")
        if self.kind.startswith("ha") and self.features != "I":
            raise ValueError("historical averages use infection counts only")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be positive")


def _repeat_means(block, d2) -> np.ndarray:
    # each district reduced as its own contiguous row, so the result does not
    # depend on column order or memory layout
    means = np.ascontiguousarray(block.T).mean(axis=1)
    return np.repeat(means[None, :], d2, axis=0)


def ha_all(cases, anchor: int, d2: int) -> np.ndarray:
    """Mean of each district's cases over days 0..anchor, repeated for D2 days."""
    cases = np.asarray(cases, dtype=np.float64)
    if not 0 <= anchor < len(cases):
        raise ValueError(f"anchor {anchor} outside the series")
    return _repeat_means(cases[:anchor + 1], d2)


def ha_window(cases, anchor: int, d1: int, d2: int) -> np.ndarray:
    """Mean of each district's cases over the last D1 days up to the anchor, repeated D2 times."""
    cases = np.asarray(cases, dtype=np.float64)
    if anchor - d1 + 1 < 0 or anchor >= len(cases):
        raise ValueError(f"need {d1} days of history before anchor {anchor}")
    return _repeat_means(cases[anchor - d1 + 1:anchor + 1], d2)


def ha_forecasts(kind, cases, anchors, d1, d2, window=None) -> np.ndarray:
    """Raw-count forecasts (B, D2, n) for a list of anchors."""
    if kind == "ha_all":
        return np.stack([ha_all(cases, t, d2) for t in anchors])
    return np.stack([ha_window(cases, t, window or d1, d2) for t in anchors])


def _features(tape, batch: Batch, features) -> ad.Node:
    cases = batch.cases[..., None]
    if features == "IW":
        cases = np.concatenate([cases, batch.search], axis=-1)
    return tape.const(cases)  # (B, D1, n, F)


class LstmForecaster:
    """Per-district stacked LSTM over cases (and search) with the SAB-GNN readout."""

    def __init__(self, cfg: ModelConfig, n: int, k: int, features="I"):
        self.cfg = cfg
        self.n = n
        self.width = 1 + (k if features == "IW" else 0)
        self.features = features
        self.name = f"lstm_{features}"

    def init_params(self, rng) -> dict:
        return temporal_params(rng, self.cfg, self.width)

    def forward(self, tape, p, batch: Batch, train=False, rng=None) -> ad.Node:
        seq = district_sequence(_features(tape, batch, self.features))
        return rows_to_batch(temporal_forward(seq, p, self.cfg, train, rng), len(batch), self.n)


class Seq2SeqForecaster:
    """Encoder LSTM over the input window, separate decoder LSTM rolled D2 steps.

    Each decoder layer starts from the final (hidden, cell) state of the
    matching encoder layer and steps on zero input; a shared perceptron maps
    every decoder hidden state to one day's forecast.
    """

    def __init__(self, cfg: ModelConfig, n: int, k: int, features="I"):
        self.cfg = cfg
        self.n = n
        self.width = 1 + (k if features == "IW" else 0)
        self.features = features
        self.name = f"seq2seq_{features}"

    def init_params(self, rng) -> dict:
        cfg = self.cfg
        p = lstm_params(rng, "enc", self.width, cfg.hidden, cfg.l2)
        p.update(lstm_params(rng, "dec", 1, cfg.hidden, cfg.l2))
        p["readout.w"] = uniform_init(rng, (cfg.hidden, 1), cfg.hidden)
        p["readout.b"] = uniform_init(rng, (1,), cfg.hidden)
        return p

    def encode(self, tape, p, batch, train, rng):
        cfg = self.cfg
        seq = district_sequence(_features(tape, batch, self.features))
        _, outs = run_stack(seq, p, "enc", cfg.l2, cfg.hidden, cfg.dropout, train, rng)
        states = []
        for out in outs:
            last = ad.take(out, seq.value.shape[0] - 1, axis=0)  # (N, 2H)
            states.append((ad.take(last, slice(0, cfg.hidden), axis=1),
                           ad.take(last, slice(cfg.hidden, 2 * cfg.hidden), axis=1)))
        return states

    def decode(self, tape, p, states, train, rng) -> ad.Node:
        cfg = self.cfg
        rows = states[0][0].value.shape[0]
        zeros = tape.const(np.zeros((cfg.d2, rows, 1)))
        h, _ = run_stack(zeros, p, "dec", cfg.l2, cfg.hidden, cfg.dropout, train, rng, init=states)
        y = ad.add(ad.matmul(h, p["readout.w"]), p["readout.b"])
        return ad.reshape(y, (cfg.d2, rows))

    def forward(self, tape, p, batch: Batch, train=False, rng=None) -> ad.Node:
        states = self.encode(tape, p, batch, train, rng)
        return rows_to_batch(self.decode(tape, p, states, train, rng), len(batch), self.n)


def make_baseline(config: BaselineConfig, model_cfg: ModelConfig, n: int, k: int):
    if config.kind == "lstm":
        return LstmForecaster(model_cfg, n, k, config.features)
    if config.kind == "seq2seq":
        return Seq2SeqForecaster(model_cfg, n, k, config.features)
    raise ValueError(f"{config.kind} is not a trainable baseline")
