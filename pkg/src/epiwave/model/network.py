"""SAB-GNN forward pass and its ablation variants.

Every model here exposes ``init_params(rng)`` returning an ordered dict of
arrays and ``forward(tape, params, batch, train, rng)`` returning a
(B, D2, n) node of normalized forecasts. Training code treats them alike.
"""
from __future__ import annotations

import numpy as np

from ..core import autodiff as ad
from .config import ModelConfig
from .data import Batch


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def lstm_params(rng, prefix, n_in, hidden, layers) -> dict:
    out = {}
    for layer in range(layers):
        width = n_in if layer == 0 else hidden
        out[f"{prefix}.{layer}.w_in"] = uniform_init(rng, (width, 4 * hidden), width)
        out[f"{prefix}.{layer}.w_rec"] = uniform_init(rng, (hidden, 4 * hidden), hidden)
        out[f"{prefix}.{layer}.bias"] = uniform_init(rng, (4 * hidden,), hidden)
    return out


def dropout(h: ad.Node, rate, train, rng) -> ad.Node:
    if not train or rate <= 0.0:
        return h
    keep = (rng.random(h.value.shape) >= rate) / (1.0 - rate)
    return ad.mul(h, h.tape.const(keep))


def run_stack(x: ad.Node, p, prefix, layers, hidden, rate, train, rng, init=None):
    """Stacked LSTM over ``x`` (T, N, F).

    Returns the last layer's hidden sequence (after dropout) and the per-layer
    full outputs, so callers can read final cell states. ``init`` optionally
    gives (h0, c0) nodes per layer.
    """
    tape = x.tape
    rows = x.value.shape[1]
    outs = []
    for layer in range(layers):
        if init is None:
            h0 = c0 = tape.const(np.zeros((rows, hidden)))
        else:
            h0, c0 = init[layer]
        out = ad.lstm_layer(x, p[f"{prefix}.{layer}.w_in"], p[f"{prefix}.{layer}.w_rec"],
                            p[f"{prefix}.{layer}.bias"], h0, c0)
        outs.append(out)
        x = dropout(ad.take(out, slice(0, hidden), axis=2), rate, train, rng)
    return x, outs


def temporal_params(rng, cfg: ModelConfig, n_in) -> dict:
    p = lstm_params(rng, "lstm", n_in, cfg.hidden, cfg.l2)
    if cfg.readout == "rollout":
        p["readout.w"] = uniform_init(rng, (cfg.hidden, 1), cfg.hidden)
        p["readout.b"] = uniform_init(rng, (1,), cfg.hidden)
    else:
        p["readout.w"] = uniform_init(rng, (cfg.hidden, cfg.d2), cfg.hidden)
        p["readout.b"] = uniform_init(rng, (cfg.d2,), cfg.hidden)
    return p


def temporal_forward(seq: ad.Node, p, cfg: ModelConfig, train, rng) -> ad.Node:
    """Stacked LSTM plus perceptron over ``seq`` (D1, N, F); returns (D2, N).

    With the rollout readout the LSTM keeps stepping for D2 more days on zero
    input and one shared perceptron maps each extra hidden state to a
    forecast. With the direct readout the last input-day hidden state is
    mapped to all D2 forecasts at once.
    """
    tape = seq.tape
    d1, rows, width = seq.value.shape
    if cfg.readout == "rollout":
        x = ad.concat([seq, tape.const(np.zeros((cfg.d2, rows, width)))], axis=0)
        h, _ = run_stack(x, p, "lstm", cfg.l2, cfg.hidden, cfg.dropout, train, rng)
        future = ad.take(h, slice(d1, d1 + cfg.d2), axis=0)
        y = ad.add(ad.matmul(future, p["readout.w"]), p["readout.b"])
        return ad.reshape(y, (cfg.d2, rows))
    h, _ = run_stack(seq, p, "lstm", cfg.l2, cfg.hidden, cfg.dropout, train, rng)
    last = ad.take(h, d1 - 1, axis=0)
    y = ad.add(ad.matmul(last, p["readout.w"]), p["readout.b"])  # (N, D2)
    return ad.transpose(y, (1, 0))


def rows_to_batch(y: ad.Node, batch_size, n) -> ad.Node:
    """(D2, B*n) -> (B, D2, n)."""
    d2 = y.value.shape[0]
    return ad.transpose(ad.reshape(y, (d2, batch_size, n)), (1, 0, 2))


def district_sequence(feat: ad.Node) -> ad.Node:
    """(B, D1, n, F) -> (D1, B*n, F)."""
    b, d1, n, f = feat.value.shape
    return ad.reshape(ad.transpose(feat, (1, 0, 2, 3)), (d1, b * n, f))


class SabGnn:
    """Graph convolution over mobility, awareness recovery, LSTM forecaster.

    ``variant`` selects ablations: ``wsa`` drops the awareness recovery,
    ``ws`` replaces the graph convolution with the identity on the search
    features, ``wt`` replaces the LSTM with a perceptron over the
    concatenated input window.
    """

    def __init__(self, cfg: ModelConfig, n: int, k: int):
        self.cfg = cfg
        self.n = n
        self.k = k
        self.name = "sabgnn" if cfg.variant == "full" else f"sabgnn_{cfg.variant}"

    @property
    def feature_width(self):
        return (self.k if self.cfg.variant == "ws" else self.cfg.spatial_dim) + 1

    def init_params(self, rng) -> dict:
        cfg = self.cfg
        p = {}
        if cfg.variant != "ws":
            width = self.k
            for layer in range(cfg.l1):
                p[f"gcn.{layer}.w"] = uniform_init(rng, (width, cfg.spatial_dim), width)
                width = cfg.spatial_dim
        if cfg.variant != "wsa":
            p["awareness.rate"] = np.full(self.n, float(cfg.lambda_init))
        if cfg.variant == "wt":
            width = cfg.d1 * self.feature_width
            p["window.w"] = uniform_init(rng, (width, cfg.d2), width)
            p["window.b"] = uniform_init(rng, (cfg.d2,), width)
        else:
            p.update(temporal_params(rng, cfg, self.feature_width))
        return p

    def awareness_features(self, tape, p, batch: Batch) -> ad.Node:
        """Search features after spatial mixing and awareness recovery, (B, D1, n, d)."""
        cfg = self.cfg
        x = tape.const(batch.search)
        if cfg.variant != "ws":
            adj = tape.const(batch.adjacency)
            for layer in range(cfg.l1):
                x = ad.relu(ad.matmul(ad.matmul(adj, x), p[f"gcn.{layer}.w"]))
        if cfg.variant != "wsa":
            x = ad.exp_row_scale(x, p["awareness.rate"], batch.elapsed)
        return x

    def forward(self, tape, p, batch: Batch, train=False, rng=None) -> ad.Node:
        cfg = self.cfg
        b, n = len(batch), self.n
        x = self.awareness_features(tape, p, batch)
        feat = ad.concat([x, tape.const(batch.cases[..., None])], axis=-1)  # (B, D1, n, d+1)
        if cfg.variant == "wt":
            flat = ad.reshape(ad.transpose(feat, (0, 2, 1, 3)), (b, n, cfg.d1 * self.feature_width))
            y = ad.add(ad.matmul(flat, p["window.w"]), p["window.b"])  # (B, n, D2)
            return ad.transpose(y, (0, 2, 1))
        return rows_to_batch(temporal_forward(district_sequence(feat), p, cfg, train, rng), b, n)
