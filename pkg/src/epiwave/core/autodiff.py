"""Reverse-mode differentiation over a fixed set of primitives.

Only the operations the forecaster needs are provided. Values are float64
numpy arrays; matrix-valued primitives broadcast over leading batch axes the
way ``numpy.matmul`` does.
"""
from __future__ import annotations

import logging

import numpy as np

from .. import kernels

log = logging.getLogger(__name__)

EXP_CLAMP = 50.0


class ShapeError(ValueError):
    pass


class Node:
    __slots__ = ("tape", "value", "grad", "parents", "backward", "requires_grad", "name", "op")

    def __init__(self, tape, value, parents=(), backward=None, requires_grad=False, name=None, op="leaf"):
        self.tape = tape
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward = backward
        self.requires_grad = requires_grad
        self.name = name
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape}, name={self.name})"


class Tape:
    """Ordered record of primitive applications.

    ``backward`` walks the record in reverse and accumulates gradients into
    every node created with ``requires_grad``.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.clamped = 0

    def param(self, value, name=None) -> Node:
        node = Node(self, np.asarray(value, dtype=np.float64), requires_grad=True, name=name)
        self.nodes.append(node)
        return node

    def const(self, value) -> Node:
        return Node(self, np.asarray(value, dtype=np.float64), op="const")

    def record(self, op, value, parents, backward) -> Node:
        needs = any(p.requires_grad for p in parents)
        node = Node(self, value, parents, backward if needs else None, needs, op=op)
        if needs:
            self.nodes.append(node)
        return node

    @property
    def ops(self) -> list[str]:
        return [n.op for n in self.nodes]

    def backward(self, out: Node) -> None:
        if out.value.size != 1:
            raise ShapeError(f"backward needs a scalar output, got shape {out.value.shape}")
        out.grad = np.ones_like(out.value)
        for node in reversed(self.nodes):
            if node.backward is None or node.grad is None:
                continue
            grads = node.backward(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.array(g, dtype=np.float64, copy=True)
                else:
                    parent.grad = parent.grad + g


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def matmul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {av.shape} x {bv.shape}")
    out = av @ bv

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape) if b.requires_grad else None
        return ga, gb

    return a.tape.record("matmul", out, (a, b), backward)


def add(a: Node, b: Node) -> Node:
    try:
        out = a.value + b.value
    except ValueError:
        raise ShapeError(f"add shape mismatch: {a.value.shape} + {b.value.shape}") from None

    def backward(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return a.tape.record("add", out, (a, b), backward)


def mul(a: Node, b: Node) -> Node:
    """Hadamard product with broadcasting."""
    try:
        out = a.value * b.value
    except ValueError:
        raise ShapeError(f"mul shape mismatch: {a.value.shape} * {b.value.shape}") from None

    def backward(g):
        ga = _unbroadcast(g * b.value, a.value.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.value, b.value.shape) if b.requires_grad else None
        return ga, gb

    return a.tape.record("mul", out, (a, b), backward)


def scale(a: Node, c: float) -> Node:
    out = a.value * c
    return a.tape.record("scale", out, (a,), lambda g: (g * c,))


def relu(a: Node) -> Node:
    # subgradient at 0 is 0
    mask = a.value > 0
    out = np.where(mask, a.value, 0.0)
    return a.tape.record("relu", out, (a,), lambda g: (g * mask,))


def sigmoid(a: Node) -> Node:
    out = 0.5 * (np.tanh(0.5 * a.value) + 1.0)
    return a.tape.record("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)
    return a.tape.record("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def concat(nodes: list[Node], axis: int = -1) -> Node:
    values = [n.value for n in nodes]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError:
        raise ShapeError(f"concat shape mismatch: {[v.shape for v in values]}") from None
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return nodes[0].tape.record("concat", out, tuple(nodes), backward)


def take(a: Node, index, axis: int = 0) -> Node:
    """Select entries (a slice, an int or an index array) along one axis."""
    sl = [slice(None)] * a.value.ndim
    sl[axis] = index
    sl = tuple(sl)
    out = a.value[sl]

    def backward(g):
        full = np.zeros_like(a.value)
        if isinstance(index, (slice, int, np.integer)):
            full[sl] = g
        else:
            np.add.at(full, sl, g)
        return (full,)

    return a.tape.record("take", out, (a,), backward)


def reshape(a: Node, shape) -> Node:
    src = a.value.shape
    out = a.value.reshape(shape)
    return a.tape.record("reshape", out, (a,), lambda g: (g.reshape(src),))


def transpose(a: Node, axes) -> Node:
    inverse = np.argsort(axes)
    out = np.transpose(a.value, axes)
    return a.tape.record("transpose", out, (a,), lambda g: (np.transpose(g, inverse),))


def exp_row_scale(x: Node, rate: Node, elapsed) -> Node:
    """Multiply row i of ``x`` by exp(rate_i**2 * elapsed).

    ``x`` is (..., n, d), ``rate`` is (n,) and ``elapsed`` broadcasts against
    the leading axes of ``x``. Exponents above ``EXP_CLAMP`` are clamped
    (zero gradient there) and counted on the tape.
    """
    lam = rate.value
    elapsed = np.asarray(elapsed, dtype=np.float64)
    if lam.shape != (x.value.shape[-2],):
        raise ShapeError(f"rate shape {lam.shape} does not match rows of {x.value.shape}")
    expo = (lam * lam) * elapsed[..., None]
    over = expo > EXP_CLAMP
    if over.any():
        x.tape.clamped += int(over.sum())
        log.warning("awareness exponent clamped at %s for %d entries", EXP_CLAMP, int(over.sum()))
        expo = np.minimum(expo, EXP_CLAMP)
    factor = np.exp(expo)[..., None]
    out = x.value * factor

    def backward(g):
        gx = g * factor if x.requires_grad else None
        grate = None
        if rate.requires_grad:
            d_expo = (g * out).sum(axis=-1) * np.where(over, 0.0, 1.0)
            d_expo = d_expo * elapsed[..., None]
            grate = 2.0 * lam * d_expo.reshape(-1, lam.shape[0]).sum(axis=0)
        return gx, grate

    return x.tape.record("exp_row_scale", out, (x, rate), backward)


def squared_error_mean(pred: Node, target, axes) -> Node:
    """Mean of (pred - target)**2 over ``axes``; ``target`` is a constant array."""
    target = np.asarray(target, dtype=np.float64)
    if pred.value.shape != target.shape:
        raise ShapeError(f"mse shape mismatch: {pred.value.shape} vs {target.shape}")
    diff = pred.value - target
    count = int(np.prod([pred.value.shape[a] for a in axes]))
    out = (diff * diff).sum(axis=axes) / count

    def backward(g):
        g = np.expand_dims(g, axis=axes) if np.ndim(g) else g
        return (g * 2.0 * diff / count,)

    return pred.tape.record("mse", np.asarray(out), (pred,), backward)


def lstm_layer(x: Node, w_in: Node, w_rec: Node, bias: Node, h0: Node, c0: Node) -> Node:
    """One LSTM layer over a whole sequence.

    ``x`` is (T, N, I). Returns a (T, N, 2H) node holding hidden states in
    the first H columns and cell states in the last H.
    """
    xv = x.value
    steps, rows, _ = xv.shape
    if w_in.value.shape[0] != xv.shape[2] or w_rec.value.shape[1] != w_in.value.shape[1]:
        raise ShapeError(f"lstm weights {w_in.value.shape}, {w_rec.value.shape} do not fit input {xv.shape}")
    hidden = w_rec.value.shape[0]
    xw = (xv.reshape(steps * rows, -1) @ w_in.value).reshape(steps, rows, 4 * hidden) + bias.value
    hs, cs, gates = kernels.lstm_recurrence(
        np.ascontiguousarray(xw), np.ascontiguousarray(w_rec.value),
        np.ascontiguousarray(h0.value), np.ascontiguousarray(c0.value))
    out = np.concatenate([hs, cs], axis=-1)

    def backward(g):
        dhs = np.ascontiguousarray(g[..., :hidden])
        dcs = np.ascontiguousarray(g[..., hidden:])
        dz, dwh, dh0, dc0 = kernels.lstm_recurrence_backward(
            dhs, dcs, np.ascontiguousarray(w_rec.value),
            np.ascontiguousarray(h0.value), np.ascontiguousarray(c0.value), hs, cs, gates)
        flat = dz.reshape(steps * rows, 4 * hidden)
        dx = (flat @ w_in.value.T).reshape(xv.shape) if x.requires_grad else None
        dw_in = xv.reshape(steps * rows, -1).T @ flat
        db = flat.sum(axis=0)
        return dx, dw_in, dwh, db, dh0, dc0

    return x.tape.record("lstm_layer", out, (x, w_in, w_rec, bias, h0, c0), backward)


def lstm_cell(x: Node, h: Node, c: Node, w_in: Node, w_rec: Node, bias: Node) -> tuple[Node, Node]:
    """One LSTM step composed from elementary primitives.

    Gate order is input, forget, candidate, output, matching ``lstm_layer``.
    """
    hidden = w_rec.value.shape[0]
    if w_in.value.shape[0] != x.value.shape[-1] or h.value.shape[-1] != hidden:
        raise ShapeError(
            f"lstm cell shapes do not fit: x {x.value.shape}, h {h.value.shape}, "
            f"w_in {w_in.value.shape}, w_rec {w_rec.value.shape}")
    z = add(add(matmul(x, w_in), matmul(h, w_rec)), bias)
    i = sigmoid(take(z, slice(0, hidden), axis=-1))
    f = sigmoid(take(z, slice(hidden, 2 * hidden), axis=-1))
    g = tanh(take(z, slice(2 * hidden, 3 * hidden), axis=-1))
    o = sigmoid(take(z, slice(3 * hidden, 4 * hidden), axis=-1))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new
