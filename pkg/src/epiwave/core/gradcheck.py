"""Central finite-difference check of analytic gradients."""
from dataclasses import dataclass

import numpy as np


class NondeterministicLoss(RuntimeError):
    pass


@dataclass
class TensorCheck:
    name: str
    max_rel_error: float
    passed: bool


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor).

    The floor sits near the resolution of central differences with a 1e-5
    step, so gradients that are numerically zero do not dominate the report.
    """
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_gradient(loss_fn, params, name, step=1e-5):
    arr = params[name]
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_fn(params)
        flat[i] = orig - step
        down = loss_fn(params)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def finite_diff_check(loss_fn, params, analytic, tolerance=1e-4, step=1e-5, floor=1e-6):
    """Compare ``analytic`` gradients against central differences.

    ``loss_fn(params)`` must return a float and must not depend on hidden
    state; two evaluations at the same point are compared first and any
    disagreement raises ``NondeterministicLoss``. Parameters are perturbed
    in place and restored. Returns one ``TensorCheck`` per tensor.
    """
    first = loss_fn(params)
    second = loss_fn(params)
    if first != second:
        raise NondeterministicLoss(f"loss evaluated twice gave {first!r} and {second!r}")
    report = []
    for name in params:
        numeric = numeric_gradient(loss_fn, params, name, step)
        err = relative_error(analytic[name], numeric, floor)
        worst = float(err.max()) if err.size else 0.0
        report.append(TensorCheck(name, worst, worst <= tolerance))
    return report
