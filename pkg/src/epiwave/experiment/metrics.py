"""Forecast error metrics on raw counts."""
from __future__ import annotations

import numpy as np


def _check(pred, actual):
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError(f"forecast shape {pred.shape} does not match actual shape {actual.shape}")
    if pred.size == 0:
        raise ValueError("no forecasts to score")
    return pred, actual


def mae(pred, actual) -> float:
    pred, actual = _check(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def rmse(pred, actual) -> float:
    pred, actual = _check(pred, actual)
    diff = np.abs(pred - actual)
    top = diff.max()
    if top == 0.0 or not np.isfinite(top):
        return float(top)
    # scaled so tiny residuals do not underflow when squared
    return float(top * np.sqrt(np.mean((diff / top) ** 2)))


def relative_error(pred, actual) -> np.ndarray:
    """Per-district |sum actual - sum pred| / |sum actual|, pooled over windows and days.

    Arrays are (..., n); districts whose actual total is zero get NaN.
    """
    pred, actual = _check(pred, actual)
    n = pred.shape[-1]
    p = pred.reshape(-1, n).sum(axis=0)
    a = actual.reshape(-1, n).sum(axis=0)
    out = np.full(n, np.nan)
    ok = a != 0
    out[ok] = np.abs(a[ok] - p[ok]) / np.abs(a[ok])
    return out
