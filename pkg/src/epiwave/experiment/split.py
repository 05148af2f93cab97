"""Chronological train / validation / test anchor split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..wmn import valid_anchors


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class Split:
    train: tuple
    validation: tuple
    test: tuple
    test_start: int

    def training_days(self, d1: int, d2: int) -> list[int]:
        """Every day touched (as input or target) by a training window."""
        days = set()
        for t in self.train:
            days.update(range(t - d1 + 1, t + d2 + 1))
        return sorted(days)


def _split(n_days, d1, d2, ratios, block):
    train_r, val_r, test_r = ratios
    test_start = int(round((train_r + val_r) * n_days))
    anchors = valid_anchors(n_days, d1, d2)
    test = [t for t in anchors if t + 1 >= test_start]
    before = [t for t in anchors if t + d2 < test_start]
    n_val = int(round(val_r * n_days))
    region_start = test_start - 2 * n_val
    val = []
    for t in before:
        if len(val) >= n_val:
            break
        if t + 1 >= region_start and ((t + 1 - region_start) // block) % 2 == 0:
            val.append(t)
    val_targets = set()
    for t in val:
        val_targets.update(range(t + 1, t + d2 + 1))
    chosen = set(val)
    train = [t for t in before if t not in chosen and not val_targets.intersection(range(t + 1, t + d2 + 1))]
    return Split(tuple(train), tuple(val), tuple(test), test_start)


def split_anchors(n_days: int, d1: int, d2: int, ratios=(0.7, 0.1, 0.2), block: int = 7) -> Split:
    """Split window anchors chronologically.

    Test anchors are those whose targets fall in the final ``ratios[2]``
    share of days. Validation anchors come from alternating ``block``-day
    groups inside the region of length two validation shares just before the
    test days, until a validation share of anchors is collected. Training
    windows whose target days overlap validation target days are dropped, so
    no target day is shared across splits.
    """
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"split ratios must be three nonnegative numbers summing to 1, got {ratios}")
    s = _split(n_days, d1, d2, ratios, block)
    if s.train and s.test and (s.validation or ratios[1] == 0):
        return s
    need = n_days + 1
    while need < 100 * (d1 + d2 + 10):
        t = _split(need, d1, d2, ratios, block)
        if t.train and t.test and (t.validation or ratios[1] == 0):
            break
        need += 1
    raise SplitError(f"series of {n_days} days is too short for D1={d1}, D2={d2} with ratios {ratios}; "
                     f"need at least {need} days")
