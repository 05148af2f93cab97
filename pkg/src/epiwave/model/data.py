"""Normalized model inputs and batch assembly."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..wmn import (NormalizationStats, SnapshotSeries, normalize_adjacency, normalize_cases,
                   normalize_search)


@dataclass
class Batch:
    anchors: np.ndarray  # (B,)
    adjacency: np.ndarray  # (B, D1, n, n)
    search: np.ndarray  # (B, D1, n, k)
    cases: np.ndarray  # (B, D1, n) normalized input cases
    elapsed: np.ndarray  # (B, D1) days since the series origin
    target: np.ndarray  # (B, D2, n) normalized target cases

    def __len__(self):
        return len(self.anchors)


@dataclass
class PreparedData:
    """Whole-series arrays on the model's scale.

    Inputs are clipped to the fitted range; targets are not, so the loss
    sees true excursions beyond the training range.
    """

    adjacency: np.ndarray  # (days, n, n)
    search: np.ndarray  # (days, n, k)
    cases_in: np.ndarray  # (days, n)
    cases_target: np.ndarray  # (days, n)
    raw_cases: np.ndarray  # (days, n)
    stats: NormalizationStats
    symptom_idx: list

    @property
    def n(self):
        return self.cases_in.shape[1]

    @property
    def n_features(self):
        return self.search.shape[2]

    def batch(self, anchors, d1: int, d2: int) -> Batch:
        anchors = np.asarray(anchors, dtype=np.int64)
        inp = anchors[:, None] + np.arange(-d1 + 1, 1)[None, :]
        tgt = anchors[:, None] + np.arange(1, d2 + 1)[None, :]
        if inp.size and (inp.min() < 0 or tgt.max() >= len(self.cases_in)):
            raise IndexError(f"window out of range for anchors {anchors.min()}..{anchors.max()}")
        return Batch(anchors, self.adjacency[inp], self.search[inp], self.cases_in[inp],
                     inp.astype(np.float64), self.cases_target[tgt])


def prepare(series: SnapshotSeries, stats: NormalizationStats, symptom_idx, adjacency_norm="column") -> PreparedData:
    symptom_idx = list(symptom_idx)
    search = normalize_search(series.search, stats)[:, :, symptom_idx]
    return PreparedData(
        adjacency=normalize_adjacency(series.trips, adjacency_norm),
        search=np.ascontiguousarray(search),
        cases_in=normalize_cases(series.cases, stats, clip=True),
        cases_target=normalize_cases(series.cases, stats, clip=False),
        raw_cases=series.cases,
        stats=stats,
        symptom_idx=symptom_idx,
    )
