"""Daily web-search/mobility graphs, their normalizations, and window slicing.

Day indices are 0-based offsets from the series origin ``start_date``.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd


class DataValidationError(ValueError):
    pass


@dataclass(frozen=True)
class WmnSnapshot:
    day: int
    districts: tuple
    trips: np.ndarray  # (n, n) trips i -> j
    search: np.ndarray  # (n, n_w)
    cases: np.ndarray  # (n,)


class SnapshotSeries:
    """A gap-free daily sequence of snapshots sharing districts and symptoms.

    Stored as stacked arrays: ``trips`` (days, n, n), ``search``
    (days, n, n_w) and ``cases`` (days, n).
    """

    def __init__(self, trips, search, cases, districts, symptoms, start_date):
        self.trips = np.asarray(trips, dtype=np.float64)
        self.search = np.asarray(search, dtype=np.float64)
        self.cases = np.asarray(cases, dtype=np.float64)
        self.districts = tuple(str(d) for d in districts)
        self.symptoms = tuple(str(s) for s in symptoms)
        if isinstance(start_date, str):
            start_date = dt.date.fromisoformat(start_date)
        self.start_date = start_date
        self._validate()

    def _validate(self):
        days, n = self.cases.shape if self.cases.ndim == 2 else (None, None)
        if days is None:
            raise DataValidationError(f"cases must be (days, n), got {self.cases.shape}")
        if n != len(self.districts):
            raise DataValidationError(f"{n} case columns for {len(self.districts)} districts")
        if self.trips.shape != (days, n, n):
            raise DataValidationError(f"trips shape {self.trips.shape} != {(days, n, n)}")
        if self.search.shape != (days, n, len(self.symptoms)):
            raise DataValidationError(f"search shape {self.search.shape} != {(days, n, len(self.symptoms))}")
        for name in ("trips", "search", "cases"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or (arr < 0).any():
                raise DataValidationError(f"{name} must be finite and nonnegative")
        if not np.array_equal(self.cases, np.round(self.cases)):
            raise DataValidationError("cases must be integers")

    def __len__(self):
        return self.cases.shape[0]

    @property
    def n(self):
        return len(self.districts)

    def date(self, day: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(day))

    def snapshot(self, day: int) -> WmnSnapshot:
        return WmnSnapshot(day, self.districts, self.trips[day], self.search[day], self.cases[day])

    def with_cases(self, cases) -> "SnapshotSeries":
        return SnapshotSeries(self.trips, self.search, cases, self.districts, self.symptoms, self.start_date)


# --- normalizations ---------------------------------------------------------

def normalize_adjacency(trips, mode: str = "column"):
    """Add self-loops to a trip matrix (or a stack of them) and normalize.

    ``column`` scales every column of E + I to sum to one. ``symmetric``
    applies D^-1/2 (E + I) D^-1/2 with D the row sums of E + I.
    """
    trips = np.asarray(trips, dtype=np.float64)
    if trips.shape[-1] != trips.shape[-2]:
        raise DataValidationError(f"trip matrix must be square, got {trips.shape}")
    if (trips < 0).any():
        raise DataValidationError("trip matrix has negative entries")
    looped = trips + np.eye(trips.shape[-1])
    if mode == "column":
        return looped / looped.sum(axis=-2, keepdims=True)
    if mode == "symmetric":
        d = 1.0 / np.sqrt(looped.sum(axis=-1))
        return d[..., :, None] * looped * d[..., None, :]
    raise ValueError(f"unknown adjacency normalization {mode!r}")


@dataclass
class NormalizationStats:
    search_min: np.ndarray  # (n, n_w)
    search_max: np.ndarray
    cases_min: np.ndarray  # (n,)
    cases_max: np.ndarray
    fit_days: tuple = ()

    def to_dict(self) -> dict:
        return {
            "search_min": self.search_min.tolist(),
            "search_max": self.search_max.tolist(),
            "cases_min": self.cases_min.tolist(),
            "cases_max": self.cases_max.tolist(),
            "fit_days": list(self.fit_days),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(
            np.asarray(d["search_min"], dtype=np.float64),
            np.asarray(d["search_max"], dtype=np.float64),
            np.asarray(d["cases_min"], dtype=np.float64),
            np.asarray(d["cases_max"], dtype=np.float64),
            tuple(d.get("fit_days", ())),
        )


def fit_stats(series: SnapshotSeries, days) -> NormalizationStats:
    """Per-district (and per-word) min/max over the given days only."""
    days = np.unique(np.asarray(list(days), dtype=int))
    if days.size == 0:
        raise DataValidationError("cannot fit normalization stats on zero days")
    s = series.search[days]
    c = series.cases[days]
    return NormalizationStats(s.min(axis=0), s.max(axis=0), c.min(axis=0), c.max(axis=0), tuple(int(d) for d in days))


def _minmax(x, lo, hi):
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


def normalize_search(search, stats: NormalizationStats, clip: bool = True):
    """Map raw search counts to [0, 1] per district and word.

    Values outside the fitted range are clipped; a word whose fitted min
    equals its max maps to 0.
    """
    out = _minmax(np.asarray(search, dtype=np.float64), stats.search_min, stats.search_max)
    return np.clip(out, 0.0, 1.0) if clip else out


def normalize_cases(cases, stats: NormalizationStats, clip: bool = False):
    out = _minmax(np.asarray(cases, dtype=np.float64), stats.cases_min, stats.cases_max)
    return np.clip(out, 0.0, 1.0) if clip else out


def denormalize_cases(values, stats: NormalizationStats):
    """Exact inverse of ``normalize_cases`` (degenerate districts map back to their constant)."""
    span = stats.cases_max - stats.cases_min
    return np.asarray(values, dtype=np.float64) * span + stats.cases_min


def top_symptoms(series: SnapshotSeries, days, k: int) -> list[int]:
    """Indices of the k symptoms with the largest total count over ``days``.

    Ties go to the alphabetically first symptom name.
    """
    if not 1 <= k <= len(series.symptoms):
        raise ValueError(f"k={k} outside 1..{len(series.symptoms)}")
    days = np.asarray(sorted(set(int(d) for d in days)), dtype=int)
    totals = series.search[days].sum(axis=(0, 1))
    order = sorted(range(len(series.symptoms)), key=lambda j: (-totals[j], series.symptoms[j]))
    return sorted(order[:k])


# --- windows ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainingWindow:
    anchor: int
    d1: int
    d2: int

    @property
    def input_days(self) -> range:
        return range(self.anchor - self.d1 + 1, self.anchor + 1)

    @property
    def target_days(self) -> range:
        return range(self.anchor + 1, self.anchor + self.d2 + 1)

    def inputs(self, series: SnapshotSeries) -> list[WmnSnapshot]:
        return [series.snapshot(t) for t in self.input_days]

    def targets(self, series: SnapshotSeries) -> np.ndarray:
        return series.cases[self.anchor + 1:self.anchor + self.d2 + 1]


def valid_anchors(n_days: int, d1: int, d2: int, day_range=None) -> list[int]:
    """Anchors whose whole window [T-D1+1, T+D2] fits inside ``day_range``.

    ``day_range`` is an inclusive (first, last) pair of day indices and
    defaults to the whole series.
    """
    if d1 < 1 or d2 < 1:
        raise ValueError(f"D1 and D2 must be positive, got {d1}, {d2}")
    first, last = (0, n_days - 1) if day_range is None else day_range
    first = max(first, 0)
    last = min(last, n_days - 1)
    return list(range(first + d1 - 1, last - d2 + 1))


def build_windows(series, d1: int, d2: int, day_range=None) -> list[TrainingWindow]:
    n_days = series if isinstance(series, int) else len(series)
    anchors = valid_anchors(n_days, d1, d2, day_range)
    if not anchors:
        raise DataValidationError(
            f"no room for a window with D1={d1}, D2={d2} in days {day_range or (0, n_days - 1)}")
    return [TrainingWindow(t, d1, d2) for t in anchors]


# --- CSV families -----------------------------------------------------------

def _num(x) -> str:
    return format(float(x), ".17g")


def _datestr(d: dt.date) -> str:
    return d.isoformat()


def write_series(series: SnapshotSeries, out_dir) -> Path:
    """Write trips_/search_/cases_<date>.csv per day plus ``meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "start_date": series.start_date.isoformat(),
        "days": len(series),
        "districts": list(series.districts),
        "symptoms": list(series.symptoms),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=1))
    names = series.districts
    syms = series.symptoms
    for day in range(len(series)):
        tag = _datestr(series.date(day))
        rows = ["from,to,count"]
        ii, jj = np.nonzero(series.trips[day])
        rows += [f"{names[i]},{names[j]},{_num(series.trips[day, i, j])}" for i, j in zip(ii, jj)]
        (out / f"trips_{tag}.csv").write_text("\n".join(rows) + "\n")
        rows = ["district,symptom,count"]
        ii, ww = np.nonzero(series.search[day])
        rows += [f"{names[i]},{syms[w]},{_num(series.search[day, i, w])}" for i, w in zip(ii, ww)]
        (out / f"search_{tag}.csv").write_text("\n".join(rows) + "\n")
        rows = ["district,count"] + [f"{names[i]},{int(series.cases[day, i])}" for i in range(series.n)]
        (out / f"cases_{tag}.csv").write_text("\n".join(rows) + "\n")
    return out


def _dates_of(directory: Path, prefix: str) -> set:
    return {p.stem[len(prefix):] for p in directory.glob(f"{prefix}*.csv")}


def _lookup(names, index: dict, source: str, kind: str) -> np.ndarray:
    unknown = sorted(set(names) - set(index))
    if unknown:
        raise DataValidationError(f"{source}: unknown {kind} names {unknown[:5]}")
    return names.map(index).to_numpy(dtype=np.int64)


def read_series(in_dir) -> SnapshotSeries:
    """Load a directory written by ``write_series``.

    Every calendar day between the first and last date must have all three
    files; missing days raise ``DataValidationError`` naming them.
    """
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    districts = meta["districts"]
    symptoms = meta["symptoms"]
    families = {p: _dates_of(src, p) for p in ("trips_", "search_", "cases_")}
    all_dates = set().union(*families.values())
    if not all_dates:
        raise DataValidationError(f"no snapshot files in {src}")
    start = dt.date.fromisoformat(meta.get("start_date", min(all_dates)))
    end = max(dt.date.fromisoformat(d) for d in all_dates)
    days = (end - start).days + 1
    expected = [(start + dt.timedelta(days=i)).isoformat() for i in range(days)]
    missing = [f"{p}{d}" for p, have in families.items() for d in expected if d not in have]
    if missing:
        raise DataValidationError(f"missing snapshot files: {', '.join(missing[:10])}"
                                  + (" ..." if len(missing) > 10 else ""))
    d_index = {d: i for i, d in enumerate(districts)}
    s_index = {s: i for i, s in enumerate(symptoms)}
    n, nw = len(districts), len(symptoms)
    trips = np.zeros((days, n, n))
    search = np.zeros((days, n, nw))
    cases = np.zeros((days, n))
    for t, tag in enumerate(expected):
        df = pd.read_csv(src / f"trips_{tag}.csv", dtype={"from": str, "to": str})
        if len(df):
            rows = _lookup(df["from"], d_index, f"trips_{tag}.csv", "district")
            cols = _lookup(df["to"], d_index, f"trips_{tag}.csv", "district")
            trips[t, rows, cols] = df["count"].to_numpy()
        df = pd.read_csv(src / f"search_{tag}.csv", dtype={"district": str, "symptom": str})
        if len(df):
            rows = _lookup(df["district"], d_index, f"search_{tag}.csv", "district")
            cols = _lookup(df["symptom"], s_index, f"search_{tag}.csv", "symptom")
            search[t, rows, cols] = df["count"].to_numpy()
        df = pd.read_csv(src / f"cases_{tag}.csv", dtype={"district": str})
        absent = sorted(set(districts) - set(df["district"]))
        if absent:
            raise DataValidationError(f"cases_{tag}.csv lacks districts {absent}")
        cases[t, _lookup(df["district"], d_index, f"cases_{tag}.csv", "district")] = df["count"].to_numpy()
    return SnapshotSeries(trips, search, cases, districts, symptoms, start)
