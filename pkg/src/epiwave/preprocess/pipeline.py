"""Raw mobility/search/case records to a SnapshotSeries.

Steps: permanent-user filter, night-time home estimation, stay extraction
and trip counting, symptom query counting, calendar alignment.
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..wmn import DataValidationError, SnapshotSeries
from .homes import estimate_homes, filter_permanent_users, local_day
from .search import Lexicon, count_symptom_queries
from .trips import count_trips, stay_table

log = logging.getLogger(__name__)

EPOCH = dt.date(1970, 1, 1)
MOBILITY_HEADER = ["id", "lat", "lon", "unixtime", "date"]
SEARCH_HEADER = ["id", "time", "query"]
CASES_HEADER = ["date", "district", "count"]


@dataclass
class PreprocessConfig:
    min_stay: float = 10.0  # minutes
    bandwidth: float = 0.005  # degrees
    min_night_records: int = 20
    home_days: int = 26
    utc_offset_hours: float = 9.0
    symptoms: tuple = ()  # empty: the full list


@dataclass
class PreprocessResult:
    series: SnapshotSeries
    homes: dict
    permanent_users: set
    skipped_search_records: int
    notes: dict = field(default_factory=dict)


def parse_date(s) -> dt.date:
    s = str(s).strip()
    if len(s) == 8 and s.isdigit():
        return dt.date(int(s[:4]), int(s[4:6]), int(s[6:]))
    return dt.date.fromisoformat(s[:10])


def _read_csvs(path, header, dtypes) -> pd.DataFrame:
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise DataValidationError(f"no CSV files under {path}")
    frames = []
    for f in files:
        df = pd.read_csv(f, dtype=dtypes, keep_default_na=False)
        if list(df.columns) != header:
            raise DataValidationError(f"{f}: header {list(df.columns)} != {header}")
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def read_mobility(path) -> pd.DataFrame:
    df = _read_csvs(path, MOBILITY_HEADER, {"id": str, "date": str})
    if ((df["lat"] < -90) | (df["lat"] > 90) | (df["lon"] < -180) | (df["lon"] > 180)).any():
        raise DataValidationError("mobility records with out-of-range coordinates")
    return df


def read_search(path) -> pd.DataFrame:
    return _read_csvs(path, SEARCH_HEADER, {"id": str, "time": str, "query": str})


def read_cases(path) -> pd.DataFrame:
    return _read_csvs(path, CASES_HEADER, {"date": str, "district": str})


def assemble_series(trips, search, cases_df, districts, symptoms, dates) -> SnapshotSeries:
    """Stack per-day matrices and the case table into a series.

    ``dates`` is the ordered list of study days. Any study day missing from
    the case table, or district missing on a day, raises with the offenders.
    """
    d_index = {d: i for i, d in enumerate(districts)}
    day_pos = {d: i for i, d in enumerate(dates)}
    cases = np.zeros((len(dates), len(districts)))
    seen = np.zeros(cases.shape, dtype=bool)
    for date, district, count in cases_df[["date", "district", "count"]].itertuples(index=False):
        day = parse_date(date)
        if day not in day_pos:
            continue
        if district not in d_index:
            raise DataValidationError(f"unknown district {district!r} in case table")
        cases[day_pos[day], d_index[district]] = count
        seen[day_pos[day], d_index[district]] = True
    if not seen.all():
        bad = sorted({(dates[t].isoformat(), districts[i]) for t, i in zip(*np.nonzero(~seen))})
        raise DataValidationError(f"case table missing (date, district) entries: {bad[:10]}")
    if len(trips) != len(dates) or len(search) != len(dates):
        raise DataValidationError("trip/search matrices do not cover the study days")
    return SnapshotSeries(trips, search, cases, districts, symptoms, dates[0])


def study_dates(cases_df) -> list[dt.date]:
    days = sorted({parse_date(d) for d in cases_df["date"]})
    first, last = days[0], days[-1]
    full = [first + dt.timedelta(days=i) for i in range((last - first).days + 1)]
    missing = sorted(set(full) - set(days))
    if missing:
        raise DataValidationError(f"case table has no rows for {[d.isoformat() for d in missing]}")
    return full


def run_preprocess(mobility: pd.DataFrame, search: pd.DataFrame, cases_df: pd.DataFrame, district_map,
                   config: PreprocessConfig | None = None) -> PreprocessResult:
    cfg = config or PreprocessConfig()
    dates = study_dates(cases_df)
    n = len(district_map.districts)
    off = cfg.utc_offset_hours

    unixtime = mobility["unixtime"].to_numpy(dtype=np.int64)
    ping_day = local_day(unixtime, off)
    first_day = (dates[0] - EPOCH).days
    day_numbers = np.arange(first_day, first_day + len(dates))
    present = np.isin(day_numbers, np.unique(ping_day))
    if not present.all():
        missing = [dates[i].isoformat() for i in np.flatnonzero(~present)]
        raise DataValidationError(f"no mobility records on {missing}")
    declared = mobility["date"].map(lambda s: (parse_date(s) - EPOCH).days)
    mismatch = int((declared.to_numpy() != ping_day).sum())
    if mismatch:
        log.warning("%d pings whose date column disagrees with local unixtime day", mismatch)

    search_days = {parse_date(t) for t in search["time"].str.slice(0, 10).unique()}
    missing = [d.isoformat() for d in dates if d not in search_days]
    if missing:
        raise DataValidationError(f"no search records on {missing}")

    codes, uniques = pd.factorize(mobility["id"], sort=True)
    lat = mobility["lat"].to_numpy(dtype=np.float64)
    lon = mobility["lon"].to_numpy(dtype=np.float64)

    window = (ping_day >= first_day) & (ping_day < first_day + cfg.home_days)
    permanent = filter_permanent_users(codes[window], unixtime[window], cfg.min_night_records, off)
    homes_by_code = estimate_homes(codes[window], lat[window], lon[window], unixtime[window], district_map,
                                   users=permanent, bandwidth=cfg.bandwidth, utc_offset_hours=off)

    keep = np.isin(codes, np.fromiter(homes_by_code.keys(), dtype=np.int64, count=len(homes_by_code)))
    districts_of = district_map.assign(lat[keep], lon[keep])
    stays = stay_table(codes[keep], unixtime[keep], districts_of, cfg.min_stay, off)
    trips = count_trips(stays, n, day_numbers)

    homes = {uniques[c]: h for c, h in homes_by_code.items()}
    lexicon = Lexicon.default(cfg.symptoms or None)
    counts = count_symptom_queries(search["id"].to_numpy(), search["time"].to_numpy(), search["query"].to_numpy(),
                                   lexicon, homes, n, [d.isoformat() for d in dates])
    if counts.skipped_no_home:
        log.info("%d search records skipped: user has no home district", counts.skipped_no_home)

    series = assemble_series(trips, counts.matrices, cases_df, district_map.districts, lexicon.names, dates)
    return PreprocessResult(series, homes, {uniques[c] for c in permanent}, counts.skipped_no_home,
                            {"ping_date_mismatch": mismatch})


def preprocess_dirs(mobility_dir, search_dir, cases_file, district_map, config=None) -> PreprocessResult:
    return run_preprocess(read_mobility(mobility_dir), read_search(search_dir), read_cases(cases_file),
                          district_map, config)
