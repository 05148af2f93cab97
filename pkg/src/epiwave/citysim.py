"""Synthetic city: multiwave metapopulation SEIR plus raw mobility and search logs.

The simulator plants every quantity the preprocessing pipeline is meant to
recover (homes, daily trip matrices, symptom search matrices), so running
the pipeline over its raw output must give those matrices back exactly.

Daily pattern of a permanent user: at home from midnight, optionally out to
one to three districts (each stay at least 30 minutes, sometimes with a
sub-threshold pass-through ping in between), back home before 22:00, and at
home until midnight. Pings are emitted at stay boundaries and at a few fixed
clock times, always including 00:00:00 and 23:59:59.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .preprocess.districts import GridDistrictMap, save_district_map
from .preprocess.search import Lexicon
from .wmn import SnapshotSeries, write_series

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

HOUR = 3600
DAY = 86400
JITTER = 0.0002  # degrees, ping noise around a stay location
MARGIN = 0.004  # degrees, stay locations keep this far from cell edges

QUERY_PREFIXES = ("", "bad ", "sudden ", "mild ", "what causes ", "how to treat ")
QUERY_SUFFIXES = ("", " at night", " remedy", " tonight", " for days", " medicine")
NOISE_QUERIES = ("weather tomorrow", "train timetable", "ramen near me", "baseball scores",
                 "stock prices", "movie times", "news today", "cheap flights")


@dataclass
class CityConfig:
    n_districts: int = 23
    grid_rows: int = 5
    grid_cols: int = 5
    lat_min: float = 35.55
    lat_max: float = 35.80
    lon_min: float = 139.60
    lon_max: float = 139.95
    n_users: int = 2000
    transient_fraction: float = 0.1
    n_days: int = 300
    start_date: str = "2020-04-01"
    utc_offset_hours: float = 9.0
    # mobility
    out_prob: float = 0.7
    max_destinations: int = 3
    gravity_scale: float = 0.08
    short_visit_prob: float = 0.15
    mobility_response: float = 0.3
    # epidemic
    population_min: int = 60000
    population_max: int = 140000
    beta_base: float = 0.03
    wave_centers: tuple = (45.0, 115.0, 185.0, 255.0)
    wave_heights: tuple = (0.38, 0.38, 0.38, 0.38)
    wave_width: float = 10.0
    beta: tuple = ()  # explicit per-day schedule; overrides the waves when given
    sigma: float = 1.0 / 3.0
    gamma: float = 1.0 / 5.0
    initial_exposed: int = 5
    import_rate: float = 0.5
    mixing: float = 1.0
    # web search
    delta_min: float = 0.003
    delta_max: float = 0.008
    delta: tuple = ()  # explicit per-district decay rates
    search_scale: float = 150.0
    search_zipf: float = 1.0
    search_baseline: float = 0.01
    noise_query_rate: float = 0.3
    transient_search_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("wave_centers", "wave_heights", "beta", "delta"):
            setattr(self, name, tuple(float(x) for x in getattr(self, name)))
        if self.n_districts > self.grid_rows * self.grid_cols:
            raise ValueError("more districts than grid cells")
        if self.beta and len(self.beta) != self.n_days:
            raise ValueError(f"beta schedule has {len(self.beta)} entries for {self.n_days} days")
        if self.delta and len(self.delta) != self.n_districts:
            raise ValueError("delta needs one rate per district")
        rates = [self.out_prob, self.gravity_scale, self.short_visit_prob, self.beta_base, self.sigma,
                 self.gamma, self.import_rate, self.mixing, self.delta_min, self.delta_max,
                 self.search_scale, self.search_baseline, self.noise_query_rate, *self.beta,
                 *self.delta, *self.wave_heights]
        if any(r < 0 for r in rates):
            raise ValueError("rates must be nonnegative")
        if not 0 <= self.transient_fraction < 1:
            raise ValueError("transient_fraction must be in [0, 1)")

    @classmethod
    def from_toml(cls, path) -> "CityConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown city config keys: {unknown}")
        return cls(**raw)


def beta_schedule(cfg: CityConfig) -> np.ndarray:
    if cfg.beta:
        return np.asarray(cfg.beta, dtype=np.float64)
    t = np.arange(cfg.n_days, dtype=np.float64)
    b = np.full(cfg.n_days, cfg.beta_base)
    for c, h in zip(cfg.wave_centers, cfg.wave_heights):
        b += h * np.exp(-0.5 * ((t - c) / cfg.wave_width) ** 2)
    return b


def make_district_map(cfg: CityConfig) -> GridDistrictMap:
    names = [f"D{k:02d}" for k in range(cfg.n_districts)]
    return GridDistrictMap(cfg.lat_min, cfg.lat_max, cfg.lon_min, cfg.lon_max,
                           cfg.grid_rows, cfg.grid_cols, names)


@dataclass
class RawRecordSet:
    """Raw logs in the preprocessing input schemas, held column-wise."""
    ping_user: np.ndarray
    ping_lat: np.ndarray
    ping_lon: np.ndarray
    ping_time: np.ndarray
    ping_day: np.ndarray  # day index from start
    search_user: list
    search_time: list  # local "YYYY-MM-DD HH:MM:SS"
    search_query: list
    search_day: np.ndarray
    cases: np.ndarray  # (days, n)
    district_map: GridDistrictMap
    start_date: dt.date
    utc_offset_hours: float


@dataclass
class GroundTruth:
    trips: np.ndarray  # (days, n, n), permanent users only
    search: np.ndarray  # (days, n, n_w), as matched by the default lexicon
    cases: np.ndarray  # (days, n)
    compartments: np.ndarray  # (days, 4, n) S, E, I, R at end of day
    search_mean: np.ndarray  # (days, n, n_w) expected symptom queries per symptom
    homes: dict  # user id -> district index (permanent users)
    transient_users: set
    beta: np.ndarray
    delta: np.ndarray
    population: np.ndarray
    n_pings: int = 0
    n_search_records: int = 0
    symptoms: tuple = field(default_factory=tuple)
    districts: tuple = field(default_factory=tuple)
    start_date: dt.date = dt.date(2020, 4, 1)

    def series(self) -> SnapshotSeries:
        return SnapshotSeries(self.trips, self.search, self.cases, self.districts, self.symptoms, self.start_date)


def _stay_point(rng, dmap: GridDistrictMap, district: int):
    cells = np.flatnonzero(dmap.cells == district)
    cell = cells[rng.integers(cells.size)]
    lat_lo, lat_hi, lon_lo, lon_hi = dmap.cell_bounds(cell)
    return (rng.uniform(lat_lo + MARGIN, lat_hi - MARGIN), rng.uniform(lon_lo + MARGIN, lon_hi - MARGIN))


class _PingBuffer:
    def __init__(self):
        self.user, self.lat, self.lon, self.time, self.day = [], [], [], [], []

    def add(self, rng, user, day, day_start, point, offsets):
        k = len(offsets)
        self.user.extend([user] * k)
        self.day.extend([day] * k)
        self.time.extend(day_start + o for o in offsets)
        self.lat.extend(point[0] + JITTER * rng.standard_normal(k))
        self.lon.extend(point[1] + JITTER * rng.standard_normal(k))


def _query_templates(lexicon: Lexicon):
    """Every query string the simulator can issue per symptom, with the symptoms it matches."""
    table = []
    for sym in lexicon.symptoms:
        options = []
        for tok in sym.tokens:
            for pre in QUERY_PREFIXES:
                for suf in QUERY_SUFFIXES:
                    q = f"{pre}{tok}{suf}"
                    options.append((q, tuple(lexicon.match(q))))
        table.append(options)
    for q in NOISE_QUERIES:
        if lexicon.match(q):
            raise AssertionError(f"noise query {q!r} matches a symptom")
    return table


def _clock(seconds: int) -> str:
    h, rem = divmod(int(seconds), HOUR)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


def simulate(cfg: CityConfig) -> tuple[RawRecordSet, GroundTruth]:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_districts
    dmap = make_district_map(cfg)
    lexicon = Lexicon.default()
    n_w = len(lexicon)
    start = dt.date.fromisoformat(cfg.start_date)
    offset = int(cfg.utc_offset_hours * HOUR)
    epoch_start = int(dt.datetime(start.year, start.month, start.day, tzinfo=dt.timezone.utc).timestamp()) - offset

    # districts
    population = rng.integers(cfg.population_min, cfg.population_max + 1, size=n)
    centroids = np.array([
        np.mean([[(dmap.cell_bounds(c)[0] + dmap.cell_bounds(c)[1]) / 2,
                  (dmap.cell_bounds(c)[2] + dmap.cell_bounds(c)[3]) / 2]
                 for c in np.flatnonzero(dmap.cells == k)], axis=0) for k in range(n)])
    attract = rng.lognormal(0.0, 0.5, size=n)
    dist = np.sqrt(((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2))
    gravity = attract[None, :] * np.exp(-dist / cfg.gravity_scale)
    np.fill_diagonal(gravity, 0.0)
    dest_cdf = np.cumsum(gravity / gravity.sum(axis=1, keepdims=True), axis=1)
    delta = np.asarray(cfg.delta) if cfg.delta else rng.uniform(cfg.delta_min, cfg.delta_max, size=n)

    # users: shuffled ids so transient visitors are not identifiable by name
    n_transient = int(round(cfg.transient_fraction * cfg.n_users))
    n_perm = cfg.n_users - n_transient
    ids = [f"u{k:05d}" for k in rng.permutation(cfg.n_users)]
    perm_ids, trans_ids = ids[:n_perm], ids[n_perm:]
    weights = population / population.sum()
    home_d = np.concatenate([np.arange(min(n, n_perm)), rng.choice(n, size=max(n_perm - n, 0), p=weights)])
    home_pt = [_stay_point(rng, dmap, d) for d in home_d]
    users_per_district = np.bincount(home_d, minlength=n)
    residents = [np.flatnonzero(home_d == k) for k in range(n)]
    trans_days = [np.sort(rng.choice(cfg.n_days, size=min(2, cfg.n_days), replace=False)) for _ in trans_ids]
    trans_on_day = {}
    for u, days in enumerate(trans_days):
        for d in days:
            trans_on_day.setdefault(int(d), []).append(u)

    beta = beta_schedule(cfg)
    wave = (beta - beta.min()) / max(beta.max() - beta.min(), 1e-12)
    templates = _query_templates(lexicon)
    rank = np.arange(1, n_w + 1, dtype=np.float64)
    word_scale = rng.permutation(rank ** -cfg.search_zipf)

    S = population.astype(np.int64).copy()
    E = np.zeros(n, dtype=np.int64)
    I = np.zeros(n, dtype=np.int64)
    R = np.zeros(n, dtype=np.int64)
    seed_e = np.minimum(S, cfg.initial_exposed)
    S -= seed_e
    E += seed_e

    trips = np.zeros((cfg.n_days, n, n))
    search = np.zeros((cfg.n_days, n, n_w))
    search_mean = np.zeros((cfg.n_days, n, n_w))
    cases = np.zeros((cfg.n_days, n))
    comps = np.zeros((cfg.n_days, 4, n))
    pings = _PingBuffer()
    s_user, s_time, s_query, s_day = [], [], [], []

    for day in range(cfg.n_days):
        day_start = epoch_start + day * DAY
        p_out = cfg.out_prob * (1.0 - cfg.mobility_response * wave[day])

        # --- mobility of permanent users
        goes_out = rng.random(n_perm) < p_out
        for u in range(n_perm):
            h = home_d[u]
            hp = home_pt[u]
            if not goes_out[u]:
                pings.add(rng, u, day, day_start, hp, (0, 6 * HOUR, 12 * HOUR, 18 * HOUR, DAY - 1))
                continue
            dep = int(rng.integers(7 * 60, 10 * 60)) * 60
            pings.add(rng, u, day, day_start, hp, (0, 6 * HOUR, dep) if dep > 6 * HOUR else (0, dep))
            n_dest = int(rng.integers(1, cfg.max_destinations + 1))
            now, prev, last = dep, h, dep
            visited = [h]
            for k in range(n_dest):
                travel = int(rng.integers(15, 46)) * 60
                if rng.random() < cfg.short_visit_prob:
                    via = int(rng.integers(n))
                    if via != prev:
                        t0 = now + travel // 3
                        pings.add(rng, u, day, day_start, _stay_point(rng, dmap, via), (t0, t0 + 180))
                        last = t0 + 180
                nxt = int(np.searchsorted(dest_cdf[prev], rng.random(), side="right"))
                nxt = min(nxt, n - 1)
                if k == n_dest - 1 and nxt == h:
                    break
                arrive = now + travel
                stay = int(rng.integers(30, 241)) * 60
                leave = arrive + stay
                if leave > 21 * HOUR:
                    break
                pings.add(rng, u, day, day_start, _stay_point(rng, dmap, nxt), (arrive, leave))
                visited.append(nxt)
                now, prev, last = leave, nxt, leave
            back = max(now + int(rng.integers(15, 46)) * 60, last + 60)
            tail = [back] + [c for c in (18 * HOUR, 21 * HOUR) if c > back] + [DAY - 1]
            pings.add(rng, u, day, day_start, hp, tail)
            visited.append(h)
            for a, b in zip(visited, visited[1:]):
                if a != b:
                    trips[day, a, b] += 1

        # --- transient visitors: daytime only
        for u in trans_on_day.get(day, ()):
            uid = n_perm + u
            t = int(rng.integers(10 * 60, 12 * 60)) * 60
            for _ in range(int(rng.integers(1, 3))):
                stay = int(rng.integers(30, 120)) * 60
                pings.add(rng, uid, day, day_start, _stay_point(rng, dmap, int(rng.integers(n))), (t, t + stay))
                t += stay + 1800

        # --- epidemic step, mixing through today's trips
        frac = trips[day] / np.maximum(users_per_district, 1)[:, None] * cfg.mixing
        mix = frac + np.diag(np.maximum(1.0 - frac.sum(axis=1), 0.0))
        mix /= mix.sum(axis=1, keepdims=True)
        present_n = mix.T @ population
        present_i = mix.T @ I
        force = beta[day] * (mix @ (present_i / present_n))
        new_e = rng.binomial(S, 1.0 - np.exp(-force))
        new_e = np.minimum(new_e + rng.poisson(cfg.import_rate, size=n), S)
        new_i = rng.binomial(E, 1.0 - math.exp(-cfg.sigma))
        new_r = rng.binomial(I, 1.0 - math.exp(-cfg.gamma))
        S -= new_e
        E += new_e - new_i
        I += new_i - new_r
        R += new_r
        assert (S >= 0).all() and (E >= 0).all() and (I >= 0).all()
        assert np.array_equal(S + E + I + R, population)
        cases[day] = new_i
        comps[day] = np.stack([S, E, I, R])

        # --- web search
        decay = np.exp(-delta * day)
        prevalence = (E + I) / population
        mean = users_per_district[:, None] * (cfg.search_scale * word_scale[None, :] * (prevalence * decay)[:, None]
                                              + cfg.search_baseline * word_scale[None, :])
        search_mean[day] = mean
        draws = rng.poisson(mean)
        for i, w in zip(*np.nonzero(draws)):
            options = templates[w]
            for _ in range(draws[i, w]):
                q, matched = options[rng.integers(len(options))]
                u = residents[i][rng.integers(residents[i].size)]
                s_user.append(u)
                s_query.append(q)
                s_time.append(int(rng.integers(7 * HOUR, DAY)))
                s_day.append(day)
                search[day, i, list(matched)] += 1
        for u in np.flatnonzero(rng.random(n_perm) < cfg.noise_query_rate):
            s_user.append(int(u))
            s_query.append(NOISE_QUERIES[rng.integers(len(NOISE_QUERIES))])
            s_time.append(int(rng.integers(7 * HOUR, DAY)))
            s_day.append(day)
        for u in trans_on_day.get(day, ()):
            for _ in range(rng.poisson(cfg.transient_search_rate)):
                w = int(rng.integers(n_w))
                s_user.append(n_perm + u)
                s_query.append(templates[w][rng.integers(len(templates[w]))][0])
                s_time.append(int(rng.integers(10 * HOUR, 17 * HOUR)))
                s_day.append(day)

    all_ids = np.array(perm_ids + trans_ids)
    s_day_arr = np.asarray(s_day, dtype=np.int64)
    order = np.lexsort((np.asarray(s_time), np.asarray(s_user), s_day_arr)) if s_day else np.array([], dtype=int)
    dates = [(start + dt.timedelta(days=d)).isoformat() for d in range(cfg.n_days)]
    raw = RawRecordSet(
        ping_user=all_ids[np.asarray(pings.user, dtype=np.int64)],
        ping_lat=np.round(np.asarray(pings.lat), 6),
        ping_lon=np.round(np.asarray(pings.lon), 6),
        ping_time=np.asarray(pings.time, dtype=np.int64),
        ping_day=np.asarray(pings.day, dtype=np.int64),
        search_user=[all_ids[s_user[k]] for k in order],
        search_time=[f"{dates[s_day[k]]} {_clock(s_time[k])}" for k in order],
        search_query=[s_query[k] for k in order],
        search_day=s_day_arr[order],
        cases=cases,
        district_map=dmap,
        start_date=start,
        utc_offset_hours=cfg.utc_offset_hours,
    )
    truth = GroundTruth(
        trips=trips, search=search, cases=cases, compartments=comps, search_mean=search_mean,
        homes={perm_ids[u]: int(home_d[u]) for u in range(n_perm)},
        transient_users=set(trans_ids), beta=beta, delta=delta, population=population,
        n_pings=int(raw.ping_time.size), n_search_records=len(raw.search_query),
        symptoms=tuple(lexicon.names), districts=tuple(dmap.districts), start_date=start,
    )
    return raw, truth


def emit_raw(raw: RawRecordSet, out_dir) -> dict:
    """Write raw logs in the preprocessing input schemas.

    Layout: ``mobility/<YYYYMMDD>.csv`` (id,lat,lon,unixtime,date),
    ``search/<YYYYMMDD>.csv`` (id,time,query), ``cases.csv``
    (date,district,count) and ``districts.json``. Returns row counts.
    """
    out = Path(out_dir)
    (out / "mobility").mkdir(parents=True, exist_ok=True)
    (out / "search").mkdir(parents=True, exist_ok=True)
    n_days = raw.cases.shape[0]
    names = raw.district_map.districts
    ping_bounds = np.searchsorted(raw.ping_day, np.arange(n_days + 1)) if _sorted(raw.ping_day) else None
    order = None
    if ping_bounds is None:
        order = np.argsort(raw.ping_day, kind="stable")
        ping_bounds = np.searchsorted(raw.ping_day[order], np.arange(n_days + 1))
    search_bounds = np.searchsorted(raw.search_day, np.arange(n_days + 1))
    n_pings = n_search = 0
    for day in range(n_days):
        date = raw.start_date + dt.timedelta(days=day)
        tag = date.strftime("%Y%m%d")
        sl = slice(ping_bounds[day], ping_bounds[day + 1])
        idx = np.arange(sl.start, sl.stop) if order is None else order[sl]
        lines = ["id,lat,lon,unixtime,date"]
        lines += [f"{u},{la:.6f},{lo:.6f},{t},{tag}" for u, la, lo, t in
                  zip(raw.ping_user[idx], raw.ping_lat[idx], raw.ping_lon[idx], raw.ping_time[idx])]
        (out / "mobility" / f"{tag}.csv").write_text("\n".join(lines) + "\n")
        n_pings += len(lines) - 1
        a, b = search_bounds[day], search_bounds[day + 1]
        lines = ["id,time,query"]
        lines += [f"{raw.search_user[k]},{raw.search_time[k]},{raw.search_query[k]}" for k in range(a, b)]
        (out / "search" / f"{tag}.csv").write_text("\n".join(lines) + "\n")
        n_search += len(lines) - 1
    rows = ["date,district,count"]
    for day in range(n_days):
        iso = (raw.start_date + dt.timedelta(days=day)).isoformat()
        rows += [f"{iso},{names[i]},{int(raw.cases[day, i])}" for i in range(len(names))]
    (out / "cases.csv").write_text("\n".join(rows) + "\n")
    save_district_map(raw.district_map, out / "districts.json")
    return {"pings": n_pings, "search_records": n_search, "case_rows": len(rows) - 1}


def _sorted(a) -> bool:
    return a.size < 2 or bool((a[1:] >= a[:-1]).all())


def write_truth(truth: GroundTruth, out_dir) -> None:
    """Ground-truth series in the snapshot CSV layout plus latent state."""
    out = Path(out_dir)
    write_series(truth.series(), out)
    extra = {
        "homes": truth.homes,
        "delta": truth.delta.tolist(),
        "beta": truth.beta.tolist(),
        "population": truth.population.tolist(),
        "n_pings": truth.n_pings,
        "n_search_records": truth.n_search_records,
    }
    (out / "truth.json").write_text(json.dumps(extra))


def wave_peaks(daily_cases, window: int = 7, min_separation: int = 60, min_rel_height: float = 0.2) -> list[int]:
    """Days of wave peaks in a (smoothed) case curve.

    A peak is a local maximum of the centred moving average that rises at
    least ``min_rel_height`` of the global maximum above the lowest point
    since the previous accepted peak; peaks closer than ``min_separation``
    keep the higher one.
    """
    y = np.asarray(daily_cases, dtype=np.float64)
    if y.ndim > 1:
        y = y.sum(axis=1)
    kernel = np.ones(window) / window
    s = np.convolve(y, kernel, mode="same")
    thresh = min_rel_height * s.max()
    peaks: list[int] = []
    low = s[0]
    for t in range(1, len(s) - 1):
        low = min(low, s[t])
        if s[t] >= s[t - 1] and s[t] > s[t + 1] and s[t] - low >= thresh:
            if peaks and t - peaks[-1] < min_separation:
                if s[t] > s[peaks[-1]]:
                    peaks[-1] = t
                continue
            peaks.append(t)
            low = s[t]
    return peaks
