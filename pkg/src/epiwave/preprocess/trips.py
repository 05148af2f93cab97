"""Stay extraction and daily inter-district trip counting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DAY = 86400


@dataclass(frozen=True)
class Stay:
    district: int
    enter: int
    leave: int
    day: int  # local day number (days since epoch)

    @property
    def minutes(self) -> float:
        return (self.leave - self.enter) / 60.0


def stay_table(user, unixtime, district, min_stay=10.0, utc_offset_hours=9):
    """Vectorized stay extraction for many users at once.

    Consecutive pings of one user in the same district form a run spanning
    first to last ping. Runs are cut at local midnight so each piece is
    attributed to its own day; pieces shorter than ``min_stay`` minutes are
    dropped. Pings outside every district (district < 0) break runs and
    never form stays.

    Returns a dict of equal-length arrays ``user, day, district, enter,
    leave`` ordered by user then time.
    """
    user = np.asarray(user)
    t = np.asarray(unixtime, dtype=np.int64)
    d = np.asarray(district, dtype=np.int64)
    order = np.lexsort((t, user))
    user, t, d = user[order], t[order], d[order]
    m = t.size
    if m == 0:
        empty = np.array([], dtype=np.int64)
        return {"user": user, "day": empty, "district": empty, "enter": empty, "leave": empty}
    new_run = np.ones(m, dtype=bool)
    new_run[1:] = (user[1:] != user[:-1]) | (d[1:] != d[:-1])
    starts = np.flatnonzero(new_run)
    ends = np.r_[starts[1:], m] - 1
    r_user, r_dist = user[starts], d[starts]
    r_enter, r_leave = t[starts], t[ends]
    keep = r_dist >= 0
    r_user, r_dist, r_enter, r_leave = r_user[keep], r_dist[keep], r_enter[keep], r_leave[keep]

    offset = int(utc_offset_hours * 3600)
    day_a = (r_enter + offset) // DAY
    day_b = (r_leave + offset) // DAY
    pieces = day_b - day_a + 1
    idx = np.repeat(np.arange(r_enter.size), pieces)
    within = np.arange(idx.size) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    p_day = day_a[idx] + within
    day_start = p_day * DAY - offset
    p_enter = np.maximum(r_enter[idx], day_start)
    p_leave = np.minimum(r_leave[idx], day_start + DAY)
    ok = (p_leave - p_enter) >= min_stay * 60.0
    return {
        "user": r_user[idx][ok],
        "day": p_day[ok],
        "district": r_dist[idx][ok],
        "enter": p_enter[ok],
        "leave": p_leave[ok],
    }


def extract_stays(unixtime, district, min_stay=10.0, utc_offset_hours=9) -> list[Stay]:
    """Stays of one user from time-sorted pings with district labels."""
    tab = stay_table(np.zeros(len(unixtime), dtype=np.int64), unixtime, district, min_stay, utc_offset_hours)
    return [Stay(int(a), int(b), int(c), int(e))
            for a, b, c, e in zip(tab["district"], tab["enter"], tab["leave"], tab["day"])]


def trip_pairs(stays: dict):
    """(day, from, to) for each consecutive distinct-district stay pair of a user-day."""
    u, day, dist = stays["user"], stays["day"], stays["district"]
    same = (u[1:] == u[:-1]) & (day[1:] == day[:-1]) & (dist[1:] != dist[:-1])
    k = np.flatnonzero(same)
    return day[k], dist[k], dist[k + 1]


def count_trips(stays: dict, n_districts: int, days) -> np.ndarray:
    """Trip matrices for the given local day numbers, shape (len(days), n, n)."""
    days = np.asarray(days, dtype=np.int64)
    out = np.zeros((days.size, n_districts, n_districts))
    p_day, p_from, p_to = trip_pairs(stays)
    pos = np.searchsorted(days, p_day)
    valid = (pos < days.size) & (days[np.minimum(pos, days.size - 1)] == p_day)
    np.add.at(out, (pos[valid], p_from[valid], p_to[valid]), 1.0)
    return out


def count_trips_for_day(stay_lists, n_districts: int) -> np.ndarray:
    """E_t from per-user stay lists of a single day (consecutive pairs only)."""
    e = np.zeros((n_districts, n_districts))
    for stays in stay_lists:
        for a, b in zip(stays, stays[1:]):
            if a.district != b.district:
                e[a.district, b.district] += 1
    return e
