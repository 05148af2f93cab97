"""Permanent-user filtering and mean-shift home estimation."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import kernels

log = logging.getLogger(__name__)

NIGHT_START_HOUR = 18
NIGHT_END_HOUR = 9


def local_hour(unixtime, utc_offset_hours=9):
    return ((np.asarray(unixtime, dtype=np.int64) + int(utc_offset_hours * 3600)) // 3600) % 24


def local_day(unixtime, utc_offset_hours=9):
    """Days since 1970-01-01 in local time."""
    return (np.asarray(unixtime, dtype=np.int64) + int(utc_offset_hours * 3600)) // 86400


def is_night(unixtime, utc_offset_hours=9):
    """18:00 to 09:00 local time."""
    h = local_hour(unixtime, utc_offset_hours)
    return (h >= NIGHT_START_HOUR) | (h < NIGHT_END_HOUR)


def filter_permanent_users(user_ids, unixtime, min_night_records=20, utc_offset_hours=9):
    """Users with at least ``min_night_records`` night-time pings.

    Callers pass only the pings of the home-estimation window.
    """
    user_ids = np.asarray(user_ids)
    night = is_night(unixtime, utc_offset_hours)
    ids, counts = np.unique(user_ids[night], return_counts=True)
    return set(ids[counts >= min_night_records].tolist())


def estimate_home(lat, lon, unixtime=None, bandwidth=0.005, tol=1e-6, max_iter=300):
    """Home location of one user from their night pings.

    Every ping is shifted to its flat-kernel mode. Converged points closer
    than half a bandwidth share a mode; the mode attracting the most pings
    wins, ties going to the mode reached first by the earliest ping.
    """
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if lat.size == 0:
        raise ValueError("no night pings")
    order = np.argsort(unixtime, kind="stable") if unixtime is not None else np.arange(lat.size)
    pts = np.column_stack([lat[order], lon[order]])
    converged = kernels.flat_mean_shift(pts, bandwidth, tol, max_iter)
    merge2 = (bandwidth / 2.0) ** 2
    centers: list[np.ndarray] = []
    members: list[list[int]] = []
    for p, q in enumerate(converged):
        for k, c in enumerate(centers):
            if ((q - c) ** 2).sum() <= merge2:
                members[k].append(p)
                break
        else:
            centers.append(q)
            members.append([p])
    best = max(range(len(centers)), key=lambda k: (len(members[k]), -k))
    mode = converged[members[best]].mean(axis=0)
    return float(mode[0]), float(mode[1])


@dataclass(frozen=True)
class Home:
    lat: float
    lon: float
    district: int


def estimate_homes(user_ids, lat, lon, unixtime, district_map, users=None, bandwidth=0.005,
                   utc_offset_hours=9) -> dict:
    """Home for every user in ``users`` (default: all) from their night pings.

    Users without night pings, or whose mode falls outside every district,
    are dropped and counted in a warning.
    """
    user_ids = np.asarray(user_ids)
    night = is_night(unixtime, utc_offset_hours)
    sel = night if users is None else night & np.isin(user_ids, list(users))
    uid = user_ids[sel]
    order = np.argsort(uid, kind="stable")
    uid = uid[order]
    la = np.asarray(lat)[sel][order]
    lo = np.asarray(lon)[sel][order]
    tm = np.asarray(unixtime)[sel][order]
    starts = np.flatnonzero(np.r_[True, uid[1:] != uid[:-1]]) if uid.size else np.array([], dtype=int)
    ends = np.r_[starts[1:], uid.size]
    homes = {}
    for s, e in zip(starts, ends):
        h_lat, h_lon = estimate_home(la[s:e], lo[s:e], tm[s:e], bandwidth)
        d = int(district_map.assign(np.array([h_lat]), np.array([h_lon]))[0])
        if d >= 0:
            homes[uid[s]] = Home(h_lat, h_lon, d)
    wanted = set(np.unique(user_ids).tolist()) if users is None else set(users)
    dropped = len(wanted) - len(homes)
    if dropped:
        log.warning("%d users dropped without a usable night-time home", dropped)
    return homes
