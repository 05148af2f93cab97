import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

import trajectories as tj
from epiwave.preprocess import (GridDistrictMap, Lexicon, PolygonDistrictMap, PreprocessConfig, SYMPTOMS,
                                count_symptom_queries, count_trips, count_trips_for_day, estimate_home,
                                extract_stays, filter_permanent_users, load_district_map, run_preprocess,
                                save_district_map, stay_table)
from epiwave.preprocess.homes import Home, is_night
from epiwave.preprocess.pipeline import read_mobility, study_dates
from epiwave.wmn import DataValidationError


# --- permanent users and homes ---------------------------------------------------

def night_times(k, day=0):
    # 22:00 local plus k minutes
    return [tj.MIDNIGHT0 + day * 86400 + (22 * 60 + m) * 60 for m in range(k)]


def test_night_window():
    hours = np.array([17, 18, 23, 0, 8, 9, 12])
    t = tj.MIDNIGHT0 + hours * 3600
    assert is_night(t).tolist() == [False, True, True, True, True, False, False]


def test_permanent_threshold_inclusive():
    users = ["a"] * 20 + ["b"] * 19 + ["c"] * 30
    times = night_times(20) + night_times(19) + [tj.MIDNIGHT0 + 12 * 3600 + i for i in range(30)]
    assert filter_permanent_users(np.array(users), np.array(times), 20) == {"a"}
    assert filter_permanent_users(np.array([], dtype=str), np.array([], dtype=np.int64), 20) == set()


def test_home_single_point_and_single_ping():
    assert estimate_home([35.7] * 5, [139.7] * 5) == (35.7, 139.7)
    assert estimate_home([35.1], [139.2]) == (35.1, 139.2)
    with pytest.raises(ValueError):
        estimate_home([], [])


def test_home_two_blobs():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(20):
        main = np.array([35.70, 139.70]) + rng.uniform(-0.01, 0.01, 2)
        other = main + np.array([0.02, -0.015])
        pts = np.concatenate([rng.normal(main, 0.001, (40, 2)), rng.normal(other, 0.001, (10, 2))])
        rng.shuffle(pts)
        lat, lon = estimate_home(pts[:, 0], pts[:, 1])
        hits += np.hypot(lat - main[0], lon - main[1]) <= 1e-3
    assert hits >= 19


def test_home_tie_goes_to_earliest_ping():
    lat = [35.0, 35.0, 36.0, 36.0]
    lon = [139.0, 139.0, 139.0, 139.0]
    assert estimate_home(lat, lon, unixtime=[5, 6, 1, 2]) == (36.0, 139.0)
    assert estimate_home(lat, lon, unixtime=[1, 2, 5, 6]) == (35.0, 139.0)


# --- districts ---------------------------------------------------------------------

def test_grid_map_assignment_and_round_trip(tmp_path):
    m = GridDistrictMap(0.0, 1.0, 0.0, 2.0, 2, 2, ["a", "b", "c", "d"])
    got = m.assign(np.array([0.25, 0.25, 0.75, 0.75, 5.0]), np.array([0.5, 1.5, 0.5, 1.5, 0.5]))
    assert (got[:4] >= 0).all() and len(set(got[:4].tolist())) == 4
    assert got[4] == -1
    save_district_map(m, tmp_path / "d.json")
    back = load_district_map(tmp_path / "d.json")
    assert np.array_equal(back.assign(np.array([0.25]), np.array([1.5])), m.assign(np.array([0.25]), np.array([1.5])))


def test_polygon_map():
    square = [(0, 0), (0, 1), (1, 1), (1, 0)]
    right = [(0, 1), (0, 2), (1, 2), (1, 1)]
    m = PolygonDistrictMap(["L", "R"], [square, right])
    assert m.assign(np.array([0.5, 0.5, 3.0]), np.array([0.5, 1.5, 3.0])).tolist() == [0, 1, -1]


# --- stays and trips -------------------------------------------------------------------

def day_minutes(legs):
    t, d = [], []
    for district, first, last, step in legs:
        mins = list(range(first, last, step)) + [last]
        t += [tj.MIDNIGHT0 + 60 * m for m in mins]
        d += [district] * len(mins)
    return np.array(t), np.array(d)


def test_all_day_in_one_district_is_one_stay():
    t, d = day_minutes(tj.SUITE["homebody"])
    stays = extract_stays(t, d)
    assert len(stays) == 1 and stays[0].district == tj.A


def test_short_visit_dropped():
    stays = extract_stays(*day_minutes(tj.SUITE["short_visit"]))
    assert [s.district for s in stays] == [tj.A, tj.A]
    assert count_trips_for_day([stays], 3).sum() == 0


def test_three_stops():
    stays = extract_stays(*day_minutes(tj.SUITE["three_stops"]))
    assert [s.district for s in stays] == [tj.A, tj.B, tj.C]
    e = count_trips_for_day([stays], 3)
    assert e[tj.A, tj.B] == 1 and e[tj.B, tj.C] == 1 and e[tj.A, tj.C] == 0 and e.sum() == 2


def test_round_trip_counts_both_directions():
    e = count_trips_for_day([extract_stays(*day_minutes(tj.SUITE["round_trip"]))], 3)
    assert e[tj.A, tj.B] == 1 and e[tj.B, tj.A] == 1 and e.sum() == 2


def test_midnight_split():
    stays = extract_stays(*day_minutes(tj.SUITE["across_midnight"]))
    assert [(s.district, s.day - tj.DAY0, s.minutes) for s in stays] == [
        (tj.C, 0, 120.0), (tj.A, 0, 90.0), (tj.A, 1, 60.0), (tj.B, 1, 90.0)]


def test_suite_matches_hand_counts():
    users, times, dists = tj.pings()
    stays = stay_table(users, times, dists)
    got = count_trips(stays, 3, [tj.DAY0, tj.DAY0 + 1])
    assert np.array_equal(got, tj.expected_matrices())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 400)), min_size=1, max_size=40),
       st.sampled_from([0.0, 5.0, 10.0, 30.0]))
def test_stay_invariants(steps, min_stay):
    # random walk of pings: (district, gap in minutes to the next ping)
    t = tj.MIDNIGHT0 + 60 * np.cumsum([0] + [g for _, g in steps[:-1]])
    d = np.array([k for k, _ in steps])
    stays = extract_stays(t, d, min_stay)
    for s in stays:
        assert s.minutes >= min_stay
    for a, b in zip(stays, stays[1:]):
        assert a.leave <= b.enter
    tab = stay_table(np.zeros(len(t), dtype=int), t, d, min_stay)
    days = np.unique(tab["day"])
    if days.size:
        e = count_trips(tab, 3, days)
        by_day = {}
        for s in stays:
            by_day.setdefault(s.day, []).append(s)
        pairs = sum(sum(a.district != b.district for a, b in zip(v, v[1:])) for v in by_day.values())
        assert e.sum() == pairs


# --- symptom queries --------------------------------------------------------------------

def test_lexicon_has_full_symptom_list():
    assert len(SYMPTOMS) == 44 and len(set(SYMPTOMS)) == 44
    with pytest.raises(ValueError):
        Lexicon.default(["Cough", "Hiccups"])


def test_query_matching_examples():
    lex = Lexicon.default()
    names = lex.names
    assert [names[k] for k in lex.match("bad cough tonight")] == ["Cough"]
    assert lex.match("weather tomorrow") == []
    assert sorted(names[k] for k in lex.match("Fever and COUGH")) == ["Cough", "Pyrexia"]


def test_count_symptom_queries_and_skips():
    lex = Lexicon.default(["Cough", "Pyrexia"])
    homes = {"u1": Home(0.0, 0.0, 1), "u2": Home(0.0, 0.0, 0)}
    out = count_symptom_queries(
        ["u1", "u1", "u2", "ghost", "u2"],
        ["2020-04-01 10:00:00", "2020-04-02 09:00:00", "2020-04-01 11:00:00", "2020-04-01 12:00:00",
         "2020-04-02 08:00:00"],
        ["fever and cough", "cough", "weather tomorrow", "cough", "high fever"],
        lex, homes, 2, ["2020-04-01", "2020-04-02"])
    expected = np.zeros((2, 2, 2))
    expected[0, 1] = [1, 1]
    expected[1, 1, 0] = 1
    expected[1, 0, 1] = 1
    assert np.array_equal(out.matrices, expected)
    assert out.skipped_no_home == 1 and out.matched_records == 3


# --- pipeline ---------------------------------------------------------------------------------

def small_inputs(days=3):
    """Two permanent users in a 1x2 grid city, one trip a day for user a."""
    dmap = GridDistrictMap(35.0, 35.1, 139.0, 139.2, 1, 2, ["W", "E"])
    west, east = (35.05, 139.05), (35.05, 139.15)
    rows = []
    for day in range(days):
        base = tj.MIDNIGHT0 + day * 86400
        date = (tj.START.toordinal() + day)
        iso = pd.Timestamp.fromordinal(date).strftime("%Y%m%d")
        for user, home in (("a", west), ("b", east)):
            for m in list(range(0, 8 * 60, 20)) + list(range(19 * 60, 24 * 60, 20)):
                rows.append((user, *home, base + 60 * m, iso))
        for m in range(10 * 60, 12 * 60 + 1, 30):
            rows.append(("a", *east, base + 60 * m, iso))
    mobility = pd.DataFrame(rows, columns=["id", "lat", "lon", "unixtime", "date"])
    dates = [tj.START + pd.Timedelta(days=d).to_pytimedelta() for d in range(days)]
    search = pd.DataFrame({"id": ["a"] * days + ["b"] * days,
                           "time": [f"{d.isoformat()} 12:00:00" for d in dates] * 2,
                           "query": ["sore throat"] * days + ["fever"] * days})
    cases = pd.DataFrame([(d.isoformat(), name, i + k) for k, d in enumerate(dates) for i, name in enumerate(["W", "E"])],
                         columns=["date", "district", "count"])
    return mobility, search, cases, dmap


def test_pipeline_small_city():
    mobility, search, cases, dmap = small_inputs()
    res = run_preprocess(mobility, search, cases, dmap, PreprocessConfig(home_days=3))
    s = res.series
    assert len(s) == 3 and s.districts == ("W", "E")
    assert {u: h.district for u, h in res.homes.items()} == {"a": 0, "b": 1}
    assert np.all(s.trips[:, 0, 1] == 1) and np.all(s.trips[:, 1, 0] == 1) and s.trips.sum() == 6
    w = s.symptoms.index("Oropharyngeal pain")
    f = s.symptoms.index("Pyrexia")
    assert np.all(s.search[:, 0, w] == 1) and np.all(s.search[:, 1, f] == 1) and s.search.sum() == 6
    assert s.cases[2].tolist() == [2.0, 3.0]


def test_pipeline_missing_mobility_day_is_named():
    mobility, search, cases, dmap = small_inputs()
    drop = (mobility["unixtime"] >= tj.MIDNIGHT0 + 86400) & (mobility["unixtime"] < tj.MIDNIGHT0 + 2 * 86400)
    with pytest.raises(DataValidationError, match="2020-04-02"):
        run_preprocess(mobility[~drop], search, cases, dmap, PreprocessConfig(home_days=3))


def test_pipeline_missing_search_day_and_case_rows():
    mobility, search, cases, dmap = small_inputs()
    with pytest.raises(DataValidationError, match="2020-04-03"):
        run_preprocess(mobility, search[~search["time"].str.startswith("2020-04-03")], cases, dmap,
                       PreprocessConfig(home_days=3))
    with pytest.raises(DataValidationError, match="E"):
        run_preprocess(mobility, search, cases.iloc[:-1], dmap, PreprocessConfig(home_days=3))
    with pytest.raises(DataValidationError, match="2020-04-02"):
        study_dates(cases[cases["date"] != "2020-04-02"])


def test_mobility_header_checked(tmp_path):
    (tmp_path / "20200401.csv").write_text("id,lat,lng,unixtime,date\n")
    with pytest.raises(DataValidationError, match="header"):
        read_mobility(tmp_path)
