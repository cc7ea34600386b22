import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paxflow import ingest
from paxflow.ingest import DeviceObservation, FlightArrival, StampRecord
from paxflow.synthetic import day_start, synthetic_flights

FLIGHT_HEADER = "flight_id,scheduled_time,actual_time,gate,direction,passenger_count\n"
T0 = day_start("2012-08-12")


def ts(t):
    return ingest.format_timestamp(t)


# -- timestamps ------------------------------------------------------------------

def test_timestamp_offsets():
    assert ingest.parse_timestamp("2012-08-12T10:00:00+10:00") == T0
    assert ingest.parse_timestamp("2012-08-12T00:00:00Z") == T0
    with pytest.raises(ValueError):
        ingest.parse_timestamp("2012-08-12T00:00:00")


def test_window_start_local_midnight():
    off = 36000
    # 00:10 local on the 13th is 14:10 UTC on the 12th
    t = day_start("2012-08-13", off) + 600
    assert ingest.window_start(t, 900, off) == day_start("2012-08-13", off)
    assert str(ingest.local_day(t, off)) == "2012-08-13"


# -- flights ---------------------------------------------------------------------

def test_empty_flight_file():
    flights, rep = ingest.parse_flight_schedule(FLIGHT_HEADER.encode())
    assert flights == [] and rep.skipped == 0


def test_three_row_fixture():
    src = FLIGHT_HEADER + (
        f"QF1,{ts(T0)},{ts(T0 + 600)},53,arrival,150\n"
        f"QF2,{ts(T0)},{ts(T0 - 300)},8,departure,\n"
        f"QF3,{ts(T0 + 60)},{ts(T0 + 60)},24,arrival,\n")
    flights, rep = ingest.parse_flight_schedule(src.encode())
    assert [f.flight_id for f in flights] == ["QF1", "QF3"]
    assert flights[0].delay == 600 and flights[0].passenger_count == 150
    assert flights[1].passenger_count is None
    assert rep.filtered == 1 and rep.skipped == 0


def test_full_day_731_arrivals():
    rng = np.random.default_rng(12)
    arrivals = synthetic_flights("2012-08-12", 731, ["8", "53"], rng)
    buf = io.StringIO()
    ingest.write_flights(arrivals, buf)
    text = buf.getvalue() + "".join(
        f"DEP{i},{ts(T0 + i)},{ts(T0 + i)},8,departure,\n" for i in range(40))
    flights, rep = ingest.parse_flight_schedule(text.encode())
    assert len(flights) == 731
    assert rep.filtered == 40 and rep.skipped == 0


def test_bad_rows_are_counted():
    src = FLIGHT_HEADER + (
        f"QF1,{ts(T0)},{ts(T0)},53,arrival,\n"
        "QF2,not-a-time,2012-08-12T00:00:00Z,53,arrival,\n"
        "QF3,2012-08-12T00:00:00,2012-08-12T00:00:00Z,53,arrival,\n"
        f"QF4,{ts(T0)},{ts(T0)},53,arrival,-5\n")
    flights, rep = ingest.parse_flight_schedule(src.encode())
    assert len(flights) == 1
    assert rep.skipped == 3 and len(rep.skipped_lines) == 3


def test_malformed_header_is_fatal():
    with pytest.raises(ingest.SchemaError):
        ingest.parse_flight_schedule(b"flight,when,gate\nQF1,x,8\n")


flight_st = st.builds(
    FlightArrival,
    flight_id=st.from_regex(r"[A-Z]{2}[0-9]{1,4}", fullmatch=True),
    scheduled_time=st.integers(1_300_000_000, 1_400_000_000).map(float),
    actual_time=st.integers(1_300_000_000, 1_400_000_000).map(float),
    gate=st.from_regex(r"[0-9A-Z]{1,3}", fullmatch=True),
    passenger_count=st.one_of(st.none(), st.integers(0, 500)),
)


@settings(max_examples=50, deadline=None)
@given(st.lists(flight_st, max_size=20))
def test_flight_round_trip(flights):
    buf = io.StringIO()
    ingest.write_flights(flights, buf)
    again, rep = ingest.parse_flight_schedule(buf.getvalue().encode())
    assert again == flights and rep.skipped == 0


# -- stamps ----------------------------------------------------------------------

STAMP_HEADER = "timestamp,desk_id,flight_id,direction\n"


def test_empty_stamps():
    assert ingest.parse_immigration_stamps(STAMP_HEADER.encode())[0] == []


def test_blank_flight_id_retained():
    src = STAMP_HEADER + f"{ts(T0)},D01,,arrival\n"
    stamps, _ = ingest.parse_immigration_stamps(src.encode())
    assert stamps == [StampRecord(T0, "D01", None, "arrival")]


def test_five_stamps_two_desks_sorted():
    times = [50, 10, 40, 20, 30]
    src = STAMP_HEADER + "".join(
        f"{ts(T0 + t)},D0{i % 2},QF1,arrival\n" for i, t in enumerate(times))
    stamps, _ = ingest.parse_immigration_stamps(src.encode())
    assert len(stamps) == 5
    assert {s.desk_id for s in stamps} == {"D00", "D01"}
    assert [s.timestamp - T0 for s in stamps] == sorted(times)


def test_stamp_round_trip():
    stamps = [StampRecord(T0 + i, f"D{i % 3}", None if i % 4 == 0 else "QF9", "arrival")
              for i in range(12)]
    buf = io.StringIO()
    ingest.write_stamps(stamps, buf)
    assert ingest.parse_immigration_stamps(buf.getvalue().encode())[0] == stamps


# -- wifi ------------------------------------------------------------------------

WIFI_HEADER = "device_id,timestamp,zone,x,y\n"


def test_empty_wifi():
    assert ingest.parse_wifi_traces(WIFI_HEADER.encode())[0] == []


def test_multi_zone_observation_kept():
    src = WIFI_HEADER + f"a,{ts(T0)},Z1,1.5,2.0\na,{ts(T0)},Z2,1.5,2.0\n"
    obs, _ = ingest.parse_wifi_traces(src.encode())
    assert [o.zone for o in obs] == ["Z1", "Z2"]
    assert obs[0].position == (1.5, 2.0)


def test_duplicate_row_removed():
    rows = [f"d{i},{ts(T0 + i)},Z{i % 2},," for i in range(9)]
    rows.append(rows[4])
    obs, rep = ingest.parse_wifi_traces((WIFI_HEADER + "\n".join(rows) + "\n").encode())
    assert len(obs) == 9 and rep.duplicates == 1


def test_wifi_round_trip():
    obs = [DeviceObservation("a", T0, "Z1", (0.25, -3.0)), DeviceObservation("b", T0 + 1, "Z2")]
    buf = io.StringIO()
    ingest.write_wifi(obs, buf)
    assert ingest.parse_wifi_traces(buf.getvalue().encode())[0] == obs


# -- join ------------------------------------------------------------------------

def test_join_simple_walk():
    obs = [DeviceObservation("a", 100.0, "G53"), DeviceObservation("a", 400.0, "IMM")]
    walks, rep = ingest.join_gate_to_immigration(obs, {"G53"}, {"IMM"})
    assert len(walks) == 1 and walks[0].walk_time == 300.0 and walks[0].gate == "G53"


def test_join_uses_last_gate_and_first_immigration():
    obs = [DeviceObservation("a", 50.0, "G1"), DeviceObservation("a", 100.0, "G1"),
           DeviceObservation("a", 400.0, "IMM"), DeviceObservation("a", 900.0, "IMM")]
    walks, _ = ingest.join_gate_to_immigration(obs, {"G1": "1"}, {"IMM"})
    assert walks[0].walk_time == 300.0 and walks[0].gate == "1"


def test_join_unmatched_device():
    obs = [DeviceObservation("b", 400.0, "IMM")]
    walks, rep = ingest.join_gate_to_immigration(obs, {"G53"}, {"IMM"})
    assert walks == [] and rep.immigration_devices == 1


def test_join_wrong_direction_discarded():
    obs = [DeviceObservation("a", 500.0, "G53"), DeviceObservation("a", 400.0, "IMM")]
    walks, rep = ingest.join_gate_to_immigration(obs, {"G53"}, {"IMM"})
    assert walks == [] and rep.nonpositive == 1


def test_join_overlapping_zone_sets_rejected():
    with pytest.raises(ValueError):
        ingest.join_gate_to_immigration([], {"Z"}, {"Z"})


def test_join_sparse_day():
    # 87,671 devices in the hall, only 773 of them also traced at a gate
    n_total, n_traced = 87_671, 773
    obs = []
    for i in range(n_total):
        obs.append(DeviceObservation(f"d{i}", 1000.0 + i, "IMM"))
        if i % 113 == 0 and i // 113 < n_traced:
            obs.append(DeviceObservation(f"d{i}", 700.0 + i, "G53"))
    walks, rep = ingest.join_gate_to_immigration(obs, {"G53"}, {"IMM"})
    assert len(walks) == n_traced == rep.matched
    assert rep.immigration_devices == n_total
    assert all(w.walk_time == 300.0 for w in walks)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 1000),
                          st.sampled_from(["G1", "G2", "IMM", "X"])), max_size=80))
def test_join_properties(rows):
    obs = [DeviceObservation(f"d{d}", float(t), z) for d, t, z in rows]
    walks, rep = ingest.join_gate_to_immigration(obs, {"G1", "G2"}, {"IMM"})
    gate_devices = {o.device_id for o in obs if o.zone in ("G1", "G2")}
    assert len(walks) <= len(gate_devices)
    assert all(w.walk_time > 0 for w in walks)


# -- passengers per flight ---------------------------------------------------------

def _flight(fid, t=T0):
    return FlightArrival(fid, t, t, "8")


def test_occupancy_two_days():
    stamps = [StampRecord(T0 + 3600 + i, "D1", "QF1") for i in range(150)]
    stamps += [StampRecord(T0 + 86400 + 3600 + i, "D1", "QF1") for i in range(170)]
    occ = ingest.estimate_passengers_per_flight(stamps, [_flight("QF1")])
    assert sorted(occ.per_flight["QF1"].tolist()) == [150, 170]


def test_occupancy_flight_without_stamps_uses_fallback():
    stamps = [StampRecord(T0 + i, "D1", "QF1") for i in range(40)]
    occ = ingest.estimate_passengers_per_flight(stamps, [_flight("QF1"), _flight("QF2")])
    assert "QF2" not in occ.per_flight
    rng = np.random.default_rng(0)
    assert occ.sample("QF2", rng) == 40


def test_occupancy_hand_counts():
    counts = {"A1": (30, 50), "B2": (10, 12), "C3": (7, 9)}
    stamps = []
    for fid, per_day in counts.items():
        for d, n in enumerate(per_day):
            stamps += [StampRecord(T0 + d * 86400 + 7200 + k, "D", fid) for k in range(n)]
    stamps.append(StampRecord(T0 + 5, "D", None))
    occ = ingest.estimate_passengers_per_flight(stamps, [_flight(f) for f in counts])
    for fid, per_day in counts.items():
        assert occ.mean(fid) == pytest.approx(np.mean(per_day))


def test_occupancy_unusable_join():
    with pytest.raises(ingest.UnusableJoin):
        ingest.estimate_passengers_per_flight([StampRecord(T0, "D1", None)], [_flight("QF1")])


# -- open desks ------------------------------------------------------------------

def test_open_desks_empty():
    assert ingest.estimate_open_desks([], 3600) == {}


def test_open_desks_distinct_count():
    stamps = [StampRecord(T0 + 10, "A"), StampRecord(T0 + 20, "A"), StampRecord(T0 + 30, "B")]
    assert ingest.estimate_open_desks(stamps, 3600) == {T0: 2}


def test_open_desks_gap_filled_with_day_minimum():
    w = 1800
    stamps = []
    for k in range(2 * 7, 2 * 18):          # 07:00-18:00 in half hours
        if k == 27:                         # 13:30-14:00 has no stamps
            continue
        n = 3 if k in (20, 21) else 6
        stamps += [StampRecord(T0 + k * w + 60 * j, f"D{j}") for j in range(n)]
    desks = ingest.estimate_open_desks(stamps, w)
    assert desks[T0 + 27 * w] == 3
    assert desks[T0 + 26 * w] == 6
    assert min(desks) == T0 + 14 * w and max(desks) == T0 + 35 * w


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3 * 86400), st.sampled_from("ABCDE")), max_size=60))
def test_open_desks_bounded_by_distinct_desks(rows):
    stamps = [StampRecord(T0 + t, d) for t, d in rows]
    desks = ingest.estimate_open_desks(stamps, 900)
    n = len({d for _, d in rows})
    assert all(0 < c <= n for c in desks.values())
