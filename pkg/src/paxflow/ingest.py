"""Parsing and joining of the three event-log sources.

Flight schedules, immigration stamps and Wi-Fi device traces arrive as CSV
files with a header row. Timestamps are ISO 8601 with an explicit UTC
offset and are held internally as UTC epoch seconds (float).

Rows that cannot be parsed are skipped and counted; a header missing a
required column is fatal (SchemaError).
"""

from collections import Counter, defaultdict
import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
import io
import logging
import math
import os

import numpy as np

log = logging.getLogger(__name__)

FLIGHT_COLUMNS = ("flight_id", "scheduled_time", "actual_time", "gate", "direction")
STAMP_COLUMNS = ("timestamp", "desk_id", "flight_id", "direction")
WIFI_COLUMNS = ("device_id", "timestamp", "zone")
DISTANCE_COLUMNS = ("gate", "distance_m")
WALK_COLUMNS = ("device_id", "gate", "gate_exit_time", "immigration_entry_time", "walk_time")

DIRECTIONS = {"arrival": "arrival", "arr": "arrival", "a": "arrival",
              "departure": "departure", "dep": "departure", "d": "departure"}


class SchemaError(ValueError):
    """Header row is missing or lacks required columns."""


class UnusableJoin(ValueError):
    """Stamps cannot be matched to any scheduled flight."""


@dataclass(frozen=True)
class FlightArrival:
    flight_id: str
    scheduled_time: float
    actual_time: float
    gate: str
    passenger_count: int = None

    @property
    def delay(self):
        return self.actual_time - self.scheduled_time


@dataclass(frozen=True)
class StampRecord:
    timestamp: float
    desk_id: str
    flight_id: str = None
    direction: str = "arrival"


@dataclass(frozen=True)
class DeviceObservation:
    device_id: str
    timestamp: float
    zone: str
    position: tuple = None


@dataclass(frozen=True)
class WalkObservation:
    device_id: str
    gate: str
    gate_exit_time: float
    immigration_entry_time: float

    @property
    def walk_time(self):
        return self.immigration_entry_time - self.gate_exit_time


@dataclass
class ParseReport:
    source: str = ""
    rows: int = 0
    parsed: int = 0
    skipped: int = 0
    filtered: int = 0
    duplicates: int = 0
    skipped_lines: list = field(default_factory=list)

    def as_dict(self):
        return {k: getattr(self, k) for k in ("rows", "parsed", "skipped", "filtered", "duplicates")}


@dataclass
class JoinReport:
    gate_devices: int = 0
    immigration_devices: int = 0
    matched: int = 0
    nonpositive: int = 0


# -- timestamps ---------------------------------------------------------------

def parse_timestamp(text):
    """ISO 8601 string with offset -> UTC epoch seconds. Naive times are rejected."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return dt.timestamp()


def format_timestamp(t):
    dt = datetime.fromtimestamp(t, tz=timezone.utc)
    return dt.isoformat(timespec="microseconds" if t != int(t) else "seconds")


def window_start(t, width, utc_offset=0.0):
    """Start of the width-long window containing t, aligned to local midnight."""
    return math.floor((t + utc_offset) / width) * width - utc_offset


def local_day(t, utc_offset=0.0):
    return datetime.fromtimestamp(t + utc_offset, tz=timezone.utc).date()


# -- reading ------------------------------------------------------------------

def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary file-like
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _rows(source, required):
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError("missing header row")
        header = [h.strip().lower() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"header lacks columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                yield lineno, None
                continue
            yield lineno, dict(zip(header, (c.strip() for c in row)))
    finally:
        if owned:
            fh.close()
        elif isinstance(fh, io.TextIOWrapper):
            fh.detach()


def _source_name(source):
    return os.fspath(source) if isinstance(source, (str, os.PathLike)) else "<stream>"


def _skip(report, lineno, why):
    report.skipped += 1
    report.skipped_lines.append(lineno)
    log.debug("%s line %d skipped: %s", report.source, lineno, why)


def parse_flight_schedule(source):
    """Arrival rows of a flight schedule; departures are filtered out.

    Returns (flights, report).
    """
    report = ParseReport(_source_name(source))
    flights = []
    for lineno, row in _rows(source, FLIGHT_COLUMNS):
        report.rows += 1
        if row is None:
            _skip(report, lineno, "wrong field count")
            continue
        direction = DIRECTIONS.get(row["direction"].lower())
        if direction is None:
            _skip(report, lineno, f"direction {row['direction']!r}")
            continue
        if direction == "departure":
            report.filtered += 1
            continue
        try:
            sched = parse_timestamp(row["scheduled_time"])
            actual = parse_timestamp(row["actual_time"])
        except ValueError as exc:
            _skip(report, lineno, exc)
            continue
        if not row["flight_id"] or not row["gate"]:
            _skip(report, lineno, "blank flight_id or gate")
            continue
        count = row.get("passenger_count", "")
        if count:
            try:
                count = int(count)
            except ValueError:
                _skip(report, lineno, f"passenger_count {count!r}")
                continue
            if count < 0:
                _skip(report, lineno, "negative passenger_count")
                continue
        else:
            count = None
        flights.append(FlightArrival(row["flight_id"], sched, actual, row["gate"], count))
        report.parsed += 1
    return flights, report


def parse_immigration_stamps(source):
    """Immigration stamps ordered by time; returns (stamps, report).

    A blank flight_id is kept as None: such records still count towards
    desk activity but never join to a flight.
    """
    report = ParseReport(_source_name(source))
    stamps = []
    for lineno, row in _rows(source, STAMP_COLUMNS):
        report.rows += 1
        if row is None:
            _skip(report, lineno, "wrong field count")
            continue
        direction = DIRECTIONS.get(row["direction"].lower())
        if direction is None or not row["desk_id"]:
            _skip(report, lineno, "bad direction or blank desk_id")
            continue
        try:
            t = parse_timestamp(row["timestamp"])
        except ValueError as exc:
            _skip(report, lineno, exc)
            continue
        stamps.append(StampRecord(t, row["desk_id"], row["flight_id"] or None, direction))
        report.parsed += 1
    stamps.sort(key=lambda s: s.timestamp)
    return stamps, report


def parse_wifi_traces(source):
    """Device observations, exact duplicates removed; returns (observations, report).

    A device reported in several zones at one instant keeps one
    observation per zone.
    """
    report = ParseReport(_source_name(source))
    seen = set()
    obs = []
    for lineno, row in _rows(source, WIFI_COLUMNS):
        report.rows += 1
        if row is None:
            _skip(report, lineno, "wrong field count")
            continue
        if not row["device_id"] or not row["zone"]:
            _skip(report, lineno, "blank device_id or zone")
            continue
        try:
            t = parse_timestamp(row["timestamp"])
            x, y = row.get("x", ""), row.get("y", "")
            pos = (float(x), float(y)) if x and y else None
        except ValueError as exc:
            _skip(report, lineno, exc)
            continue
        key = (row["device_id"], t, row["zone"])
        if key in seen:
            report.duplicates += 1
            continue
        seen.add(key)
        obs.append(DeviceObservation(row["device_id"], t, row["zone"], pos))
        report.parsed += 1
    return obs, report


def parse_distances(source):
    """Gate -> distance to immigration in metres."""
    out = {}
    for lineno, row in _rows(source, DISTANCE_COLUMNS):
        if row is None:
            raise SchemaError(f"line {lineno}: wrong field count")
        d = float(row["distance_m"])
        if not d > 0:
            raise ValueError(f"line {lineno}: distance must be positive")
        out[row["gate"]] = d
    return out


def parse_walks(source):
    walks = []
    for lineno, row in _rows(source, WALK_COLUMNS):
        if row is None:
            raise SchemaError(f"line {lineno}: wrong field count")
        walks.append(WalkObservation(row["device_id"], row["gate"],
                                     parse_timestamp(row["gate_exit_time"]),
                                     parse_timestamp(row["immigration_entry_time"])))
    return walks


# -- writing ------------------------------------------------------------------

def _write(dest, header, rows):
    fh, owned = (open(dest, "w", newline="", encoding="utf-8"), True) \
        if isinstance(dest, (str, os.PathLike)) else (dest, False)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if owned:
            fh.close()


def write_flights(flights, dest):
    _write(dest, FLIGHT_COLUMNS + ("passenger_count",), (
        (f.flight_id, format_timestamp(f.scheduled_time), format_timestamp(f.actual_time),
         f.gate, "arrival", "" if f.passenger_count is None else f.passenger_count)
        for f in flights))


def write_stamps(stamps, dest):
    _write(dest, STAMP_COLUMNS, (
        (format_timestamp(s.timestamp), s.desk_id, s.flight_id or "", s.direction)
        for s in stamps))


def write_wifi(observations, dest):
    def row(o):
        x, y = o.position if o.position else ("", "")
        return (o.device_id, format_timestamp(o.timestamp), o.zone, repr(x) if x != "" else "",
                repr(y) if y != "" else "")
    _write(dest, WIFI_COLUMNS + ("x", "y"), (row(o) for o in observations))


def write_distances(distances, dest):
    _write(dest, DISTANCE_COLUMNS, ((g, repr(float(d))) for g, d in sorted(distances.items())))


def write_walks(walks, dest):
    _write(dest, WALK_COLUMNS, (
        (w.device_id, w.gate, format_timestamp(w.gate_exit_time),
         format_timestamp(w.immigration_entry_time), repr(w.walk_time)) for w in walks))


# -- joins and derived datasets ------------------------------------------------

def join_gate_to_immigration(traces, gate_zones, immigration_zones):
    """Walk observations for devices seen at a gate and then at immigration.

    walk_time = first immigration sighting - last gate sighting. A device
    whose last gate sighting is not before its first immigration sighting
    is discarded and counted in report.nonpositive.

    gate_zones is a set of zone names (each zone is its own gate) or a
    mapping zone -> gate. Returns (walks, report).
    """
    if not isinstance(gate_zones, dict):
        gate_zones = {z: z for z in gate_zones}
    immigration_zones = set(immigration_zones)
    if set(gate_zones) & immigration_zones:
        raise ValueError("gate and immigration zone sets overlap")

    last_gate = {}
    first_imm = {}
    for ob in traces:
        if ob.zone in gate_zones:
            prev = last_gate.get(ob.device_id)
            if prev is None or ob.timestamp > prev[0]:
                last_gate[ob.device_id] = (ob.timestamp, gate_zones[ob.zone])
        elif ob.zone in immigration_zones:
            prev = first_imm.get(ob.device_id)
            if prev is None or ob.timestamp < prev:
                first_imm[ob.device_id] = ob.timestamp

    report = JoinReport(len(last_gate), len(first_imm))
    walks = []
    for dev in sorted(last_gate.keys() & first_imm.keys()):
        t_gate, gate = last_gate[dev]
        t_imm = first_imm[dev]
        if t_imm - t_gate <= 0:
            report.nonpositive += 1
            continue
        walks.append(WalkObservation(dev, gate, t_gate, t_imm))
    report.matched = len(walks)
    return walks, report


def immigration_dwell(traces, immigration_zones):
    """Per-device (first, last) sighting inside the immigration zones.

    Returns two arrays (entry, exit) ordered by device id. Devices seen
    only once have zero dwell.
    """
    immigration_zones = set(immigration_zones)
    span = {}
    for ob in traces:
        if ob.zone in immigration_zones:
            lo, hi = span.get(ob.device_id, (ob.timestamp, ob.timestamp))
            span[ob.device_id] = (min(lo, ob.timestamp), max(hi, ob.timestamp))
    keys = sorted(span)
    entry = np.array([span[k][0] for k in keys], dtype=float)
    exit_ = np.array([span[k][1] for k in keys], dtype=float)
    return entry, exit_


@dataclass
class FlightOccupancyDistribution:
    """Empirical daily passenger counts per flight id, with a global fallback."""

    per_flight: dict
    fallback: np.ndarray

    def __post_init__(self):
        self.per_flight = {k: np.asarray(v, dtype=int) for k, v in self.per_flight.items()}
        self.fallback = np.asarray(self.fallback, dtype=int)
        for k, v in self.per_flight.items():
            if v.size == 0 or np.any(v <= 0):
                raise ValueError(f"flight {k!r}: counts must be positive and non-empty")
        if self.fallback.size == 0 or np.any(self.fallback <= 0):
            raise ValueError("fallback counts must be positive and non-empty")

    def sample(self, flight_id, rng):
        counts = self.per_flight.get(flight_id, self.fallback)
        return int(counts[rng.integers(counts.size)])

    def mean(self, flight_id):
        return float(self.per_flight.get(flight_id, self.fallback).mean())

    def to_dict(self):
        return {"per_flight": {k: v.tolist() for k, v in sorted(self.per_flight.items())},
                "fallback": self.fallback.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["per_flight"], d["fallback"])


def estimate_passengers_per_flight(stamps, flights, utc_offset=0.0):
    """Distribution of daily arrival-stamp counts for each scheduled flight id."""
    if not stamps or not flights:
        raise ValueError("stamps and flights must both be non-empty")
    known = {f.flight_id for f in flights}
    with_id = [s for s in stamps if s.flight_id is not None and s.direction == "arrival"]
    if not with_id:
        raise UnusableJoin("no arrival stamp carries a flight id")
    counts = Counter((s.flight_id, local_day(s.timestamp, utc_offset))
                     for s in with_id if s.flight_id in known)
    if not counts:
        raise UnusableJoin("no stamp flight id matches the flight schedule")
    per_flight = defaultdict(list)
    for (fid, day), n in sorted(counts.items()):
        per_flight[fid].append(n)
    fallback = [n for (_, _), n in sorted(counts.items())]
    return FlightOccupancyDistribution(dict(per_flight), fallback)


def estimate_open_desks(stamps, window=3600.0, utc_offset=0.0, direction="arrival"):
    """Distinct stamping desks per window -> {window_start: count}.

    Windows without stamps that fall between a day's first and last active
    window are assumed to run at that day's lowest nonzero staffing.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    desks = defaultdict(set)
    for s in stamps:
        if direction is None or s.direction == direction:
            desks[window_start(s.timestamp, window, utc_offset)].add(s.desk_id)
    out = {w: len(d) for w, d in desks.items()}

    by_day = defaultdict(list)
    for w in out:
        by_day[local_day(w, utc_offset)].append(w)
    for day, ws in by_day.items():
        low = min(out[w] for w in ws)
        w = min(ws)
        last = max(ws)
        while w < last:
            w += window
            if w not in out:
                out[w] = low
    return dict(sorted(out.items()))
