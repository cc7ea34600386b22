"""Synthetic schedules and event logs with known generating parameters.

Used for fixtures, demos and generate-then-fit checks: the logs are
produced by running the simulator itself, so stamps, device traces and
flight schedules are mutually consistent.
"""

from datetime import date, datetime, timezone

import numpy as np

from .engine import SimulationConfig, StaffingSchedule, simulate_day
from .ingest import DeviceObservation, FlightArrival, StampRecord

# arrivals per hour of day: a large morning bank and a smaller afternoon one
BIMODAL_PROFILE = np.array([
    0, 0, 0, 0, 0, 2, 6, 9, 10, 9, 8, 6,
    2, 1, 1, 4, 5, 4, 2, 1, 1, 0, 0, 0], dtype=float)


def day_start(day, utc_offset=0.0):
    """UTC epoch seconds of local midnight."""
    if isinstance(day, str):
        day = date.fromisoformat(day)
    return datetime(day.year, day.month, day.day, tzinfo=timezone.utc).timestamp() - utc_offset


def synthetic_flights(day, n_flights, gates, rng, profile=BIMODAL_PROFILE, mean_delay=0.0,
                      delay_sd=600.0, passengers=(60, 200), with_counts=True, utc_offset=0.0,
                      prefix="XX"):
    """Flights with scheduled times drawn from an hourly profile.

    Actual block time = scheduled + Normal(mean_delay, delay_sd) seconds.
    """
    t0 = day_start(day, utc_offset)
    p = np.asarray(profile, dtype=float)
    hours = rng.choice(24, size=n_flights, p=p / p.sum())
    sched = t0 + hours * 3600.0 + np.floor(rng.uniform(0, 3600, n_flights))
    delay = np.round(rng.normal(mean_delay, delay_sd, n_flights))
    gate = rng.choice(len(gates), n_flights)
    pax = rng.integers(passengers[0], passengers[1] + 1, n_flights)
    order = np.argsort(sched, kind="stable")
    return [FlightArrival(f"{prefix}{i:03d}", float(sched[j]), float(sched[j] + delay[j]),
                          gates[gate[j]], int(pax[j]) if with_counts else None)
            for i, j in enumerate(order)]


def synthesize_logs(flights, walk_model, service_model, staffing, seed=0, device_share=0.2,
                    untraced_devices=0, missing_flight_share=0.02, gate_zone=None,
                    immigration_zones=("IMM-A", "IMM-B")):
    """Simulate a day and emit the stamps and Wi-Fi sightings it would leave.

    Returns (result, stamps, observations). A device carried by a traced
    passenger is last seen in its gate's zone at block time and first seen
    in immigration at its queue arrival, so the logged walk times follow
    the walk model exactly. ``untraced_devices`` extra devices are seen in
    immigration only.
    """
    gate_zone = gate_zone or (lambda g: g)
    result = simulate_day(flights, None, walk_model, service_model, staffing,
                          SimulationConfig(seed=seed))
    rng = np.random.default_rng([seed, 1])
    tr = result.served

    stamps = []
    blank = rng.random(len(tr)) < missing_flight_share
    for (fid, dep, desk), b in zip(tr[["flight_id", "departure", "desk"]].itertuples(index=False),
                                   blank):
        stamps.append(StampRecord(float(np.round(dep)), f"D{int(desk):02d}", None if b else fid))
    stamps.sort(key=lambda s: s.timestamp)

    obs = []
    carry = rng.random(len(tr)) < device_share
    for k, row in enumerate(tr.itertuples(index=False)):
        if not carry[k]:
            continue
        dev = f"dev{row.passenger_id:06d}"
        zone = immigration_zones[k % len(immigration_zones)]
        g = gate_zone(row.gate)
        obs.append(DeviceObservation(dev, float(row.gate_time - 120.0), g))
        obs.append(DeviceObservation(dev, float(row.gate_time), g))
        obs.append(DeviceObservation(dev, float(row.queue_arrival), zone))
        obs.append(DeviceObservation(dev, float(row.departure), zone))
    if untraced_devices and len(tr):
        times = rng.choice(tr["queue_arrival"].to_numpy(), untraced_devices)
        dwell = rng.exponential(600.0, untraced_devices)
        for i, (t, d) in enumerate(zip(times, dwell)):
            zone = immigration_zones[i % len(immigration_zones)]
            obs.append(DeviceObservation(f"anon{i:06d}", float(t), zone))
            obs.append(DeviceObservation(f"anon{i:06d}", float(t + d), zone))
    obs.sort(key=lambda o: (o.timestamp, o.device_id, o.zone))
    return result, stamps, obs


def two_peak_staffing(day, utc_offset=0.0, morning=12, midday=4, afternoon=8, evening=3,
                      dip=(12, 14)):
    """Staffing with a morning shift, a midday dip, an afternoon shift and a night level."""
    t0 = day_start(day, utc_offset)
    return StaffingSchedule((
        (t0, evening),
        (t0 + 5 * 3600, morning),
        (t0 + dip[0] * 3600, midday),
        (t0 + dip[1] * 3600, afternoon),
        (t0 + 21 * 3600, evening),
    ))
