"""Regenerate the bundled fixture set in fixtures/.

Three days of synthetic arrivals (Aug 12, 13 and 15; the 14th is left
out on purpose so the ingest report has a missing day). The logs are
produced by the simulator itself with a known walk-speed mixture and a
known per-desk rate, so calibration on them can be checked against the
generator.

    python3 demos/make_fixtures.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from paxflow import ingest
from paxflow.calibrate import MixtureComponent, ServiceRateModel, WalkSpeedModel
from paxflow.synthetic import synthesize_logs, synthetic_flights, two_peak_staffing

UTC_OFFSET = 10 * 3600          # local time is UTC+10
DAYS = ["2012-08-12", "2012-08-13", "2012-08-15"]
GATES = [f"{g}" for g in (8, 9, 10, 24, 31, 33, 35, 50, 53, 55)]
DISTANCES = {g: 180.0 + 25.0 * i for i, g in enumerate(GATES)}

# generator truth: slow and fast walkers, 15 passengers per desk per 15 minutes
WALK = WalkSpeedModel([MixtureComponent(0.35, "lognormal", (np.log(0.55), 0.12)),
                       MixtureComponent(0.65, "lognormal", (np.log(1.25), 0.10))], DISTANCES)
SERVICE = ServiceRateModel(np.array([13.0, 14.0, 15.0, 16.0, 17.0]))

CONFIG = """\
# paxflow configuration for the bundled fixtures
[inputs]
flights = flights.csv
stamps = stamps.csv
wifi = wifi.csv
distances = distances.csv

[zones]
# zone:gate pairs
gate_zones = {gate_zones}
immigration_zones = IMM-A, IMM-B

[simulation]
seed = 7
bin_width = 900
instability_cap = 100000
utc_offset = {utc_offset}

[staffing]
mode = derived
upper = 280
lower = 20
min_desks = 2
max_desks = 30

[calibration]
max_components = 8
posterior_threshold = 0.05
min_wait = 900
min_observations = 10
queue_per_desk = 1.0

[output]
dir = out
"""


def main(outdir="fixtures"):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    flights, stamps, obs = [], [], []
    for i, day in enumerate(DAYS):
        rng = np.random.default_rng([2012, i])
        fl = synthetic_flights(day, 30, GATES, rng, mean_delay=1560.0, utc_offset=UTC_OFFSET,
                               prefix=f"QF{i}")
        staffing = two_peak_staffing(day, UTC_OFFSET, morning=14, midday=4, afternoon=10,
                                     evening=6)
        res, st, ob = synthesize_logs(fl, WALK, SERVICE, staffing, seed=100 + i,
                                      untraced_devices=400, gate_zone=lambda g: f"GATE-{g}")
        # device ids must not collide across days
        ob = [ingest.DeviceObservation(f"d{i}-{o.device_id}", o.timestamp, o.zone) for o in ob]
        flights += fl
        stamps += st
        obs += ob
        print(f"{day}: {len(fl)} flights, {res.diagnostics['passengers']} passengers, "
              f"max queue {res.diagnostics['max_queue']}")

    ingest.write_flights(flights, out / "flights.csv")
    ingest.write_stamps(sorted(stamps, key=lambda s: s.timestamp), out / "stamps.csv")
    ingest.write_wifi(sorted(obs, key=lambda o: (o.timestamp, o.device_id, o.zone)),
                      out / "wifi.csv")
    ingest.write_distances(DISTANCES, out / "distances.csv")
    (out / "paxflow.ini").write_text(CONFIG.format(
        gate_zones=", ".join(f"GATE-{g}:{g}" for g in GATES), utc_offset=UTC_OFFSET))


if __name__ == "__main__":
    main(*sys.argv[1:])
