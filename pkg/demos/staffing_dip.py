"""A midday staffing dip between two demand peaks pushes the worst waits into
the early afternoon."""

import numpy as np

from paxflow.analyze import bin_statistics
from paxflow.calibrate import MixtureComponent, ServiceRateModel, WalkSpeedModel
from paxflow.engine import SimulationConfig, simulate_day
from paxflow.synthetic import day_start, synthetic_flights, two_peak_staffing

DAY = "2012-08-12"
gates = [f"G{i:02d}" for i in range(1, 9)]
walk = WalkSpeedModel([MixtureComponent(0.3, "lognormal", (np.log(0.6), 0.15)),
                       MixtureComponent(0.7, "lognormal", (np.log(1.3), 0.15))],
                      {g: 200.0 + 40 * i for i, g in enumerate(gates)})
service = ServiceRateModel(np.array([14.0, 15.0, 16.0]))
staffing = two_peak_staffing(DAY, morning=40, midday=5, afternoon=24, evening=14)

rng = np.random.default_rng(0)
flights = synthetic_flights(DAY, 80, gates, rng, mean_delay=1560)
res = simulate_day(flights, None, walk, service, staffing, SimulationConfig(seed=0))

t0 = day_start(DAY)
print("hour  desks  mean wait (min)  queue at hour end")
for b in bin_statistics(res.traces):
    h = (b.bin_start - t0) / 3600
    if h == int(h) and 5 <= h <= 22:
        w = "-" if np.isnan(b.mean_wait) else f"{b.mean_wait / 60:.1f}"
        print(f"{int(h):>4}  {staffing.desks_at(b.bin_start):>5}  {w:>15}  "
              f"{b.queue_length_end:>17}")
