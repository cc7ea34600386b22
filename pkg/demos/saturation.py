"""Find the demand level where throughput stops growing."""

import numpy as np

from paxflow.analyze import ThroughputDemandCurve, detect_saturation

rng = np.random.default_rng(3)
demand = np.arange(10, 601, 5)
throughput = 0.8 * np.minimum(demand, 280) * (1 + rng.uniform(-0.05, 0.05, demand.size))
curve = ThroughputDemandCurve([(int(d), float(t)) for d, t in zip(demand, throughput)])
print("saturation at demand", detect_saturation(curve))

linear = ThroughputDemandCurve([(int(d), 0.5 * d) for d in demand])
print("straight line:", detect_saturation(linear))
