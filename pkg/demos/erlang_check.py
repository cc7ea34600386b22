"""Compare the simulated M/M/2 mean wait with the Erlang C formula."""

import math

import numpy as np

from paxflow.engine import StaffingSchedule, simulate_queue


def erlang_c_wait(lam, mu, c):
    a = lam / mu
    top = a**c / math.factorial(c) * c / (c - a)
    p_wait = top / (sum(a**k / math.factorial(k) for k in range(c)) + top)
    return p_wait / (c * mu - lam)


lam, mu, c, n = 1.8, 1.0, 2, 1_000_000      # per minute
exact = erlang_c_wait(lam, mu, c)
waits = []
for seed in range(5):
    rng = np.random.default_rng(seed)
    arr = np.cumsum(rng.exponential(60 / lam, n))
    res = simulate_queue(arr, rng.exponential(60 / mu, n), StaffingSchedule.constant(c))
    waits.append(res.mean_wait() / 60)
    L = res.diagnostics["time_avg_queue"]
    print(f"seed {seed}: W = {waits[-1]:.3f} min, L = {L:.3f}, lambda W = {lam * waits[-1]:.3f}")
print(f"mean over seeds {np.mean(waits):.3f} min, Erlang C {exact:.3f} min")
