"""Day simulations: flights -> walks -> immigration queue -> departures."""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..calibrate.walk import UnknownGate, sample_walk_times
from .core import ArrivalPlan, run_compiled, run_python
from .staffing import CongestionPolicy

TRACE_COLUMNS = ["passenger_id", "flight_id", "gate", "gate_time", "queue_arrival",
                 "service_start", "departure", "desk", "served"]


@dataclass(frozen=True)
class PassengerTrace:
    passenger_id: int
    flight_id: str
    gate: str
    gate_time: float
    queue_arrival: float
    service_start: float
    departure: float

    @property
    def wait(self):
        return self.service_start - self.queue_arrival

    @property
    def sojourn(self):
        return self.departure - self.queue_arrival


@dataclass(frozen=True)
class SimulationConfig:
    seed: int = 0
    instability_cap: int = 100_000
    bin_width: float = 900.0
    utc_offset: float = 0.0
    backend: str = "auto"          # "auto", "python" or "compiled"
    check_invariants: bool = False


@dataclass
class SimulationResult:
    traces: pd.DataFrame
    bins: pd.DataFrame              # bin_start, queue_length, in_service (end-of-bin)
    diagnostics: dict = field(default_factory=dict)

    @property
    def queue_length_series(self):
        return dict(zip(self.bins["bin_start"].tolist(), self.bins["queue_length"].tolist()))

    @property
    def unstable(self):
        return self.diagnostics["unstable"]

    @property
    def served(self):
        return self.traces[self.traces["served"]]

    def trace(self, i):
        r = self.traces.iloc[i]
        return PassengerTrace(int(r.passenger_id), r.flight_id, r.gate, r.gate_time,
                              r.queue_arrival, r.service_start, r.departure)

    def mean_wait(self):
        s = self.served
        return float((s["service_start"] - s["queue_arrival"]).mean())

    def to_csv(self, traces_path, bins_path=None, bin_stats=None):
        """Write the trace table, and optionally the per-bin summary rows."""
        self.traces.to_csv(traces_path, index=False, float_format="%.6f", lineterminator="\n")
        if bins_path is not None:
            from ..analyze import bin_statistics, stats_frame
            stats = bin_stats if bin_stats is not None else bin_statistics(
                self.traces, self.bins.attrs.get("bin_width", 900.0),
                utc_offset=self.bins.attrs.get("utc_offset", 0.0))
            stats_frame(stats).to_csv(bins_path, index=False, float_format="%.6f",
                                      lineterminator="\n")


def generate_passenger_arrivals(flight, occupancy, walk_model, rng):
    """Queue-arrival times of one flight's passengers (block time + walk)."""
    if flight.gate not in walk_model.gate_distances:
        raise UnknownGate(flight.gate)
    if flight.passenger_count is not None:
        n = flight.passenger_count
    elif occupancy is not None:
        n = occupancy.sample(flight.flight_id, rng)
    else:
        raise ValueError(f"flight {flight.flight_id} has no passenger count and no occupancy model")
    if n == 0:
        return np.empty(0)
    return flight.actual_time + sample_walk_times(walk_model, flight.gate, n, rng)


def _run(plan, durations, staffing, config):
    backend = config.backend
    if backend == "auto":
        backend = "python" if config.check_invariants else "compiled"
    if backend == "python":
        return run_python(plan, durations, staffing, config.instability_cap, config.bin_width,
                          config.utc_offset, config.check_invariants)
    if backend == "compiled":
        return run_compiled(plan, durations, staffing, config.instability_cap, config.bin_width,
                            config.utc_offset)
    raise ValueError(f"unknown backend {backend!r}")


def _result(raw, plan, durations_used, config, flight_ids, gates, gate_times):
    served = ~np.isnan(raw.departure)
    traces = pd.DataFrame({
        "passenger_id": np.arange(plan.n_passengers),
        "flight_id": flight_ids,
        "gate": gates,
        "gate_time": gate_times,
        "queue_arrival": plan.arrival_times,
        "service_start": raw.service_start,
        "departure": raw.departure,
        "desk": raw.desk,
        "served": served,
    })
    bins = pd.DataFrame({"bin_start": raw.bin_starts, "queue_length": raw.bin_queue,
                         "in_service": raw.bin_busy})
    bins.attrs["bin_width"] = config.bin_width
    bins.attrs["utc_offset"] = config.utc_offset
    horizon = raw.t_end - raw.t_start if plan.n_passengers else 0.0
    diagnostics = {
        "unstable": raw.unstable,
        "max_queue": raw.max_queue,
        "events_processed": raw.events,
        "passengers": plan.n_passengers,
        "served": int(served.sum()),
        "unserved": int(plan.n_passengers - served.sum()),
        "horizon": horizon,
        "time_avg_queue": raw.queue_area / horizon if horizon > 0 else 0.0,
        "time_avg_in_system": raw.system_area / horizon if horizon > 0 else 0.0,
    }
    return SimulationResult(traces, bins, diagnostics)


def simulate_queue(arrival_times, service_durations, staffing, config=SimulationConfig()):
    """Simulate a bare arrival stream with pre-drawn service durations.

    service_durations must hold at least one value per arrival; they are
    used in the order services start.
    """
    plan = ArrivalPlan.stationary(arrival_times)
    durations = np.asarray(service_durations, dtype=float)
    if durations.size < plan.n_passengers:
        raise ValueError("need one service duration per passenger")
    if not isinstance(staffing, CongestionPolicy) and plan.n_passengers:
        staffing.check_covers(plan.group_times[0])
    raw = _run(plan, durations, staffing, config)
    n = plan.n_passengers
    return _result(raw, plan, durations, config, np.full(n, ""), np.full(n, ""),
                   plan.arrival_times.copy())


def simulate_day(flights, occupancy, walk_model, service_model, staffing,
                 config=SimulationConfig()):
    """Simulate one day of arrivals through immigration.

    Random draws, in order: passenger counts and walk times flight by
    flight (flights ordered by block time, then id), then one service
    duration per passenger. Identical inputs and seed give identical
    results.
    """
    if not flights:
        raise ValueError("no flights to simulate")
    rng = np.random.default_rng(config.seed)
    flights = sorted(flights, key=lambda f: (f.actual_time, f.flight_id))

    group_times, offsets, arrivals = [], [0], []
    fids, gates, gtimes = [], [], []
    for f in flights:
        a = generate_passenger_arrivals(f, occupancy, walk_model, rng)
        group_times.append(f.actual_time)
        offsets.append(offsets[-1] + a.size)
        arrivals.append(a)
        fids.append(np.full(a.size, f.flight_id, dtype=object))
        gates.append(np.full(a.size, f.gate, dtype=object))
        gtimes.append(np.full(a.size, f.actual_time))
    plan = ArrivalPlan(np.array(group_times), np.array(offsets), np.concatenate(arrivals))
    durations = service_model.service_durations(plan.n_passengers, rng)

    if not isinstance(staffing, CongestionPolicy):
        staffing.check_covers(plan.group_times[0])
    raw = _run(plan, durations, staffing, config)
    return _result(raw, plan, durations, config, np.concatenate(fids), np.concatenate(gates),
                   np.concatenate(gtimes))
