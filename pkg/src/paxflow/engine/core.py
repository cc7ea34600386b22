"""Event loop over an arrival plan, in pure Python and as a compiled kernel.

Both loops consume the same inputs in the same order and produce
identical output; the Python loop can check the queue invariants after
every event, the kernel is for long runs.
"""

from dataclasses import dataclass

import numpy as np

from ..ingest import window_start
from . import _kernel
from .fel import EventKind, FutureEventList
from .queue import (InvariantViolation, QueueState, apply_staffing_change, check_state,
                    handle_queue_arrival, handle_service_completion)
from .staffing import CongestionPolicy, StaffingSchedule


@dataclass
class ArrivalPlan:
    """Passengers grouped by the event that releases them (usually a flight).

    Passengers of group g are arrival_times[offsets[g]:offsets[g+1]]; each
    is at or after group_times[g], and group_times is nondecreasing.
    """

    group_times: np.ndarray
    offsets: np.ndarray
    arrival_times: np.ndarray

    def __post_init__(self):
        self.group_times = np.asarray(self.group_times, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        self.arrival_times = np.asarray(self.arrival_times, dtype=float)
        if self.offsets.size != self.group_times.size + 1 or self.offsets[0] != 0 \
                or self.offsets[-1] != self.arrival_times.size:
            raise ValueError("offsets do not match groups and arrivals")
        if np.any(np.diff(self.group_times) < 0):
            raise ValueError("group times must be nondecreasing")
        group_of = np.repeat(np.arange(self.group_times.size), np.diff(self.offsets))
        if np.any(self.arrival_times < self.group_times[group_of]):
            raise ValueError("a passenger reaches the queue before its group is released")

    @property
    def n_passengers(self):
        return self.arrival_times.size

    @classmethod
    def stationary(cls, arrival_times, chunk=1024):
        """Plan for a bare arrival stream, released in chunks."""
        a = np.sort(np.asarray(arrival_times, dtype=float))
        offsets = np.arange(0, a.size, chunk)
        return cls(a[offsets], np.append(offsets, a.size), a)


@dataclass
class RawRun:
    service_start: np.ndarray
    departure: np.ndarray
    desk: np.ndarray
    arrival_rank: np.ndarray
    bin_starts: np.ndarray
    bin_queue: np.ndarray
    bin_busy: np.ndarray
    unstable: bool
    max_queue: int
    events: int
    queue_area: float
    system_area: float
    t_start: float
    t_end: float


class DurationStream:
    """Hands out pre-drawn service durations in service-start order."""

    def __init__(self, durations):
        self.durations = np.asarray(durations, dtype=float)
        self.used = 0

    def __call__(self, t):
        d = self.durations[self.used]
        self.used += 1
        return d


def run_python(plan, durations, staffing, instability_cap=100_000, bin_width=900.0,
               utc_offset=0.0, check_invariants=False):
    n = plan.n_passengers
    service = DurationStream(durations)
    policy = staffing if isinstance(staffing, CongestionPolicy) else None
    state = QueueState(n, active_desks=policy.start_desks if policy else 0)
    fel = FutureEventList()
    if policy is None:
        for t, c in staffing.breakpoints:
            fel.schedule(t, EventKind.STAFFING_CHANGE, c)
    if plan.group_times.size:
        fel.schedule(plan.group_times[0], EventKind.FLIGHT_ARRIVAL, 0)
        if policy is not None:
            fel.schedule(plan.group_times[0] + policy.review_interval, EventKind.STAFFING_CHANGE)

    bins, bq, bb = [], [], []
    next_b = None
    last_t = t_start = np.nan
    q_area = s_area = 0.0
    unstable = False
    max_queue = events = 0
    prev_time = -np.inf

    while fel:
        ev = fel.pop()
        t = ev.time
        if next_b is None:
            next_b = window_start(t, bin_width, utc_offset) + bin_width
            last_t = t_start = t
        if check_invariants and t < prev_time:
            raise InvariantViolation("event times went backwards")
        prev_time = t
        while t >= next_b:
            bins.append(next_b - bin_width)
            bq.append(len(state.waiting))
            bb.append(state.n_busy)
            next_b += bin_width
        q_area += len(state.waiting) * (t - last_t)
        s_area += (len(state.waiting) + state.n_busy) * (t - last_t)
        last_t = t

        kind = ev.kind
        if kind == EventKind.QUEUE_ARRIVAL:
            handle_queue_arrival(state, ev.payload, t, service, fel)
            if len(state.waiting) > max_queue:
                max_queue = len(state.waiting)
            if len(state.waiting) > instability_cap:
                unstable = True
        elif kind == EventKind.SERVICE_COMPLETION:
            handle_service_completion(state, ev.payload, t, service, fel)
        elif kind == EventKind.FLIGHT_ARRIVAL:
            g = ev.payload
            for pid in range(plan.offsets[g], plan.offsets[g + 1]):
                fel.schedule(plan.arrival_times[pid], EventKind.QUEUE_ARRIVAL, pid)
            if g + 1 < plan.group_times.size:
                fel.schedule(plan.group_times[g + 1], EventKind.FLIGHT_ARRIVAL, g + 1)
        elif ev.payload is None:
            # policy review
            apply_staffing_change(state, policy.decide(len(state.waiting), state.active_desks),
                                  t, service, fel)
            if fel or state.waiting or state.n_busy:
                fel.schedule(t + policy.review_interval, EventKind.STAFFING_CHANGE)
        else:
            apply_staffing_change(state, ev.payload, t, service, fel)
        events += 1
        if check_invariants:
            check_state(state, n)
        if unstable:
            break

    if next_b is not None:
        bins.append(next_b - bin_width)
        bq.append(len(state.waiting))
        bb.append(state.n_busy)

    return RawRun(state.service_start, state.departure, state.desk, state.arrival_rank,
                  np.array(bins, dtype=float), np.array(bq, dtype=np.int64),
                  np.array(bb, dtype=np.int64), unstable, max_queue, events,
                  q_area, s_area, t_start, last_t)


def run_compiled(plan, durations, staffing, instability_cap=100_000, bin_width=900.0,
                 utc_offset=0.0):
    if isinstance(staffing, CongestionPolicy):
        st_times = np.empty(0)
        st_counts = np.empty(0, dtype=np.int64)
        pol = np.array([1, staffing.upper, staffing.lower, staffing.min_desks,
                        staffing.max_desks, staffing.start_desks], dtype=np.int64)
        interval = float(staffing.review_interval)
        max_desks = staffing.max_desks
    else:
        st_times = np.array([t for t, _ in staffing.breakpoints], dtype=float)
        st_counts = np.array([c for _, c in staffing.breakpoints], dtype=np.int64)
        pol = np.zeros(6, dtype=np.int64)
        interval = 0.0
        max_desks = staffing.max_desks
    out = _kernel.run(plan.group_times, plan.offsets, plan.arrival_times,
                      np.ascontiguousarray(durations, dtype=float), st_times, st_counts, pol,
                      interval, max(max_desks, 1), instability_cap, float(bin_width),
                      float(utc_offset))
    (ss, dep, desk, rank, bins, bq, bb, nbins, unstable, max_queue, events,
     q_area, s_area, t_start, t_end) = out
    return RawRun(ss, dep, desk, rank, bins[:nbins], bq[:nbins], bb[:nbins], bool(unstable),
                  int(max_queue), int(events), q_area, s_area, t_start, t_end)


__all__ = ["ArrivalPlan", "RawRun", "run_python", "run_compiled", "StaffingSchedule"]
