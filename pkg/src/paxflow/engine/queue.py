"""FCFS multi-desk service node driven by a future event list.

Desks are numbered 0, 1, ...; desk d is open while d < active_desks. Work
always goes to the lowest-numbered idle open desk. When staffing drops, a
busy desk above the new level finishes its passenger and then closes.
"""

from collections import deque

import numpy as np

from .fel import EventKind


class InvariantViolation(AssertionError):
    pass


class QueueState:
    def __init__(self, n_passengers, active_desks=0):
        self.waiting = deque()          # (passenger, queue arrival time)
        self.busy = []                  # desk -> passenger or -1
        self.active_desks = active_desks
        self.n_busy = 0
        self.n_arrived = 0
        self.n_departed = 0
        self.service_start = np.full(n_passengers, np.nan)
        self.departure = np.full(n_passengers, np.nan)
        self.desk = np.full(n_passengers, -1, dtype=np.int64)
        self.arrival_rank = np.full(n_passengers, -1, dtype=np.int64)

    def idle_open_desk(self):
        for d in range(self.active_desks):
            if d >= len(self.busy) or self.busy[d] < 0:
                return d
        return -1

    def _occupy(self, desk, pid):
        while len(self.busy) <= desk:
            self.busy.append(-1)
        self.busy[desk] = pid
        self.n_busy += 1


def start_service(state, pid, desk, t, service, fel):
    if desk >= state.active_desks:
        raise InvariantViolation(f"service started on closed desk {desk}")
    duration = service(t)
    state.service_start[pid] = t
    state.desk[pid] = desk
    state._occupy(desk, pid)
    fel.schedule(t + duration, EventKind.SERVICE_COMPLETION, desk)


def handle_queue_arrival(state, pid, t, service, fel):
    """Serve at once if a desk is free and nobody waits, otherwise join the tail."""
    state.arrival_rank[pid] = state.n_arrived
    state.n_arrived += 1
    if not state.waiting:
        d = state.idle_open_desk()
        if d >= 0:
            start_service(state, pid, d, t, service, fel)
            return
    state.waiting.append((pid, t))


def handle_service_completion(state, desk, t, service, fel):
    """Release the desk; an open desk takes the head of the queue."""
    pid = state.busy[desk]
    state.departure[pid] = t
    state.busy[desk] = -1
    state.n_busy -= 1
    state.n_departed += 1
    if desk < state.active_desks and state.waiting:
        nxt, _ = state.waiting.popleft()
        start_service(state, nxt, desk, t, service, fel)


def apply_staffing_change(state, new_count, t, service, fel):
    """Set the open-desk level; newly opened desks pull from the queue head."""
    if new_count < 0:
        raise ValueError("desk count must be nonnegative")
    state.active_desks = new_count
    while state.waiting:
        d = state.idle_open_desk()
        if d < 0:
            break
        nxt, _ = state.waiting.popleft()
        start_service(state, nxt, d, t, service, fel)


def check_state(state, n_total):
    """Conservation, capacity and work-conservation checks after an event."""
    if state.n_departed + len(state.waiting) + state.n_busy != state.n_arrived:
        raise InvariantViolation("passenger conservation broken")
    if state.n_arrived > n_total:
        raise InvariantViolation("more arrivals than generated passengers")
    busy_open = sum(1 for d in range(min(state.active_desks, len(state.busy))) if state.busy[d] >= 0)
    if busy_open > state.active_desks:
        raise InvariantViolation("more busy open desks than open desks")
    if state.waiting and state.idle_open_desk() >= 0:
        raise InvariantViolation("idle open desk while passengers wait")
    arr = [a for _, a in state.waiting]
    if any(b < a for a, b in zip(arr, arr[1:])):
        raise InvariantViolation("waiting line out of arrival order")
