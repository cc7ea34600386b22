"""Future event list ordered by (time, insertion sequence)."""

from dataclasses import dataclass, field
from enum import IntEnum
import heapq
import itertools


class EventKind(IntEnum):
    FLIGHT_ARRIVAL = 0
    QUEUE_ARRIVAL = 1
    SERVICE_COMPLETION = 2
    STAFFING_CHANGE = 3


class CausalityError(RuntimeError):
    """An event was scheduled before the current simulation clock."""


@dataclass(frozen=True, order=True)
class EventNotice:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    payload: object = field(compare=False, default=None)


class FutureEventList:
    """Min-heap of event notices; simultaneous events pop in insertion order."""

    def __init__(self, clock=float("-inf")):
        self.clock = clock
        self._heap = []
        self._seq = itertools.count()

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)

    def schedule(self, time, kind, payload=None):
        if time < self.clock:
            raise CausalityError(f"event at {time} scheduled while clock is at {self.clock}")
        notice = EventNotice(time, next(self._seq), EventKind(kind), payload)
        heapq.heappush(self._heap, notice)
        return notice

    def peek(self):
        return self._heap[0]

    def pop(self):
        notice = heapq.heappop(self._heap)
        self.clock = notice.time
        return notice
