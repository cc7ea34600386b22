"""Open-desk schedules and the congestion-based staffing rule."""

import bisect
import csv
from dataclasses import dataclass

from ..ingest import format_timestamp, parse_timestamp


class StaffingCoverageError(ValueError):
    """The schedule does not cover the simulated horizon."""


@dataclass(frozen=True)
class StaffingSchedule:
    """Piecewise-constant desk count: breakpoints of (start_time, desk_count)."""

    breakpoints: tuple

    def __post_init__(self):
        bps = tuple((float(t), int(c)) for t, c in self.breakpoints)
        if not bps:
            raise ValueError("a staffing schedule needs at least one breakpoint")
        for (t0, _), (t1, _) in zip(bps, bps[1:]):
            if not t1 > t0:
                raise ValueError("breakpoint times must be strictly increasing")
        if any(c < 0 for _, c in bps):
            raise ValueError("desk counts must be nonnegative")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, desks, start=0.0):
        return cls(((start, desks),))

    @classmethod
    def from_counts(cls, counts):
        """From a {window_start: desks} map, merging equal consecutive counts."""
        bps = []
        for t, c in sorted(counts.items()):
            if not bps or bps[-1][1] != c:
                bps.append((t, c))
        return cls(tuple(bps))

    @property
    def start(self):
        return self.breakpoints[0][0]

    @property
    def max_desks(self):
        return max(c for _, c in self.breakpoints)

    def desks_at(self, t):
        i = bisect.bisect_right([b[0] for b in self.breakpoints], t) - 1
        if i < 0:
            raise ValueError(f"staffing is not defined at {t}")
        return self.breakpoints[i][1]

    def check_covers(self, start):
        """Raise unless desks are defined from start on and stay open at the end."""
        if self.start > start:
            raise StaffingCoverageError(
                f"staffing starts at {self.start}, after the first arrival at {start}")
        if self.breakpoints[-1][1] == 0:
            raise StaffingCoverageError("staffing ends with no open desk; the queue cannot drain")

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("start_time", "desk_count"))
            for t, c in self.breakpoints:
                w.writerow((format_timestamp(t), c))

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple((parse_timestamp(r["start_time"]), int(r["desk_count"])) for r in rows))


def congestion_based_staffing(queue_length, current_desks, upper, lower, min_desks, max_desks):
    """Open a desk when the queue reaches upper, close one when it falls to lower."""
    if not lower < upper:
        raise ValueError("lower threshold must be below upper threshold")
    if not min_desks <= current_desks <= max_desks:
        raise ValueError("current desk count outside [min_desks, max_desks]")
    if queue_length >= upper:
        return min(current_desks + 1, max_desks)
    if queue_length <= lower:
        return max(current_desks - 1, min_desks)
    return current_desks


@dataclass(frozen=True)
class CongestionPolicy:
    """Threshold staffing reviewed every review_interval seconds."""

    upper: int
    lower: int
    min_desks: int = 1
    max_desks: int = 20
    initial_desks: int = None
    review_interval: float = 900.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("lower threshold must be below upper threshold")
        if not 1 <= self.min_desks <= self.max_desks:
            raise ValueError("need 1 <= min_desks <= max_desks")
        if self.initial_desks is not None and not self.min_desks <= self.initial_desks <= self.max_desks:
            raise ValueError("initial_desks outside [min_desks, max_desks]")
        if not self.review_interval > 0:
            raise ValueError("review_interval must be positive")

    @property
    def start_desks(self):
        return self.min_desks if self.initial_desks is None else self.initial_desks

    def decide(self, queue_length, current_desks):
        return congestion_based_staffing(queue_length, current_desks, self.upper, self.lower,
                                         self.min_desks, self.max_desks)
