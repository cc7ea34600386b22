"""Per-desk service rates estimated from stamps during congested periods."""

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..ingest import local_day, window_start


class InsufficientCongestionData(ValueError):
    pass


@dataclass
class ServiceRateModel:
    """Empirical distribution of passengers served per desk per bin."""

    per_desk_rates: np.ndarray
    bin_width: float = 900.0
    source_windows: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        self.per_desk_rates = np.asarray(self.per_desk_rates, dtype=float).ravel()
        if self.per_desk_rates.size == 0 or np.any(self.per_desk_rates <= 0):
            raise ValueError("service rates must be positive and non-empty")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")

    def draw(self, rng, size=None):
        return rng.choice(self.per_desk_rates, size=size)

    def mean(self):
        return float(self.per_desk_rates.mean())

    def service_durations(self, n, rng):
        """n exponential service times (s), each with its own per-desk rate draw."""
        rates = self.draw(rng, n)
        return rng.standard_exponential(n) * (self.bin_width / rates)


def estimate_desk_service_rate(stamps, open_desks, window_waits=None, min_wait=900.0,
                               top_k_days=None, window=900.0, hourly_max=False,
                               utc_offset=0.0, direction="arrival", window_queues=None,
                               queue_per_desk=0.0):
    """Rates = stamps per window / open desks, over congested windows only.

    A window is kept when its mean wait (window_waits, seconds) exceeds
    min_wait. When window_queues is given, the queue left at the window end
    must also reach queue_per_desk times the open desks; a queue that
    drained mid-window leaves desks idle and biases the rate low. With
    top_k_days, only the days with the longest mean wait are used. Pass min_wait=None and top_k_days=None to keep every window.
    With hourly_max the distribution holds one value per hour of day: the
    largest rate seen in that hour.
    """
    counts = Counter(window_start(s.timestamp, window, utc_offset)
                     for s in stamps if direction is None or s.direction == direction)
    windows = sorted(w for w, n in counts.items() if n > 0)
    waits = window_waits or {}
    if (min_wait is not None or top_k_days is not None) and not waits:
        raise InsufficientCongestionData("congestion filter needs window wait estimates")

    if top_k_days is not None:
        per_day = defaultdict(list)
        for w, v in waits.items():
            per_day[local_day(w, utc_offset)].append(v)
        ranked = sorted(per_day, key=lambda d: (-np.mean(per_day[d]), d))
        keep_days = set(ranked[:top_k_days])
        windows = [w for w in windows if local_day(w, utc_offset) in keep_days]
    if min_wait is not None:
        windows = [w for w in windows if waits.get(w, -np.inf) > min_wait]
    if window_queues is not None and queue_per_desk > 0:
        windows = [w for w in windows
                   if window_queues.get(w, 0) >= queue_per_desk * open_desks.get(w, 0)]
    if not windows:
        raise InsufficientCongestionData("no window passes the congestion filter")

    rates, used = [], []
    for w in windows:
        c = open_desks.get(w, 0)
        if c <= 0:
            raise ValueError(f"no open desks recorded for window starting {w}")
        rates.append(counts[w] / c)
        used.append((local_day(w, utc_offset).isoformat(), w))

    if hourly_max:
        best = {}
        for (day, w), r in zip(used, rates):
            hour = int(((w + utc_offset) % 86400) // 3600)
            if hour not in best or r > best[hour][0]:
                best[hour] = (r, (day, w))
        rates = [best[h][0] for h in sorted(best)]
        used = [best[h][1] for h in sorted(best)]
    return ServiceRateModel(np.array(rates), window, used)


def service_rate_at(model, staffing, t, rng):
    """System service rate at t: open desks times one per-desk rate draw."""
    return staffing.desks_at(t) * float(model.draw(rng))
