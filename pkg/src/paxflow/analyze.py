"""Binned queue statistics, flight delays, saturation and validation metrics.

Bins are left-closed, right-open and aligned to local midnight
(``utc_offset`` seconds east of UTC). Queue lengths are end-of-bin
snapshots.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .ingest import window_start


@dataclass(frozen=True)
class BinnedQueueStats:
    bin_start: float
    bin_width: float
    mean_wait: float        # seconds; nan when nobody left during the bin
    throughput: int
    queue_length_end: int
    demand: int


@dataclass
class ThroughputDemandCurve:
    points: list            # (demand, mean throughput), sorted by demand
    saturation_demand: int = None

    @property
    def demand(self):
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def throughput(self):
        return np.array([p[1] for p in self.points], dtype=float)


@dataclass
class DelaySummary:
    per_bin_mean_delay: dict    # bin start -> minutes
    overall_mean_delay: float   # minutes
    flight_count: int


@dataclass
class ValidationReport:
    mae_wait: float
    rmse_wait: float
    mae_queue: float
    per_bin_residuals: pd.DataFrame = field(repr=False)

    def as_dict(self):
        return {"mae_wait": self.mae_wait, "rmse_wait": self.rmse_wait,
                "mae_queue": self.mae_queue, "bins": len(self.per_bin_residuals)}


def _trace_arrays(traces):
    if isinstance(traces, pd.DataFrame):
        qa = traces["queue_arrival"].to_numpy(float)
        ss = traces["service_start"].to_numpy(float)
        dep = traces["departure"].to_numpy(float)
    else:
        qa = np.array([t.queue_arrival for t in traces], dtype=float)
        ss = np.array([t.service_start for t in traces], dtype=float)
        dep = np.array([t.departure for t in traces], dtype=float)
    # never started / never finished: treat as still waiting / in service
    ss = np.where(np.isnan(ss), np.inf, ss)
    dep = np.where(np.isnan(dep), np.inf, dep)
    # fixed order, so float sums do not depend on how the traces were listed
    o = np.lexsort((ss, qa, dep))
    return qa[o], ss[o], dep[o]


def _bin_grid(lo, hi, width, utc_offset):
    first = window_start(lo, width, utc_offset)
    last = window_start(hi, width, utc_offset)
    return first + width * np.arange(int(round((last - first) / width)) + 1)


def _counts_before(sorted_vals, edges):
    return np.searchsorted(sorted_vals, edges, side="left")


def bin_statistics(traces, bin_width=900.0, utc_offset=0.0, include_in_service=True):
    """Per-bin throughput, mean wait, end-of-bin queue length and demand.

    Throughput and mean wait refer to passengers whose service ended in the
    bin. Demand is the queue plus passengers in service at the bin end
    (queue only when include_in_service is False).
    """
    qa, ss, dep = _trace_arrays(traces)
    if qa.size == 0:
        return []
    finite_dep = dep[np.isfinite(dep)]
    hi = max(qa.max(), finite_dep.max()) if finite_dep.size else qa.max()
    starts = _bin_grid(qa.min(), hi, bin_width, utc_offset)
    ends = starts + bin_width

    n_arr = _counts_before(np.sort(qa), ends)
    n_ss = _counts_before(np.sort(ss), ends)
    n_dep = _counts_before(np.sort(dep), ends)
    queue = n_arr - n_ss
    in_service = n_ss - n_dep

    served = np.isfinite(dep)
    idx = np.floor((dep[served] - starts[0]) / bin_width).astype(np.int64)
    throughput = np.bincount(idx, minlength=starts.size)[: starts.size]
    wait_sum = np.bincount(idx, weights=(ss - qa)[served], minlength=starts.size)[: starts.size]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_wait = np.where(throughput > 0, wait_sum / throughput, np.nan)

    demand = queue + in_service if include_in_service else queue
    return [BinnedQueueStats(float(s), float(bin_width), float(w), int(th), int(q), int(d))
            for s, w, th, q, d in zip(starts, mean_wait, throughput, queue, demand)]


def stats_frame(stats):
    return pd.DataFrame({
        "bin_start": [s.bin_start for s in stats],
        "queue_length": [s.queue_length_end for s in stats],
        "throughput": [s.throughput for s in stats],
        "mean_wait": [s.mean_wait for s in stats],
        "demand": [s.demand for s in stats],
    }, columns=["bin_start", "queue_length", "throughput", "mean_wait", "demand"])


def stats_from_frame(df, bin_width=900.0):
    return [BinnedQueueStats(float(r.bin_start), bin_width, float(r.mean_wait), int(r.throughput),
                             int(r.queue_length), int(r.demand)) for r in df.itertuples()]


def stats_from_dwell(entry, exit_, bin_width=900.0, utc_offset=0.0):
    """Observed per-bin statistics from immigration-zone dwell spans.

    Each device is treated as a passenger that queued from its first to
    its last sighting; the dwell is its wait.
    """
    entry = np.asarray(entry, dtype=float)
    exit_ = np.asarray(exit_, dtype=float)
    if entry.size == 0:
        return []
    starts = _bin_grid(entry.min(), exit_.max(), bin_width, utc_offset)
    ends = starts + bin_width
    queue = _counts_before(np.sort(entry), ends) - _counts_before(np.sort(exit_), ends)
    idx = np.floor((exit_ - starts[0]) / bin_width).astype(np.int64)
    throughput = np.bincount(idx, minlength=starts.size)[: starts.size]
    wsum = np.bincount(idx, weights=exit_ - entry, minlength=starts.size)[: starts.size]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_wait = np.where(throughput > 0, wsum / throughput, np.nan)
    return [BinnedQueueStats(float(s), float(bin_width), float(w), int(th), int(q), int(q))
            for s, w, th, q in zip(starts, mean_wait, throughput, queue)]


def queue_at_departures(traces, bin_width=900.0, utc_offset=0.0):
    """Mean queue length seen by departing passengers, per bin of departure.

    Alternative to the end-of-bin snapshot: the queue is sampled each time
    a passenger leaves a desk. Returns {bin_start: mean queue length}.
    """
    qa, ss, dep = _trace_arrays(traces)
    served = np.isfinite(dep)
    d = np.sort(dep[served])
    if d.size == 0:
        return {}
    # waiting at instant t (after events at t): arrived at or before t, not started by t
    q = np.searchsorted(np.sort(qa), d, side="right") - np.searchsorted(np.sort(ss), d, side="right")
    bins = np.array([window_start(t, bin_width, utc_offset) for t in d])
    frame = pd.DataFrame({"bin": bins, "q": q}).groupby("bin")["q"].mean()
    return {float(k): float(v) for k, v in frame.items()}


def flight_delay_summary(flights, bin_width=900.0, utc_offset=0.0):
    """Mean arrival delay (actual - scheduled gate time) in minutes, by scheduled bin."""
    if not flights:
        raise ValueError("no flights")
    delays = np.array([f.actual_time - f.scheduled_time for f in flights]) / 60.0
    bins = np.array([window_start(f.scheduled_time, bin_width, utc_offset) for f in flights])
    per_bin = pd.Series(delays).groupby(bins).mean()
    return DelaySummary({float(k): float(v) for k, v in per_bin.items()},
                        float(delays.mean()), len(flights))


def throughput_vs_demand(stats):
    """Mean throughput at each distinct demand level, over all supplied bins."""
    if not stats:
        raise ValueError("no binned statistics")
    s = pd.Series([b.throughput for b in stats], dtype=float).groupby(
        [b.demand for b in stats]).mean()
    return ThroughputDemandCurve([(int(d), float(th)) for d, th in s.sort_index().items()])


def _ols_slope(x, y):
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def detect_saturation(curve, window=5, slope_epsilon=0.05):
    """Demand at which throughput stops growing, or None.

    A continuous two-segment line is fitted by least squares, trying every
    observed demand as the knee with at least ``window`` points on each
    side. The best knee is reported when the least-squares slope of the
    points at and beyond it is below slope_epsilon.
    """
    x, y = curve.demand, curve.throughput
    n = x.size
    if n < 2 * window:
        raise ValueError(f"need at least {2 * window} curve points, got {n}")

    best_k, best_sse = None, np.inf
    for k in range(window - 1, n - window + 1):
        dx = x - x[k]
        A = np.column_stack([np.ones(n), np.minimum(dx, 0.0), np.maximum(dx, 0.0)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ coef
        sse = float(r @ r)
        if best_k is None or sse < best_sse - 1e-12 * max(1.0, best_sse):
            best_k, best_sse = k, sse

    if _ols_slope(x[best_k:], y[best_k:]) < slope_epsilon:
        return int(x[best_k])
    return None


def validate_against_actual(simulated, actual):
    """MAE/RMSE of mean waits and MAE of end-of-bin queue length on common bins."""
    sim = {b.bin_start: b for b in simulated}
    act = {b.bin_start: b for b in actual}
    common = sorted(sim.keys() & act.keys())
    if not common:
        raise ValueError("simulated and actual series share no bins")
    w_res = np.array([sim[k].mean_wait - act[k].mean_wait for k in common])
    q_res = np.array([sim[k].queue_length_end - act[k].queue_length_end for k in common], float)
    ok = np.isfinite(w_res)
    residuals = pd.DataFrame({"bin_start": common, "wait_residual": w_res, "queue_residual": q_res})
    mae_w = float(np.abs(w_res[ok]).mean()) if ok.any() else float("nan")
    rmse_w = float(np.sqrt((w_res[ok] ** 2).mean())) if ok.any() else float("nan")
    return ValidationReport(mae_w, rmse_w, float(np.abs(q_res).mean()), residuals)
