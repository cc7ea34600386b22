"""numba port of core.run_python. Keep the two in lockstep."""

import math

import numpy as np
from numba import njit

FLIGHT_ARRIVAL = 0
QUEUE_ARRIVAL = 1
SERVICE_COMPLETION = 2
STAFFING_CHANGE = 3
REVIEW = -1


@njit(cache=True, inline="always")
def _less(ht, hs, i, j):
    return ht[i] < ht[j] or (ht[i] == ht[j] and hs[i] < hs[j])


@njit(cache=True)
def _swap(ht, hs, hk, hp, i, j):
    ht[i], ht[j] = ht[j], ht[i]
    hs[i], hs[j] = hs[j], hs[i]
    hk[i], hk[j] = hk[j], hk[i]
    hp[i], hp[j] = hp[j], hp[i]


@njit(cache=True)
def _push(ht, hs, hk, hp, size, seq, t, kind, payload):
    i = size
    ht[i] = t
    hs[i] = seq
    hk[i] = kind
    hp[i] = payload
    while i > 0:
        parent = (i - 1) >> 1
        if _less(ht, hs, i, parent):
            _swap(ht, hs, hk, hp, i, parent)
            i = parent
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(ht, hs, hk, hp, size):
    size -= 1
    _swap(ht, hs, hk, hp, 0, size)
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and _less(ht, hs, right, left):
            child = right
        if _less(ht, hs, child, i):
            _swap(ht, hs, hk, hp, i, child)
            i = child
        else:
            break
    return size


@njit(cache=True)
def _window_start(t, width, offset):
    return math.floor((t + offset) / width) * width - offset


@njit(cache=True)
def run(group_times, offsets, arrival_times, durations, st_times, st_counts, policy,
        review_interval, max_desks, cap, bin_width, utc_offset):
    n = arrival_times.shape[0]
    n_groups = group_times.shape[0]
    use_policy = policy[0] == 1

    service_start = np.full(n, np.nan)
    departure = np.full(n, np.nan)
    desk_of = np.full(n, -1, dtype=np.int64)
    rank = np.full(n, -1, dtype=np.int64)

    cap_heap = n + st_times.shape[0] + max_desks + 8
    ht = np.empty(cap_heap)
    hs = np.empty(cap_heap, dtype=np.int64)
    hk = np.empty(cap_heap, dtype=np.int64)
    hp = np.empty(cap_heap, dtype=np.int64)
    size = 0
    seq = 0

    wq = np.empty(max(n, 1), dtype=np.int64)
    wt = np.empty(max(n, 1))
    head = 0
    tail = 0
    busy = np.full(max_desks, -1, dtype=np.int64)
    n_busy = 0
    n_arrived = 0
    used = 0
    active = policy[5] if use_policy else 0

    nb_cap = 64
    bins = np.empty(nb_cap)
    bq = np.empty(nb_cap, dtype=np.int64)
    bb = np.empty(nb_cap, dtype=np.int64)
    nbins = 0

    if not use_policy:
        for i in range(st_times.shape[0]):
            size = _push(ht, hs, hk, hp, size, seq, st_times[i], STAFFING_CHANGE, st_counts[i])
            seq += 1
    if n_groups > 0:
        size = _push(ht, hs, hk, hp, size, seq, group_times[0], FLIGHT_ARRIVAL, 0)
        seq += 1
        if use_policy:
            size = _push(ht, hs, hk, hp, size, seq, group_times[0] + review_interval,
                         STAFFING_CHANGE, REVIEW)
            seq += 1

    started = False
    next_b = 0.0
    last_t = np.nan
    t_start = np.nan
    q_area = 0.0
    s_area = 0.0
    unstable = False
    max_queue = 0
    events = 0

    while size > 0:
        t = ht[0]
        kind = hk[0]
        payload = hp[0]
        size = _pop(ht, hs, hk, hp, size)
        if not started:
            started = True
            next_b = _window_start(t, bin_width, utc_offset) + bin_width
            last_t = t
            t_start = t
        while t >= next_b:
            if nbins == nb_cap:
                nb_cap *= 2
                bins2 = np.empty(nb_cap)
                bq2 = np.empty(nb_cap, dtype=np.int64)
                bb2 = np.empty(nb_cap, dtype=np.int64)
                bins2[:nbins] = bins[:nbins]
                bq2[:nbins] = bq[:nbins]
                bb2[:nbins] = bb[:nbins]
                bins, bq, bb = bins2, bq2, bb2
            bins[nbins] = next_b - bin_width
            bq[nbins] = tail - head
            bb[nbins] = n_busy
            nbins += 1
            next_b += bin_width
        q_area += (tail - head) * (t - last_t)
        s_area += (tail - head + n_busy) * (t - last_t)
        last_t = t

        if kind == QUEUE_ARRIVAL:
            pid = payload
            rank[pid] = n_arrived
            n_arrived += 1
            d = -1
            if tail == head:
                for k in range(active):
                    if busy[k] < 0:
                        d = k
                        break
            if d >= 0:
                service_start[pid] = t
                desk_of[pid] = d
                busy[d] = pid
                n_busy += 1
                size = _push(ht, hs, hk, hp, size, seq, t + durations[used], SERVICE_COMPLETION, d)
                seq += 1
                used += 1
            else:
                wq[tail] = pid
                wt[tail] = t
                tail += 1
            if tail - head > max_queue:
                max_queue = tail - head
            if tail - head > cap:
                unstable = True
        elif kind == SERVICE_COMPLETION:
            d = payload
            departure[busy[d]] = t
            busy[d] = -1
            n_busy -= 1
            if d < active and tail > head:
                pid = wq[head]
                head += 1
                service_start[pid] = t
                desk_of[pid] = d
                busy[d] = pid
                n_busy += 1
                size = _push(ht, hs, hk, hp, size, seq, t + durations[used], SERVICE_COMPLETION, d)
                seq += 1
                used += 1
        elif kind == FLIGHT_ARRIVAL:
            g = payload
            for pid in range(offsets[g], offsets[g + 1]):
                size = _push(ht, hs, hk, hp, size, seq, arrival_times[pid], QUEUE_ARRIVAL, pid)
                seq += 1
            if g + 1 < n_groups:
                size = _push(ht, hs, hk, hp, size, seq, group_times[g + 1], FLIGHT_ARRIVAL, g + 1)
                seq += 1
        else:
            if payload == REVIEW:
                qlen = tail - head
                new = active
                if qlen >= policy[1]:
                    new = min(active + 1, policy[4])
                elif qlen <= policy[2]:
                    new = max(active - 1, policy[3])
                active = new
            else:
                active = payload
            while tail > head:
                d = -1
                for k in range(active):
                    if busy[k] < 0:
                        d = k
                        break
                if d < 0:
                    break
                pid = wq[head]
                head += 1
                service_start[pid] = t
                desk_of[pid] = d
                busy[d] = pid
                n_busy += 1
                size = _push(ht, hs, hk, hp, size, seq, t + durations[used], SERVICE_COMPLETION, d)
                seq += 1
                used += 1
            if payload == REVIEW and (size > 0 or tail > head or n_busy > 0):
                size = _push(ht, hs, hk, hp, size, seq, t + review_interval, STAFFING_CHANGE, REVIEW)
                seq += 1
        events += 1
        if unstable:
            break

    if started:
        if nbins == nb_cap:
            nb_cap += 1
            bins2 = np.empty(nb_cap)
            bq2 = np.empty(nb_cap, dtype=np.int64)
            bb2 = np.empty(nb_cap, dtype=np.int64)
            bins2[:nbins] = bins[:nbins]
            bq2[:nbins] = bq[:nbins]
            bb2[:nbins] = bb[:nbins]
            bins, bq, bb = bins2, bq2, bb2
        bins[nbins] = next_b - bin_width
        bq[nbins] = tail - head
        bb[nbins] = n_busy
        nbins += 1

    return (service_start, departure, desk_of, rank, bins, bq, bb, nbins, unstable,
            max_queue, events, q_area, s_area, t_start, last_t)
