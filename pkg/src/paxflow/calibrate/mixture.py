"""Gaussian-kernel EM clustering of one-dimensional samples.

The number of components is chosen by AIC among fits whose adjacent
components form separate modes; posterior responsibilities are then
thresholded into (possibly overlapping) cluster memberships.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


class DegenerateComponent(Exception):
    """A component's variance collapsed below the floor."""


@dataclass
class EMResult:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    posteriors: np.ndarray
    log_likelihood: float
    aic: float
    iterations: int
    # log-likelihood after every E-step of the selected fit
    trace: list = field(default_factory=list, repr=False)
    # AIC of every K tried; None marks a degenerate or inadmissible fit
    aic_by_k: dict = field(default_factory=dict, repr=False)

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def components(self):
        return list(zip(self.weights, self.means, self.variances))


@dataclass(frozen=True)
class ClusterAssignment:
    point_index: int
    component_index: int
    posterior: float


@njit(cache=True)
def _em_loop(x, weights, means, variances, tolerance, max_iterations, floor):
    n = x.shape[0]
    K = weights.shape[0]
    resp = np.empty((n, K))
    lj = np.empty(K)
    const = np.empty(K)
    inv2v = np.empty(K)
    trace = np.empty(max_iterations + 1)
    status = 0
    it = 0
    while True:
        # E-step
        for k in range(K):
            const[k] = np.log(weights[k]) - 0.5 * (LOG_2PI + np.log(variances[k]))
            inv2v[k] = 0.5 / variances[k]
        ll = 0.0
        for i in range(n):
            top = -np.inf
            for k in range(K):
                d = x[i] - means[k]
                lj[k] = const[k] - d * d * inv2v[k]
                if lj[k] > top:
                    top = lj[k]
            s = 0.0
            for k in range(K):
                lj[k] = np.exp(lj[k] - top)
                s += lj[k]
            ll += top + np.log(s)
            for k in range(K):
                resp[i, k] = lj[k] / s
        trace[it] = ll
        if it > 0 and trace[it] - trace[it - 1] < tolerance:
            break
        if it == max_iterations:
            break
        it += 1
        # M-step
        for k in range(K):
            nk = 0.0
            m = 0.0
            for i in range(n):
                nk += resp[i, k]
                m += resp[i, k] * x[i]
            if nk <= 0.0:
                return weights, means, variances, resp, trace[:it], 1
            m /= nk
            v = 0.0
            for i in range(n):
                d = x[i] - m
                v += resp[i, k] * d * d
            v /= nk
            if v < floor:
                if K > 1:
                    return weights, means, variances, resp, trace[:it], 1
                v = floor
            weights[k] = nk / n
            means[k] = m
            variances[k] = v
    return weights, means, variances, resp, trace[: it + 1], status


def _density_peaks(x, grid_size=512):
    """Locations of local maxima of a binned Gaussian-kernel density, highest first."""
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.array([lo])
    # normal-reference bandwidth
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(np.std(x), iqr / 1.34) if iqr > 0 else np.std(x)
    bw = 0.9 * spread * x.size ** -0.2
    counts, edges = np.histogram(x, bins=grid_size, range=(lo, hi))
    centers = 0.5 * (edges[1:] + edges[:-1])
    step = edges[1] - edges[0]
    half = int(np.ceil(4 * bw / step))
    kernel = np.exp(-0.5 * (np.arange(-half, half + 1) * step / bw) ** 2)
    dens = np.convolve(counts, kernel, mode="same")
    inner = (dens[1:-1] > dens[:-2]) & (dens[1:-1] >= dens[2:])
    idx = np.nonzero(inner)[0] + 1
    return centers[idx[np.argsort(-dens[idx], kind="stable")]]


def _seed_means(x, K, how):
    q = np.quantile(x, (np.arange(K) + 0.5) / K)
    if how == "quantile":
        return q
    # start at the K highest density peaks; quantiles fill in if there are fewer
    peaks = list(_density_peaks(x)[:K])
    for v in q:
        if len(peaks) == K:
            break
        peaks.append(v)
    return np.sort(np.array(peaks, dtype=float))


def _run_em(x, K, tolerance, max_iterations, init="quantile"):
    means = _seed_means(x, K, init)
    variances = np.full(K, max(np.var(x) / K**2, VARIANCE_FLOOR))
    weights = np.full(K, 1.0 / K)
    weights, means, variances, resp, trace, status = _em_loop(
        x, weights, means, variances, tolerance, max_iterations, VARIANCE_FLOOR
    )
    if status:
        raise DegenerateComponent(K)
    # EM never decreases the likelihood; allow for rounding only
    steps = np.diff(trace)
    assert np.all(steps >= -1e-9 * np.maximum(1.0, np.abs(trace[1:]))), "log-likelihood decreased"
    order = np.argsort(means, kind="stable")
    return (weights[order], means[order], variances[order], resp[:, order],
            float(trace[-1]), len(trace) - 1, trace.tolist())


def separate_modes(weights, means, variances, grid_size=512):
    """True when every pair of neighbouring components has a density dip.

    Components must be sorted by mean. A pair whose two-component mixture
    is unimodal describes one mode split in two and is rejected.
    """
    sd = np.sqrt(variances)
    for k in range(len(means) - 1):
        lo = means[k] - 3 * sd[k]
        hi = means[k + 1] + 3 * sd[k + 1]
        g = np.linspace(lo, hi, grid_size)
        dens = np.zeros_like(g)
        for j in (k, k + 1):
            dens += weights[j] * np.exp(-0.5 * (g - means[j]) ** 2 / variances[j]) / sd[j]
        interior = dens[1:-1]
        peaks = (interior > dens[:-2]) & (interior >= dens[2:])
        if np.count_nonzero(peaks) < 2:
            return False
    return True


def em_cluster(points, max_components=8, tolerance=1e-6, max_iterations=500):
    """Fit Gaussian mixtures with 1..max_components components by EM.

    The returned fit is the admissible one with the lowest AIC
    (2k - 2 logL, k = 3K - 1). A fit is admissible when no component
    collapsed below the variance floor and neighbouring components are
    distinct modes. A collapsing component drops the fit back to K - 1.
    Each K > 1 is started from data quantiles and from the highest peaks
    of a smoothed histogram.
    """
    x = np.asarray(points, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("em_cluster needs at least 2 points")
    if max_components < 1:
        raise ValueError("max_components must be >= 1")

    best = None
    aic_by_k = {}
    for K in range(1, min(max_components, x.size) + 1):
        # two starts per K; keep the likeliest admissible one
        fit = None
        for init in ("quantile", "peaks") if K > 1 else ("quantile",):
            try:
                cand = _run_em(x, K, tolerance, max_iterations, init)
            except DegenerateComponent:
                log.debug("K=%d collapsed from %s start", K, init)
                continue
            if K > 1 and not separate_modes(cand[0], cand[1], cand[2]):
                continue
            if fit is None or cand[4] > fit[4]:
                fit = cand
        if fit is None:
            aic_by_k[K] = None
            continue
        w, mu, var, resp, ll, it, trace = fit
        aic = 2 * (3 * K - 1) - 2 * ll
        aic_by_k[K] = aic
        if best is None or aic < best.aic:
            best = EMResult(w, mu, var, resp, ll, aic, it, trace)

    best.aic_by_k = aic_by_k
    return best


def assign_clusters(posteriors, threshold=0.05):
    """Every (point, component) pair with posterior above the threshold.

    A point's most probable component is always kept, so no point is
    left without a cluster.
    """
    P = np.asarray(posteriors, dtype=float)
    if P.ndim != 2:
        raise ValueError("posteriors must be a points x components matrix")
    keep = P > threshold
    keep[np.arange(P.shape[0]), P.argmax(axis=1)] = True
    rows, cols = np.nonzero(keep)
    return [ClusterAssignment(int(i), int(k), float(P[i, k])) for i, k in zip(rows, cols)]


def cluster_members(assignments, n_components):
    """Point indices per component, from a list of assignments."""
    members = [[] for _ in range(n_components)]
    for a in assignments:
        members[a.component_index].append(a.point_index)
    return [np.asarray(m, dtype=int) for m in members]
