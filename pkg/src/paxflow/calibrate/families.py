"""Maximum-likelihood fits of the three walk-speed families and AIC selection.

Parameters are stored as real pairs:

    logistic   (loc, scale)
    lognormal  (mu, sigma) of log(speed)
    gamma      (shape, scale)
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, special

FAMILIES = ("logistic", "lognormal", "gamma")
N_PARAMS = 2


class InfeasibleFit(ValueError):
    """The family cannot describe this sample (e.g. nonpositive data)."""


class NoFeasibleFamily(ValueError):
    pass


@dataclass
class FitReport:
    component_index: int
    per_family: dict = field(default_factory=dict)
    selected: str = None
    weight: float = float("nan")
    n_points: int = 0


def logpdf(family, params, x):
    x = np.asarray(x, dtype=float)
    a, b = params
    if family == "logistic":
        z = (x - a) / b
        return -z - np.log(b) - 2.0 * np.logaddexp(0.0, -z)
    if family == "lognormal":
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(x)
            out = -lx - np.log(b) - 0.5 * np.log(2 * np.pi) - 0.5 * ((lx - a) / b) ** 2
        return np.where(x > 0, out, -np.inf)
    if family == "gamma":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (a - 1) * np.log(x) - x / b - special.gammaln(a) - a * np.log(b)
        return np.where(x > 0, out, -np.inf)
    raise ValueError(f"unknown family {family!r}")


def _fit_logistic(x):
    # moment start: var = (pi * s)^2 / 3
    start = np.array([np.median(x), math.log(np.std(x) * math.sqrt(3) / math.pi)])

    def nll(theta):
        loc, log_s = theta
        z = (x - loc) / math.exp(log_s)
        return np.sum(z + log_s + 2.0 * np.logaddexp(0.0, -z))

    def grad(theta):
        loc, log_s = theta
        s = math.exp(log_s)
        z = (x - loc) / s
        t = np.tanh(z / 2.0)  # 1 - 2 / (1 + e^z)
        return np.array([-np.sum(t) / s, np.sum(1.0 - z * t)])

    res = optimize.minimize(nll, start, jac=grad, method="BFGS", options={"gtol": 1e-10})
    loc, log_s = res.x
    return (float(loc), float(math.exp(log_s)))


def _fit_gamma(x):
    s = math.log(np.mean(x)) - np.mean(np.log(x))
    if s <= 0:
        raise InfeasibleFit("gamma: sample has no spread")
    # Minka's starting point, then Newton on log k - digamma(k) = s
    k = (3 - s + math.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    for _ in range(100):
        f = math.log(k) - special.digamma(k) - s
        fp = 1.0 / k - special.polygamma(1, k)
        step = f / fp
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2
        if abs(k_new - k) < 1e-12 * k:
            k = k_new
            break
        k = k_new
    return (float(k), float(np.mean(x) / k))


def fit_component(points, family):
    """Maximum-likelihood fit of one family; returns (params, aic)."""
    x = np.asarray(points, dtype=float).ravel()
    if x.size < 3:
        raise ValueError("need at least 3 points to fit a component")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    if np.ptp(x) == 0:
        raise InfeasibleFit(f"{family}: constant sample")

    if family == "logistic":
        params = _fit_logistic(x)
    elif family in ("lognormal", "gamma"):
        if np.any(x <= 0):
            raise InfeasibleFit(f"{family}: sample has nonpositive values")
        if family == "lognormal":
            lx = np.log(x)
            params = (float(lx.mean()), float(lx.std()))
        else:
            params = _fit_gamma(x)
    else:
        raise ValueError(f"unknown family {family!r}")

    loglik = float(np.sum(logpdf(family, params, x)))
    return params, 2 * N_PARAMS - 2 * loglik


def fit_families(points, families=FAMILIES):
    """Fit every family to a cluster; infeasible families are left out."""
    out = {}
    for fam in families:
        try:
            out[fam] = fit_component(points, fam)
        except InfeasibleFit:
            continue
    return out


def select_family(reports):
    """Family with the smallest AIC; ties go to logistic, lognormal, gamma in that order."""
    feasible = [
        (aic, FAMILIES.index(fam), fam)
        for fam, (_, aic) in reports.items()
        if aic is not None and np.isfinite(aic)
    ]
    if not feasible:
        raise NoFeasibleFamily("no feasible family to select from")
    return min(feasible)[2]


def sample(family, params, size, rng):
    a, b = params
    if family == "logistic":
        return rng.logistic(a, b, size)
    if family == "lognormal":
        return rng.lognormal(a, b, size)
    if family == "gamma":
        return rng.gamma(a, b, size)
    raise ValueError(f"unknown family {family!r}")
