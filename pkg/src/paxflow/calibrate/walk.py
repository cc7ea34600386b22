"""Walk-speed mixture model: calibration from traced walks and sampling."""

from dataclasses import dataclass, field
import logging

import numpy as np

from . import families
from .mixture import assign_clusters, cluster_members, em_cluster

log = logging.getLogger(__name__)

MAX_REDRAWS = 100


class ConfigurationError(ValueError):
    pass


class UnknownGate(KeyError):
    pass


class ModelQualityError(RuntimeError):
    """The model keeps producing nonpositive speeds."""


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in families.FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.weight >= 0:
            raise ValueError("component weight must be nonnegative")


@dataclass
class WalkSpeedModel:
    """Mixture of walk speeds (m/s) plus gate-to-immigration distances (m)."""

    components: list
    gate_distances: dict
    fit_reports: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        self.components = [
            c if isinstance(c, MixtureComponent) else MixtureComponent(*c) for c in self.components
        ]
        if not self.components:
            raise ValueError("a walk-speed model needs at least one component")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total}, not 1")
        for gate, d in self.gate_distances.items():
            if not d > 0:
                raise ValueError(f"distance for gate {gate!r} must be positive")

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    def distance(self, gate):
        try:
            return self.gate_distances[gate]
        except KeyError:
            raise UnknownGate(gate) from None

    def sample_speeds(self, n, rng):
        """n positive speeds; nonpositive draws are redrawn (component and speed)."""
        out = np.empty(n)
        todo = np.arange(n)
        w = self.weights
        for _ in range(MAX_REDRAWS + 1):
            comp = rng.choice(len(w), size=todo.size, p=w)
            draw = np.empty(todo.size)
            for k, c in enumerate(self.components):
                sel = comp == k
                if sel.any():
                    draw[sel] = families.sample(c.family, c.params, int(sel.sum()), rng)
            good = draw > 0
            out[todo[good]] = draw[good]
            todo = todo[~good]
            if todo.size == 0:
                return out
        raise ModelQualityError(f"{MAX_REDRAWS} consecutive nonpositive speed draws")


def walk_times_to_speeds(observations, distances):
    """Speeds distance(gate) / walk_time; returns (speeds, number dropped).

    Observations whose gate has no distance entry are dropped.
    """
    if not distances:
        raise ConfigurationError("gate distance map is empty")
    speeds = []
    dropped = 0
    for ob in observations:
        d = distances.get(ob.gate)
        if d is None:
            dropped += 1
            continue
        if not d > 0:
            raise ConfigurationError(f"distance for gate {ob.gate!r} must be positive")
        speeds.append(d / ob.walk_time)
    if dropped:
        log.warning("%d walk observations have no gate distance", dropped)
    return np.asarray(speeds, dtype=float), dropped


def build_walk_speed_model(speeds, distances, max_components=8, threshold=0.05):
    """Cluster speeds with EM, fit a family per cluster, assemble the mixture.

    Each cluster gets the family with the lowest AIC. Mixture weights are
    the EM mixing coefficients of the clusters that could be fitted,
    renormalized to sum to one.
    """
    x = np.asarray(speeds, dtype=float).ravel()
    if x.size < 10:
        raise ValueError(f"need at least 10 speeds, got {x.size}")

    em = em_cluster(x, max_components=max_components)
    members = cluster_members(assign_clusters(em.posteriors, threshold), em.n_components)

    comps, reports = [], []
    for k, idx in enumerate(members):
        rep = families.FitReport(k, weight=float(em.weights[k]), n_points=int(idx.size))
        reports.append(rep)
        if idx.size < 3:
            log.info("cluster %d has %d points, skipped", k, idx.size)
            continue
        rep.per_family = families.fit_families(x[idx])
        if not rep.per_family:
            continue
        rep.selected = families.select_family(rep.per_family)
        comps.append((em.weights[k], rep.selected, rep.per_family[rep.selected][0]))

    if not comps:
        raise families.NoFeasibleFamily("no cluster could be fitted")
    total = sum(w for w, _, _ in comps)
    model = WalkSpeedModel(
        [MixtureComponent(float(w / total), fam, tuple(p)) for w, fam, p in comps],
        dict(distances),
    )
    model.fit_reports = reports
    return model


def sample_walk_times(model, gate, n, rng):
    """n walk durations (s) from the given gate to immigration."""
    return model.distance(gate) / model.sample_speeds(n, rng)


def sample_walk_time(model, gate, rng):
    return float(sample_walk_times(model, gate, 1, rng)[0])
