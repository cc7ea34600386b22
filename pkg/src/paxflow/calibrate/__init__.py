"""Calibration of walk speeds (arrivals) and desk service rates (departures)."""

import json

from .families import (FAMILIES, FitReport, InfeasibleFit, NoFeasibleFamily, fit_component,
                       fit_families, select_family)
from .mixture import ClusterAssignment, EMResult, assign_clusters, em_cluster
from .service import (InsufficientCongestionData, ServiceRateModel, estimate_desk_service_rate,
                      service_rate_at)
from .walk import (ConfigurationError, MixtureComponent, ModelQualityError, UnknownGate,
                   WalkSpeedModel, build_walk_speed_model, sample_walk_time, sample_walk_times,
                   walk_times_to_speeds)


def models_to_dict(walk_model, service_model):
    return {
        "components": [
            {"weight": c.weight, "family": c.family, "p1": c.params[0], "p2": c.params[1]}
            for c in walk_model.components
        ],
        "gate_distances": dict(sorted(walk_model.gate_distances.items())),
        "per_desk_rates": service_model.per_desk_rates.tolist(),
        "bin_width": service_model.bin_width,
    }


def models_from_dict(d):
    walk = WalkSpeedModel(
        [MixtureComponent(c["weight"], c["family"], (c["p1"], c["p2"])) for c in d["components"]],
        {g: float(v) for g, v in d["gate_distances"].items()},
    )
    service = ServiceRateModel(d["per_desk_rates"], d.get("bin_width", 900.0))
    return walk, service


def save_models(path, walk_model, service_model):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(models_to_dict(walk_model, service_model), fh, indent=2)
        fh.write("\n")


def load_models(path):
    with open(path, encoding="utf-8") as fh:
        return models_from_dict(json.load(fh))
