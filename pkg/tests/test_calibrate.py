import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from paxflow import calibrate
from paxflow.calibrate import (FAMILIES, MixtureComponent, ServiceRateModel, WalkSpeedModel,
                               assign_clusters, em_cluster, fit_component, select_family)
from paxflow.calibrate.families import logpdf, sample
from paxflow.engine import StaffingSchedule
from paxflow.ingest import StampRecord, WalkObservation
from paxflow.synthetic import day_start

T0 = day_start("2012-08-12")


# -- walk times to speeds -----------------------------------------------------------

def _walk(gate, seconds):
    return WalkObservation("d", gate, 1000.0, 1000.0 + seconds)


def test_speed_unit_case():
    speeds, dropped = calibrate.walk_times_to_speeds([_walk("53", 300)], {"53": 300.0})
    assert speeds.tolist() == [1.0] and dropped == 0


def test_speed_arithmetic():
    speeds, _ = calibrate.walk_times_to_speeds([_walk("53", 200)], {"53": 300.0})
    assert speeds[0] == 1.5


def test_speeds_two_gates_and_missing_distance():
    obs = [_walk("8", 100), _walk("8", 250), _walk("53", 400), _walk("53", 320), _walk("53", 500),
           _walk("99", 100)]
    speeds, dropped = calibrate.walk_times_to_speeds(obs, {"8": 200.0, "53": 400.0})
    assert speeds.tolist() == [2.0, 0.8, 1.0, 1.25, 0.8]
    assert dropped == 1


def test_empty_distance_map():
    with pytest.raises(calibrate.ConfigurationError):
        calibrate.walk_times_to_speeds([_walk("8", 100)], {})


# -- EM ------------------------------------------------------------------------

def test_em_identical_points():
    em = em_cluster(np.full(50, 2.5))
    assert em.n_components == 1
    assert em.means[0] == 2.5 and em.variances[0] == calibrate.mixture.VARIANCE_FLOOR


def test_em_needs_two_points():
    with pytest.raises(ValueError):
        em_cluster([1.0])


def test_em_two_components():
    rng = np.random.default_rng(3)
    z = rng.random(2000) < 0.3
    x = np.where(z, rng.normal(1.0, 0.5, 2000), rng.normal(5.0, 0.5, 2000))
    em = em_cluster(x)
    assert em.n_components == 2
    assert em.weights == pytest.approx([0.3, 0.7], abs=0.05)
    assert em.means == pytest.approx([1.0, 5.0], abs=0.1)
    assert np.allclose(em.posteriors.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(np.diff(em.trace) >= -1e-9 * np.abs(em.trace[1:]))


def gate53_like(seed, n=3000):
    # cluster means and coefficients of the gate-53 table; the fourth
    # coefficient is what the three reported ones leave over
    means = np.array([1.26, 3.16, 0.638, 6.0])
    w = np.array([0.0999, 0.7558, 0.0627, 1 - 0.0999 - 0.7558 - 0.0627])
    sd = np.array([0.12, 0.35, 0.06, 0.5])
    rng = np.random.default_rng(seed)
    k = rng.choice(4, n, p=w)
    return rng.normal(means[k], sd[k])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_em_gate53_like(seed):
    em = em_cluster(gate53_like(seed))
    assert 4 <= em.n_components <= 6
    # sorted by mean: 0.638, 1.26, 3.16, 6
    by_mean = dict(zip(np.round(em.means, 1), em.weights))
    for mean, coef in ((0.6, 0.0627), (1.3, 0.0999), (3.2, 0.7558)):
        near = [w for m, w in by_mean.items() if abs(m - mean) < 0.15]
        assert near and near[0] == pytest.approx(coef, abs=0.03)


def test_em_unimodal():
    rng = np.random.default_rng(5)
    assert em_cluster(rng.normal(1.2, 0.2, 1000)).n_components == 1


# -- assignment ------------------------------------------------------------------

def test_assign_threshold_cases():
    a = assign_clusters(np.array([[0.97, 0.03]]))
    assert [(x.point_index, x.component_index) for x in a] == [(0, 0)]
    a = assign_clusters(np.array([[0.5, 0.5]]))
    assert sorted(x.component_index for x in a) == [0, 1]
    a = assign_clusters(np.array([[0.96, 0.04]]))
    assert len(a) == 1


def test_assign_argmax_safeguard():
    a = assign_clusters(np.array([[0.04, 0.03, 0.93]]), threshold=0.95)
    assert [(x.component_index, x.posterior) for x in a] == [(2, 0.93)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.floats(0.001, 1.0), min_size=3, max_size=3), min_size=1, max_size=20))
def test_assign_properties(rows):
    P = np.array(rows)
    P /= P.sum(axis=1, keepdims=True)
    a = assign_clusters(P)
    assert {x.point_index for x in a} == set(range(len(rows)))
    for x in a:
        assert x.posterior > 0.05 or x.component_index == P[x.point_index].argmax()


# -- family fits -----------------------------------------------------------------

def test_fit_needs_three_points():
    with pytest.raises(ValueError):
        fit_component([1.0, 2.0], "logistic")


@pytest.mark.parametrize("family", FAMILIES)
def test_fit_constant_data_infeasible(family):
    with pytest.raises(calibrate.InfeasibleFit):
        fit_component([2.0] * 10, family)


def test_nonpositive_points_infeasible_for_positive_families():
    x = [-0.5, 0.5, 1.0, 1.5]
    assert set(calibrate.fit_families(x)) == {"logistic"}


def test_fit_matches_scipy():
    rng = np.random.default_rng(1)
    x = rng.gamma(3.0, 0.4, 3000)
    (k, theta), aic = fit_component(x, "gamma")
    a, _, scale = stats.gamma.fit(x, floc=0)
    assert k == pytest.approx(a, rel=1e-3) and theta == pytest.approx(scale, rel=1e-3)
    assert aic == pytest.approx(4 - 2 * stats.gamma.logpdf(x, a, scale=scale).sum(), rel=1e-6)
    (loc, s), aic = fit_component(x, "logistic")
    loc2, s2 = stats.logistic.fit(x)
    assert loc == pytest.approx(loc2, rel=1e-3) and s == pytest.approx(s2, rel=1e-3)
    (mu, sig), _ = fit_component(x, "lognormal")
    shape, _, scale = stats.lognorm.fit(x, floc=0)
    assert sig == pytest.approx(shape, rel=1e-6) and np.exp(mu) == pytest.approx(scale, rel=1e-6)


@pytest.mark.parametrize("family,params", [("logistic", (1.0, 0.3)), ("lognormal", (0.2, 0.4)),
                                           ("gamma", (4.0, 0.5))])
def test_logpdf_integrates_to_one(family, params):
    lo = -20.0 if family == "logistic" else 0.0
    total, _ = integrate.quad(lambda v: np.exp(logpdf(family, params, v)), lo, 60, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_logistic_sample_prefers_logistic():
    x = np.random.default_rng(7).logistic(0.0, 1.0, 1000)
    reports = calibrate.fit_families(x)
    assert set(reports) == {"logistic"}
    x = x + 20.0  # shift so the positive families can also be tried
    reports = calibrate.fit_families(x)
    aic = {f: r[1] for f, r in reports.items()}
    assert min(aic, key=aic.get) == "logistic"


def test_lognormal_component_like_gate53_row2():
    # sample from a lognormal component and check lognormal < gamma < logistic by AIC
    x = np.random.default_rng(2).lognormal(np.log(3.16), 0.45, 60)
    reports = calibrate.fit_families(x)
    aic = {f: r[1] for f, r in reports.items()}
    assert aic["lognormal"] < aic["gamma"] < aic["logistic"]


# -- family selection ------------------------------------------------------------

def test_select_gate53_row():
    reports = {"logistic": ((0, 1), 161.0323), "lognormal": ((0, 1), 156.8922),
               "gamma": ((1, 1), 158.1537)}
    assert select_family(reports) == "lognormal"


def test_select_single_and_tie():
    assert select_family({"gamma": ((1, 1), 3.0)}) == "gamma"
    assert select_family({"gamma": ((1, 1), 3.0), "logistic": ((0, 1), 3.0)}) == "logistic"
    assert select_family({"gamma": ((1, 1), 3.0), "lognormal": ((0, 1), 3.0)}) == "lognormal"


def test_select_no_feasible():
    with pytest.raises(calibrate.NoFeasibleFamily):
        select_family({})


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.sampled_from(FAMILIES), st.integers(-5, 5).map(float), min_size=1))
def test_select_is_argmin(aics):
    reports = {f: ((0, 1), a) for f, a in aics.items()}
    best = min(aics.values())
    expected = next(f for f in FAMILIES if aics.get(f) == best)
    assert select_family(reports) == expected


# -- walk-speed model ------------------------------------------------------------

def test_build_two_mode_model():
    rng = np.random.default_rng(11)
    z = rng.random(3000) < 0.35
    speeds = np.where(z, rng.lognormal(np.log(0.55), 0.12, 3000),
                      rng.lognormal(np.log(1.25), 0.10, 3000))
    model = calibrate.build_walk_speed_model(speeds, {"53": 300.0})
    assert len(model.components) == 2
    assert model.weights == pytest.approx([0.35, 0.65], abs=0.05)
    assert abs(model.weights.sum() - 1.0) <= 1e-9
    assert [c.family for c in model.components] == [r.selected for r in model.fit_reports]


def test_build_unimodal_model():
    speeds = np.random.default_rng(4).lognormal(0.1, 0.2, 800)
    assert len(calibrate.build_walk_speed_model(speeds, {"53": 300.0}).components) == 1


def test_build_gate53_like_coefficients():
    model = calibrate.build_walk_speed_model(gate53_like(0), {"53": 300.0})
    coefs = {round(r.weight, 2) for r in model.fit_reports}
    for c in (0.0999, 0.7558, 0.0627):
        assert min(abs(c - v) for v in coefs) < 0.02


def test_build_needs_ten_points():
    with pytest.raises(ValueError):
        calibrate.build_walk_speed_model(np.linspace(1, 2, 9), {"53": 300.0})


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        WalkSpeedModel([MixtureComponent(0.5, "gamma", (2.0, 0.5))], {"53": 300.0})


def _point_model(speed=1.0):
    # a logistic with a vanishing scale is a point mass for all practical purposes
    return WalkSpeedModel([MixtureComponent(1.0, "logistic", (speed, 1e-12))], {"53": 300.0})


def test_sample_deterministic_walk():
    rng = np.random.default_rng(0)
    assert calibrate.sample_walk_time(_point_model(), "53", rng) == pytest.approx(300.0)


def test_sample_unknown_gate():
    with pytest.raises(calibrate.UnknownGate):
        calibrate.sample_walk_time(_point_model(), "99", np.random.default_rng(0))


def test_zero_weight_component_never_drawn():
    model = WalkSpeedModel([MixtureComponent(0.0, "logistic", (100.0, 1e-9)),
                            MixtureComponent(1.0, "gamma", (9.0, 0.15))], {"53": 300.0})
    speeds = model.sample_speeds(100_000, np.random.default_rng(1))
    assert speeds.max() < 50.0


def test_nonpositive_draws_redrawn():
    model = WalkSpeedModel([MixtureComponent(1.0, "logistic", (0.2, 0.5))], {"53": 300.0})
    times = calibrate.sample_walk_times(model, "53", 20_000, np.random.default_rng(2))
    assert np.all(times > 0)


def test_hopeless_model_raises():
    model = WalkSpeedModel([MixtureComponent(1.0, "logistic", (-100.0, 0.1))], {"53": 300.0})
    with pytest.raises(calibrate.ModelQualityError):
        calibrate.sample_walk_times(model, "53", 5, np.random.default_rng(0))


def test_walk_time_mean_matches_integral():
    comps = [MixtureComponent(0.3, "lognormal", (np.log(0.6), 0.15)),
             MixtureComponent(0.5, "gamma", (40.0, 1.3 / 40)),
             MixtureComponent(0.2, "logistic", (1.8, 0.08))]
    model = WalkSpeedModel(comps, {"53": 300.0})
    times = calibrate.sample_walk_times(model, "53", 100_000, np.random.default_rng(9))

    # E[d / V] under the mixture, with the logistic truncated to V > 0 as the sampler does
    def expect(c):
        lo = 1e-9
        dens = lambda v: np.exp(logpdf(c.family, c.params, v))
        mass, _ = integrate.quad(dens, lo, 50, limit=400)
        val, _ = integrate.quad(lambda v: 300.0 / v * dens(v), lo, 50, limit=400)
        return val / mass
    analytic = sum(c.weight * expect(c) for c in comps)
    assert times.mean() == pytest.approx(analytic, rel=0.02)


# -- service rates ---------------------------------------------------------------

def test_rate_division():
    stamps = [StampRecord(T0 + 10 * i, f"D{i % 4}") for i in range(60)]
    m = calibrate.estimate_desk_service_rate(stamps, {T0: 4}, {T0: 1200.0})
    assert m.per_desk_rates.tolist() == [15.0]
    assert m.source_windows == [("2012-08-12", T0)]


def test_hourly_max():
    w2 = T0 + 86400
    stamps = [StampRecord(T0 + i, "D") for i in range(10)] + \
        [StampRecord(w2 + i, "D") for i in range(14)]
    m = calibrate.estimate_desk_service_rate(stamps, {T0: 1, w2: 1}, {T0: 1000.0, w2: 1000.0},
                                             hourly_max=True)
    assert m.per_desk_rates.tolist() == [14.0]


def test_congestion_filter_and_top_days():
    stamps = [StampRecord(T0 + 900 * k + i, "D") for k in range(4) for i in range(5 + k)]
    desks = {T0 + 900 * k: 1 for k in range(4)}
    waits = {T0: 100.0, T0 + 900: 2000.0, T0 + 1800: 950.0, T0 + 2700: 10.0}
    m = calibrate.estimate_desk_service_rate(stamps, desks, waits)
    assert sorted(m.per_desk_rates.tolist()) == [6.0, 7.0]
    with pytest.raises(calibrate.InsufficientCongestionData):
        calibrate.estimate_desk_service_rate(stamps, desks, {T0: 10.0})
    m = calibrate.estimate_desk_service_rate(stamps, desks, waits, min_wait=None, top_k_days=1)
    assert m.per_desk_rates.size == 4


def test_drained_queue_windows_dropped():
    # second window: long waits, but the queue ran dry before its end
    stamps = [StampRecord(T0 + i, "D") for i in range(12)] + \
        [StampRecord(T0 + 900 + i, "D") for i in range(3)]
    desks = {T0: 1, T0 + 900: 1}
    waits = {T0: 1200.0, T0 + 900: 1500.0}
    queues = {T0: 4, T0 + 900: 0}
    m = calibrate.estimate_desk_service_rate(stamps, desks, waits, window_queues=queues,
                                             queue_per_desk=1.0)
    assert m.per_desk_rates.tolist() == [12.0]
    m = calibrate.estimate_desk_service_rate(stamps, desks, waits, window_queues=queues)
    assert m.per_desk_rates.size == 2


def test_rate_estimate_from_thinned_log():
    # desks serve at 12 per 15 minutes; stamps are a Poisson-thinned record of that
    rng = np.random.default_rng(8)
    r, desks, keep = 12.0, 6, 0.9
    stamps, od, waits = [], {}, {}
    for k in range(200):
        w = T0 + 900 * k
        n = rng.poisson(r * desks * keep)
        stamps += [StampRecord(w + rng.uniform(0, 900), f"D{j % desks}") for j in range(n)]
        od[w], waits[w] = desks, 1800.0
    m = calibrate.estimate_desk_service_rate(stamps, od, waits)
    assert m.mean() / keep == pytest.approx(r, rel=0.05)


def test_service_rate_at():
    rng = np.random.default_rng(0)
    m = ServiceRateModel([12.0])
    sched = StaffingSchedule(((0.0, 5), (100.0, 0)))
    assert calibrate.service_rate_at(m, sched, 10.0, rng) == 60.0
    assert calibrate.service_rate_at(m, sched, 150.0, rng) == 0.0
    m = ServiceRateModel([8.0, 10.0, 15.0])
    three = StaffingSchedule(((0.0, 3),))
    draws = [calibrate.service_rate_at(m, three, 1.0, rng) for _ in range(100_000)]
    assert np.mean(draws) == pytest.approx(3 * m.mean(), rel=0.02)


def test_service_model_rejects_nonpositive():
    with pytest.raises(ValueError):
        ServiceRateModel([1.0, 0.0])


# -- serialization ---------------------------------------------------------------

def test_model_json_round_trip(tmp_path):
    walk = WalkSpeedModel([MixtureComponent(0.1 + 1e-13, "gamma", (2.0 / 3, 0.1)),
                           MixtureComponent(0.9 - 1e-13, "lognormal", (-0.1234567890123, 0.3))],
                          {"53": 312.5, "8": 120.0})
    svc = ServiceRateModel([1 / 3, 14.25])
    calibrate.save_models(tmp_path / "m.json", walk, svc)
    walk2, svc2 = calibrate.load_models(tmp_path / "m.json")
    for a, b in zip(walk.components, walk2.components):
        assert a.family == b.family
        assert abs(a.weight - b.weight) <= 1e-12
        assert np.allclose(a.params, b.params, rtol=0, atol=1e-12)
    assert walk2.gate_distances == walk.gate_distances
    assert np.array_equal(svc2.per_desk_rates, svc.per_desk_rates)
    d = json.loads((tmp_path / "m.json").read_text())
    assert set(d["components"][0]) == {"weight", "family", "p1", "p2"}
