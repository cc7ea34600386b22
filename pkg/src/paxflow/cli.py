"""paxflow command line: ingest -> calibrate -> simulate -> analyze.

Settings come from an INI file (--config) and may be overridden by flags.
Relative paths in the file are resolved against the file's directory.

Exit codes: 2 ingest, 3 calibrate, 4 simulate, 5 analyze.
"""

import argparse
import configparser
from datetime import date, timedelta
import json
import logging
import os
from pathlib import Path
import shutil
import sys
import tempfile

import numpy as np
import pandas as pd

from . import analyze, calibrate, ingest
from .engine import (CongestionPolicy, SimulationConfig, StaffingCoverageError,
                     StaffingSchedule, simulate_day)
from .synthetic import day_start

log = logging.getLogger("paxflow")

EXIT_INGEST, EXIT_CALIBRATE, EXIT_SIMULATE, EXIT_ANALYZE = 2, 3, 4, 5


class StageError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


DEFAULTS = {
    "inputs": {"flights": "flights.csv", "stamps": "stamps.csv", "wifi": "wifi.csv",
               "distances": "distances.csv"},
    "zones": {"gate_zones": "", "immigration_zones": ""},
    "simulation": {"start_date": "", "end_date": "", "seed": "0", "bin_width": "900",
                   "instability_cap": "100000", "utc_offset": "0"},
    "staffing": {"mode": "derived", "file": "", "upper": "280", "lower": "20",
                 "min_desks": "1", "max_desks": "30", "review_interval": "900"},
    "calibration": {"max_components": "8", "posterior_threshold": "0.05", "min_wait": "900",
                    "min_observations": "10", "queue_per_desk": "1.0",
                    "top_k_days": "", "hourly_max": "false"},
    "analyze": {"validate": "true", "saturation_window": "5", "slope_epsilon": "0.05"},
    "output": {"dir": "out"},
}


class RunConfig:
    """Merged view of defaults, config file and command-line flags."""

    def __init__(self, path=None, overrides=None):
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        self.parser.read_dict(DEFAULTS)
        self.base = Path.cwd()
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise FileNotFoundError(f"config file {path} not found")
            self.parser.read(path, encoding="utf-8")
            self.base = path.resolve().parent
        for (section, key), value in (overrides or {}).items():
            if value is not None:
                self.parser.set(section, key, str(value))

    def get(self, section, key):
        return self.parser.get(section, key).strip()

    def path(self, section, key):
        p = Path(self.get(section, key))
        return p if p.is_absolute() else self.base / p

    def int(self, section, key):
        return self.parser.getint(section, key)

    def float(self, section, key):
        return self.parser.getfloat(section, key)

    def list(self, section, key):
        return [z.strip() for z in self.get(section, key).split(",") if z.strip()]

    @property
    def out(self):
        return self.path("output", "dir")

    @property
    def utc_offset(self):
        return self.float("simulation", "utc_offset")

    @property
    def bin_width(self):
        return self.float("simulation", "bin_width")


# -- small io helpers -----------------------------------------------------------

def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _to_csv(df, path):
    df.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def _replace_dir(tmp, final):
    if final.exists():
        shutil.rmtree(final)
    final.parent.mkdir(parents=True, exist_ok=True)
    os.replace(tmp, final)


def _stage_dir(cfg, name):
    cfg.out.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{name}-", dir=cfg.out))


def _zone_map(entries):
    """'zone:gate' entries -> {zone: gate}; a bare name is its own gate."""
    out = {}
    for e in entries:
        zone, _, gate = e.partition(":")
        out[zone.strip()] = gate.strip() or zone.strip()
    return out


def _missing_days(days_by_source):
    all_days = set().union(*days_by_source.values())
    if not all_days:
        return {k: [] for k in days_by_source}
    lo, hi = min(all_days), max(all_days)
    span = [lo + timedelta(days=i) for i in range((hi - lo).days + 1)]
    return {k: [d.isoformat() for d in span if d not in v] for k, v in days_by_source.items()}


# -- stages ----------------------------------------------------------------------

def cmd_ingest(cfg):
    paths = {k: cfg.path("inputs", k) for k in ("flights", "stamps", "wifi", "distances")}
    missing = [f"{k}={p}" for k, p in paths.items() if not p.is_file()]
    if missing:
        raise StageError(EXIT_INGEST, "missing input files: " + ", ".join(missing))
    gate_zones = cfg.list("zones", "gate_zones")
    imm_zones = cfg.list("zones", "immigration_zones")
    if not gate_zones or not imm_zones:
        raise StageError(EXIT_INGEST, "zones.gate_zones and zones.immigration_zones must be set")
    off = cfg.utc_offset

    try:
        flights, fr = ingest.parse_flight_schedule(paths["flights"])
        stamps, sr = ingest.parse_immigration_stamps(paths["stamps"])
        traces, wr = ingest.parse_wifi_traces(paths["wifi"])
        distances = ingest.parse_distances(paths["distances"])
        walks, jr = ingest.join_gate_to_immigration(traces, _zone_map(gate_zones),
                                                     set(imm_zones))
    except (ingest.SchemaError, ValueError) as exc:
        raise StageError(EXIT_INGEST, f"ingest failed: {exc}") from exc

    tmp = _stage_dir(cfg, "ingest")
    try:
        ingest.write_flights(flights, tmp / "flights.csv")
        ingest.write_stamps(stamps, tmp / "stamps.csv")
        ingest.write_walks(walks, tmp / "walks.csv")
        ingest.write_distances(distances, tmp / "distances.csv")
        try:
            occ = ingest.estimate_passengers_per_flight(stamps, flights, off)
            _dump_json(occ.to_dict(), tmp / "occupancy.json")
        except (ingest.UnusableJoin, ValueError) as exc:
            log.warning("no occupancy distribution: %s", exc)
        desks = ingest.estimate_open_desks(stamps, cfg.bin_width, off)
        _to_csv(pd.DataFrame({"window_start": list(desks), "open_desks": list(desks.values())}),
                tmp / "open_desks.csv")
        entry, exit_ = ingest.immigration_dwell(traces, imm_zones)
        observed = analyze.stats_from_dwell(entry, exit_, cfg.bin_width, off)
        _to_csv(analyze.stats_frame(observed), tmp / "observed_bins.csv")
        report = {
            "flights": fr.as_dict(), "stamps": sr.as_dict(), "wifi": wr.as_dict(),
            "distances": len(distances),
            "join": {"gate_devices": jr.gate_devices, "immigration_devices": jr.immigration_devices,
                     "matched": jr.matched, "nonpositive": jr.nonpositive},
            "missing_days": _missing_days({
                "flights": {ingest.local_day(f.actual_time, off) for f in flights},
                "stamps": {ingest.local_day(s.timestamp, off) for s in stamps},
                "wifi": {ingest.local_day(o.timestamp, off) for o in traces},
            }),
        }
        _dump_json(report, tmp / "report.json")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _replace_dir(tmp, cfg.out / "ingest")
    log.info("ingest: %d flights, %d stamps, %d walks", len(flights), len(stamps), len(walks))
    return report


def _load_bundle(cfg, code):
    b = cfg.out / "ingest"
    if not (b / "report.json").is_file():
        raise StageError(code, f"ingest bundle not found in {b}; run 'paxflow ingest' first")
    flights, _ = ingest.parse_flight_schedule(b / "flights.csv")
    stamps, _ = ingest.parse_immigration_stamps(b / "stamps.csv")
    return b, flights, stamps


def cmd_calibrate(cfg):
    b, flights, stamps = _load_bundle(cfg, EXIT_CALIBRATE)
    walks = ingest.parse_walks(b / "walks.csv")
    distances = ingest.parse_distances(b / "distances.csv")
    speeds, dropped = calibrate.walk_times_to_speeds(walks, distances)
    if speeds.size < 10:
        raise StageError(EXIT_CALIBRATE,
                         f"walks: {speeds.size} usable walk observations, need at least 10")
    walk_model = calibrate.build_walk_speed_model(
        speeds, distances, cfg.int("calibration", "max_components"),
        cfg.float("calibration", "posterior_threshold"))

    desks = pd.read_csv(b / "open_desks.csv")
    open_desks = dict(zip(desks["window_start"].astype(float), desks["open_desks"].astype(int)))
    observed = pd.read_csv(b / "observed_bins.csv")
    # a window's wait estimate needs enough traced devices behind it
    n_min = cfg.int("calibration", "min_observations")
    waits = {float(s): float(w) for s, w, n in zip(observed["bin_start"], observed["mean_wait"],
                                                   observed["throughput"])
             if np.isfinite(w) and n >= n_min}
    queues = dict(zip(observed["bin_start"].astype(float), observed["queue_length"].astype(int)))
    min_wait = cfg.get("calibration", "min_wait")
    top_k = cfg.get("calibration", "top_k_days")
    try:
        service_model = calibrate.estimate_desk_service_rate(
            stamps, open_desks, waits,
            min_wait=float(min_wait) if min_wait else None,
            top_k_days=int(top_k) if top_k else None,
            window=cfg.bin_width,
            hourly_max=cfg.parser.getboolean("calibration", "hourly_max"),
            utc_offset=cfg.utc_offset,
            window_queues=queues,
            queue_per_desk=cfg.float("calibration", "queue_per_desk"))
    except calibrate.InsufficientCongestionData as exc:
        raise StageError(EXIT_CALIBRATE, f"stamps: {exc}") from exc

    tmp = _stage_dir(cfg, "calibrate")
    try:
        calibrate.save_models(tmp / "model.json", walk_model, service_model)
        rows = []
        for rep in walk_model.fit_reports:
            row = {"component": rep.component_index + 1, "mixture_coefficient": rep.weight,
                   "n_points": rep.n_points, "selected": rep.selected or ""}
            for fam in calibrate.FAMILIES:
                params, aic = rep.per_family.get(fam, ((np.nan, np.nan), np.nan))
                row[f"{fam}_aic"] = aic
                row[f"{fam}_p1"], row[f"{fam}_p2"] = params
            rows.append(row)
        _to_csv(pd.DataFrame(rows), tmp / "fit_report.csv")
        _dump_json({"speeds": int(speeds.size), "dropped_no_distance": dropped,
                    "components": len(walk_model.components),
                    "service_windows": len(service_model.source_windows),
                    "mean_rate_per_desk": service_model.mean()}, tmp / "summary.json")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _replace_dir(tmp, cfg.out / "calibrate")
    return walk_model, service_model


def _days(cfg, flights):
    off = cfg.utc_offset
    have = sorted({ingest.local_day(f.actual_time, off) for f in flights})
    start, end = cfg.get("simulation", "start_date"), cfg.get("simulation", "end_date")
    lo = date.fromisoformat(start) if start else (have[0] if have else None)
    hi = date.fromisoformat(end) if end else (have[-1] if have else None)
    if lo is None:
        return []
    return [lo + timedelta(days=i) for i in range((hi - lo).days + 1)]


def _staffing_for(cfg, mode, day, stamps, schedule_file):
    off = cfg.utc_offset
    if mode == "policy":
        return CongestionPolicy(cfg.int("staffing", "upper"), cfg.int("staffing", "lower"),
                                cfg.int("staffing", "min_desks"), cfg.int("staffing", "max_desks"),
                                review_interval=cfg.float("staffing", "review_interval"))
    if mode == "file":
        return schedule_file
    if mode == "derived":
        t0 = day_start(day, off)
        todays = [s for s in stamps if t0 <= s.timestamp < t0 + 86400]
        counts = ingest.estimate_open_desks(todays, cfg.bin_width, off)
        if not counts:
            raise StageError(EXIT_SIMULATE, f"no stamps to derive staffing on {day}")
        first = min(counts)
        # desks before the first stamp run at the first observed level
        counts = {(t0 if w == first else w): c for w, c in counts.items()}
        return StaffingSchedule.from_counts(counts)
    raise StageError(EXIT_SIMULATE, f"unknown staffing mode {mode!r}")


def cmd_simulate(cfg):
    b, flights, stamps = _load_bundle(cfg, EXIT_SIMULATE)
    model_path = cfg.out / "calibrate" / "model.json"
    if not model_path.is_file():
        raise StageError(EXIT_SIMULATE, f"calibrated model not found at {model_path}")
    walk_model, service_model = calibrate.load_models(model_path)
    occ_path = b / "occupancy.json"
    occupancy = ingest.FlightOccupancyDistribution.from_dict(_load_json(occ_path)) \
        if occ_path.is_file() else None

    mode = cfg.get("staffing", "mode")
    schedule_file = None
    if mode == "file":
        f = cfg.get("staffing", "file")
        if not f or not cfg.path("staffing", "file").is_file():
            raise StageError(EXIT_SIMULATE, "staffing mode 'file' needs an existing staffing.file")
        schedule_file = StaffingSchedule.from_csv(cfg.path("staffing", "file"))

    off = cfg.utc_offset
    seed = cfg.int("simulation", "seed")
    summary = {"days": {}, "unstable_days": [], "seed": seed, "staffing_mode": mode}
    tmp = _stage_dir(cfg, "simulate")
    try:
        for i, day in enumerate(_days(cfg, flights)):
            todays = [f for f in flights if ingest.local_day(f.actual_time, off) == day]
            if not todays:
                log.info("no flights on %s, skipped", day)
                continue
            staffing = _staffing_for(cfg, mode, day, stamps, schedule_file)
            config = SimulationConfig(seed=seed + i,
                                      instability_cap=cfg.int("simulation", "instability_cap"),
                                      bin_width=cfg.bin_width, utc_offset=off)
            try:
                res = simulate_day(todays, occupancy, walk_model, service_model, staffing, config)
            except StaffingCoverageError as exc:
                raise StageError(EXIT_SIMULATE, f"{day}: {exc}") from exc
            d = tmp / day.isoformat()
            d.mkdir()
            stats = analyze.bin_statistics(res.traces, cfg.bin_width, off)
            res.to_csv(d / "traces.csv", d / "bins.csv", bin_stats=stats)
            diag = {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                    for k, v in res.diagnostics.items()}
            diag["unstable"] = bool(diag["unstable"])
            diag["seed"] = seed + i
            diag["mean_wait"] = res.mean_wait() if diag["served"] else None
            summary["days"][day.isoformat()] = diag
            if diag["unstable"]:
                summary["unstable_days"].append(day.isoformat())
        if not summary["days"]:
            raise StageError(EXIT_SIMULATE, "no day in the date range has flights")
        _dump_json(summary, tmp / "summary.json")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _replace_dir(tmp, cfg.out / "simulate")
    return summary


def cmd_analyze(cfg):
    sim = cfg.out / "simulate"
    day_dirs = sorted(p for p in sim.glob("*") if p.is_dir() and (p / "bins.csv").is_file()) \
        if sim.is_dir() else []
    if not day_dirs:
        raise StageError(EXIT_ANALYZE, f"no simulation results in {sim}")
    bw, off = cfg.bin_width, cfg.utc_offset

    simulated = []
    for d in day_dirs:
        simulated.extend(analyze.stats_from_frame(pd.read_csv(d / "bins.csv"), bw))
    out = {"days": [d.name for d in day_dirs]}

    tmp = _stage_dir(cfg, "analyze")
    try:
        flights_csv = cfg.out / "ingest" / "flights.csv"
        if flights_csv.is_file():
            flights, _ = ingest.parse_flight_schedule(flights_csv)
            if flights:
                ds = analyze.flight_delay_summary(flights, bw, off)
                out["delays"] = {"overall_mean_delay_min": ds.overall_mean_delay,
                                 "flight_count": ds.flight_count}
                _to_csv(pd.DataFrame({"bin_start": list(ds.per_bin_mean_delay),
                                      "mean_delay_min": list(ds.per_bin_mean_delay.values())}),
                        tmp / "delays.csv")

        curve = analyze.throughput_vs_demand(simulated)
        window = cfg.int("analyze", "saturation_window")
        try:
            curve.saturation_demand = analyze.detect_saturation(
                curve, window, cfg.float("analyze", "slope_epsilon"))
        except ValueError as exc:
            log.info("saturation not assessed: %s", exc)
        out["saturation_demand"] = curve.saturation_demand
        _to_csv(pd.DataFrame({"demand": curve.demand, "throughput": curve.throughput,
                              "saturation_demand": curve.saturation_demand}),
                tmp / "curve.csv")

        observed_csv = cfg.out / "ingest" / "observed_bins.csv"
        if cfg.parser.getboolean("analyze", "validate") and observed_csv.is_file():
            actual = analyze.stats_from_frame(pd.read_csv(observed_csv), bw)
            try:
                rep = analyze.validate_against_actual(simulated, actual)
                out["validation"] = rep.as_dict()
                _to_csv(rep.per_bin_residuals, tmp / "residuals.csv")
            except ValueError as exc:
                log.warning("validation skipped: %s", exc)
        _dump_json(out, tmp / "summary.json")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _replace_dir(tmp, cfg.out / "analyze")
    return out


def cmd_all(cfg):
    cmd_ingest(cfg)
    cmd_calibrate(cfg)
    cmd_simulate(cfg)
    return cmd_analyze(cfg)


COMMANDS = {"ingest": cmd_ingest, "calibrate": cmd_calibrate, "simulate": cmd_simulate,
            "analyze": cmd_analyze, "all": cmd_all}
STAGE_CODE = {"ingest": EXIT_INGEST, "calibrate": EXIT_CALIBRATE, "simulate": EXIT_SIMULATE,
              "analyze": EXIT_ANALYZE, "all": EXIT_INGEST}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--bin-width", type=float, help="bin width in seconds")
    common.add_argument("--out", help="output directory")
    common.add_argument("--staffing-mode", choices=("file", "derived", "policy"))
    common.add_argument("--upper", type=int, help="policy: open a desk at this queue length")
    common.add_argument("--lower", type=int, help="policy: close a desk at this queue length")

    p = argparse.ArgumentParser(prog="paxflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("PAXFLOW_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {("simulation", "seed"): args.seed,
                 ("simulation", "bin_width"): args.bin_width,
                 ("output", "dir"): args.out,
                 ("staffing", "mode"): args.staffing_mode,
                 ("staffing", "upper"): args.upper,
                 ("staffing", "lower"): args.lower}
    try:
        cfg = RunConfig(args.config, overrides)
        if args.out is not None:
            cfg.parser.set("output", "dir", str(Path(args.out).resolve()))
        COMMANDS[args.command](cfg)
    except StageError as exc:
        print(f"paxflow {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (FileNotFoundError, configparser.Error, ValueError) as exc:
        print(f"paxflow {args.command}: {exc}", file=sys.stderr)
        return STAGE_CODE[args.command]
    return 0


if __name__ == "__main__":
    sys.exit(main())
