"""Batch experiment driver: parameter sweeps, mode comparison, CSV output.

A sweep is a grid over (sweep value) x (mode) x (seed), visited in that
order so output rows are reproducible line for line. A failed combination
becomes a row with an error code instead of killing the batch.
"""

import csv
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .channel import coverage_radius, eh_coverage_limit
from .errors import ParameterError
from .planner import RunOptions, run, run_best
from .scenario import RadioParams, generate_scenario

# named planner configurations selectable from the command line
MODE_TABLE = {
    "opt": {},
    "eta": {"time_mode": "eta"},
    "nf": {"policy": "nf"},
    "ff": {"policy": "ff"},
    "bs": {"infra": "bs"},
    "tdma": {"access": "tdma"},
}

CSV_COLUMNS = ("sweep_name", "sweep_value", "mode", "seed", "sum_throughput",
               "jain", "mean_dl_altitude", "mean_ul_altitude",
               "mean_coverage_radius", "iterations", "error")

_SCENARIO_KEYS = ("devices", "radius", "uavs", "channels")
_RADIO_KEYS = ("p_ut_dbm", "rho_dbm", "gamma_db", "noise_dbm", "eh_eff")


def resolve_mode(mode):
    """A mode is a MODE_TABLE name or several joined with '+', e.g. 'nf+tdma'."""
    merged = {}
    for part in mode.split("+"):
        if part not in MODE_TABLE:
            raise ParameterError(f"unknown mode {part!r}; expected one of {tuple(MODE_TABLE)}")
        merged.update(MODE_TABLE[part])
    return merged


@dataclass(frozen=True)
class ExperimentSpec:
    devices: int = 40
    radius: float = 80.0
    uavs: int = 4
    channels: int = 12
    seeds: tuple = (0,)
    modes: tuple = ("opt",)
    sweep_name: str = None
    sweep_values: tuple = ()
    radio_overrides: dict = field(default_factory=dict)
    options: RunOptions = field(default_factory=RunOptions)


def build_scenario(spec, sweep_value, seed):
    scn_kw = {"devices": spec.devices, "radius": spec.radius,
              "uavs": spec.uavs, "channels": spec.channels}
    radio_kw = dict(spec.radio_overrides)
    if spec.sweep_name is not None:
        if spec.sweep_name in _SCENARIO_KEYS:
            scn_kw[spec.sweep_name] = sweep_value
        elif spec.sweep_name in _RADIO_KEYS:
            radio_kw[spec.sweep_name] = sweep_value
        else:
            raise ParameterError(f"unknown sweep parameter {spec.sweep_name!r}; "
                                 f"expected one of {_SCENARIO_KEYS + _RADIO_KEYS}")
    radio = RadioParams.from_dbm(**radio_kw) if radio_kw else None
    return generate_scenario(int(scn_kw["devices"]), float(scn_kw["radius"]), seed,
                             uav_count=int(scn_kw["uavs"]),
                             channel_count=int(scn_kw["channels"]), radio=radio)


def _coverage_stats(scn, report):
    dl_h = report.deployment.dl_positions[:, 2]
    ul_h = report.deployment.ul_positions[:, 2]
    limit = eh_coverage_limit(scn.radio, scn.channel)
    radii = []
    for h in dl_h:
        d0 = coverage_radius(limit, float(h), scn.channel)
        radii.append(float(np.sqrt(max(d0 * d0 - h * h, 0.0))))
    return float(dl_h.mean()), float(ul_h.mean()), float(np.mean(radii))


def run_sweep(spec, out_dir=None, progress=None):
    """Run the grid and return (rows, summary, manifest)."""
    values = tuple(spec.sweep_values) if spec.sweep_name is not None else (None,)
    if not values:
        values = (None,)
    rows, hashes = [], {}
    for value in values:
        for mode in spec.modes:
            opts = spec.options.replace(**resolve_mode(mode))
            for seed in spec.seeds:
                row = {"sweep_name": spec.sweep_name or "", "sweep_value": value,
                       "mode": mode, "seed": seed, "error": ""}
                try:
                    scn = build_scenario(spec, value, seed)
                    hashes[f"{value}/{mode}/{seed}"] = scn.content_hash()
                    driver = run_best if opts.policy == "opt" and opts.access == "ours" else run
                    report = driver(scn, opts)
                    dl_h, ul_h, cov = _coverage_stats(scn, report)
                    row.update(sum_throughput=report.sum_throughput, jain=report.jain,
                               mean_dl_altitude=dl_h, mean_ul_altitude=ul_h,
                               mean_coverage_radius=cov, iterations=report.iterations)
                except (RuntimeError, ValueError) as exc:
                    row.update(sum_throughput="", jain="", mean_dl_altitude="",
                               mean_ul_altitude="", mean_coverage_radius="",
                               iterations="", error=type(exc).__name__)
                rows.append(row)
                if progress is not None:
                    progress(row)
    summary = _summarize(rows)
    manifest = {
        "spec": _spec_payload(spec),
        "columns": list(CSV_COLUMNS),
        "scenario_hashes": hashes,
        "row_count": len(rows),
    }
    if out_dir is not None:
        write_outputs(out_dir, rows, summary, manifest)
    return rows, summary, manifest


def _summarize(rows):
    grouped = {}
    for row in rows:
        grouped.setdefault((row["sweep_value"], row["mode"]), []).append(row)
    out = []
    for (value, mode), bucket in grouped.items():
        good = [r for r in bucket if not r["error"]]
        entry = {"sweep_value": value, "mode": mode,
                 "runs": len(bucket), "errors": len(bucket) - len(good)}
        if good:
            entry["mean_sum_throughput"] = float(np.mean([r["sum_throughput"] for r in good]))
            entry["mean_jain"] = float(np.mean([r["jain"] for r in good]))
        out.append(entry)
    return out


def _spec_payload(spec):
    payload = asdict(spec)
    payload["options"] = asdict(spec.options)
    payload["seeds"] = list(spec.seeds)
    payload["modes"] = list(spec.modes)
    payload["sweep_values"] = list(spec.sweep_values)
    return payload


def write_outputs(out_dir, rows, summary, manifest):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
