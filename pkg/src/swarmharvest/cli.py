"""Command-line front end for the sweep harness."""

import argparse
import json
import sys

import numpy as np

from .harness import ExperimentSpec, run_sweep
from .planner import RunOptions

_INT_PARAMS = ("devices", "uavs", "channels")


def parse_sweep(text):
    """Parse NAME=LO:STEP:HI into (name, values), HI inclusive."""
    name, sep, rng = text.partition("=")
    parts = rng.split(":")
    if not sep or len(parts) != 3:
        raise argparse.ArgumentTypeError(f"bad sweep {text!r}, expected NAME=LO:STEP:HI")
    lo, step, hi = (float(x) for x in parts)
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad sweep range in {text!r}")
    values = np.arange(lo, hi + 0.5 * step, step)
    if name in _INT_PARAMS:
        return name, tuple(int(round(v)) for v in values)
    return name, tuple(float(v) for v in values)


def _mode_label(args):
    parts = []
    if args.policy != "opt":
        parts.append(args.policy)
    if args.time == "eta":
        parts.append("eta")
    if args.infra == "bs":
        parts.append("bs")
    if args.access == "tdma":
        parts.append("tdma")
    return "+".join(parts) if parts else "opt"


def build_parser():
    p = argparse.ArgumentParser(
        prog="swarmharvest",
        description="Plan aerial charging/collection deployments for a field of "
                    "harvesting sensor devices and report uplink throughput.")
    p.add_argument("--config", help="JSON file with experiment fields "
                                    "(devices, radius, uavs, channels, radio, options, modes)")
    p.add_argument("--seed", type=int, default=0, help="base scenario seed")
    p.add_argument("--ensemble", type=int, default=1,
                   help="number of seeds, counting up from --seed")
    p.add_argument("--sweep", metavar="NAME=LO:STEP:HI",
                   help="sweep one parameter, e.g. devices=20:10:60 or gamma_db=0:1:10")
    p.add_argument("--policy", choices=("opt", "nf", "ff"), default="opt",
                   help="epoch assignment rule")
    p.add_argument("--time", choices=("opt", "eta"), default="opt",
                   help="charging/collection split: optimized or pinned even")
    p.add_argument("--infra", choices=("uav", "bs"), default="uav",
                   help="mobile nodes or the fixed-tower baseline")
    p.add_argument("--access", choices=("ours", "tdma"), default="ours",
                   help="multi-device epochs or one device per epoch")
    p.add_argument("--out", help="directory for results.csv / summary.json / manifest.json")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)

    sweep_name, sweep_values = None, ()
    sweep_text = args.sweep or cfg.get("sweep")
    if sweep_text:
        sweep_name, sweep_values = parse_sweep(sweep_text)

    if args.ensemble < 1:
        print("--ensemble must be at least 1", file=sys.stderr)
        return 2
    modes = tuple(cfg.get("modes", (_mode_label(args),)))
    options = RunOptions(**cfg.get("options", {}))
    spec = ExperimentSpec(
        devices=int(cfg.get("devices", 40)),
        radius=float(cfg.get("radius", 80.0)),
        uavs=int(cfg.get("uavs", 4)),
        channels=int(cfg.get("channels", 12)),
        seeds=tuple(range(args.seed, args.seed + args.ensemble)),
        modes=modes,
        sweep_name=sweep_name,
        sweep_values=sweep_values,
        radio_overrides=dict(cfg.get("radio", {})),
        options=options,
    )

    def progress(row):
        if row["error"]:
            print(f"value={row['sweep_value']} mode={row['mode']} seed={row['seed']} "
                  f"ERROR {row['error']}")
        else:
            print(f"value={row['sweep_value']} mode={row['mode']} seed={row['seed']} "
                  f"throughput={row['sum_throughput']:.6g} jain={row['jain']:.4f}")

    rows, summary, _ = run_sweep(spec, out_dir=args.out, progress=progress)
    failures = sum(1 for r in rows if r["error"])
    for entry in summary:
        label = entry["sweep_value"]
        head = f"value={label} " if label is not None else ""
        if "mean_sum_throughput" in entry:
            print(f"summary: {head}mode={entry['mode']} "
                  f"mean_throughput={entry['mean_sum_throughput']:.6g} "
                  f"mean_jain={entry['mean_jain']:.4f} errors={entry['errors']}")
        else:
            print(f"summary: {head}mode={entry['mode']} all {entry['runs']} runs failed")
    if args.out:
        print(f"wrote {args.out}/results.csv")
    return 1 if failures == len(rows) else 0


if __name__ == "__main__":
    sys.exit(main())
