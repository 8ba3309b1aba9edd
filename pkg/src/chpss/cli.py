"""Command-line front end.

    chpss simulate <config>                  run a scenario
    chpss geometry <run-dir> [--lambda ...]  curvature/regions from stored frames
    chpss diagnose <run-dir> [--lambda ...]  monitors from stored frames
    chpss report <run-dir>... [--csv out]    comparison table
    chpss sweep <config> --param n=2,4,8     one run per parameter value

Exit codes: 0 success, 2 config fault, 3 tail fault, 4 NaN fault,
5 anomaly (sandwich/monotonicity/region violation).
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .diagnostics import breaking_monitor, mckean_classify, metric_blowup_monitor
from .errors import ChpssError, ConfigError, TrivialDatumError
from .geometry import curvature_lattice, generic_regions
from .runner import (
    EXIT_ANOMALY,
    EXIT_CONFIG,
    execute,
    load_run,
    report,
)
from .scenario import parse_config


def _read_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _cmd_simulate(args):
    scenario = parse_config(_read_config(args.config))
    manifest, code = execute(scenario, base_dir=args.base_dir)
    out = scenario.output_dir or os.path.join("runs", scenario.name)
    print(f"{scenario.name}: {manifest.values['termination']} "
          f"(t={manifest.values['t_final']}), exit {code}, outputs in {out}")
    return code


def _cmd_geometry(args):
    traj = load_run(args.run_dir)
    lam = args.lam
    cl = curvature_lattice(traj, lam, delta_rel=args.delta_rel)
    masked = cl.K[cl.mask]
    regs = generic_regions(traj, lam)
    print(f"curvature: {cl.mask.sum()} masked points, "
          f"mean K = {np.mean(masked):.6f}, "
          f"within 1e-3 of -1: {100 * np.mean(np.abs(masked + 1) <= 1e-3):.2f}%")
    print(f"generic regions: {len(regs.rectangles)} (anomaly: {regs.anomaly})")
    return EXIT_ANOMALY if regs.anomaly else 0


def _cmd_diagnose(args):
    traj = load_run(args.run_dir)
    lam = args.lam
    rep = breaking_monitor(traj)
    mon = metric_blowup_monitor(traj, lam)
    mck = mckean_classify(traj.frames[0].m)
    print(f"mckean: {mck.verdict}")
    print(f"criterion_met: {rep.criterion_met}  T_lower: {rep.T_lower:.6g}  "
          f"t_numeric: {rep.t_numeric}")
    print(f"sup g22: {np.max(mon.sup_g22):.6g}  sandwich anomalies: {mon.anomalies}  "
          f"xi channels bounded: {mon.channel_bound_ok()}")
    bad = mon.anomalies > 0 or not rep.monotone_after_departure
    return EXIT_ANOMALY if bad else 0


def _cmd_report(args):
    paths = []
    for d in args.run_dirs:
        path = d if d.endswith(".txt") else os.path.join(d, "run_manifest.txt")
        paths.append(path)
    text, csv_text = report(paths)
    print(text)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
    return 0


def _run_one(payload):
    text, base_dir = payload
    scenario = parse_config(text)
    _, code = execute(scenario, base_dir=base_dir)
    return scenario.name, code


def _cmd_sweep(args):
    key, _, values = args.param.partition("=")
    if not values:
        raise ConfigError("--param must look like key=v1,v2,...")
    base_text = _read_config(args.config)
    jobs = []
    for value in values.split(","):
        lines = []
        replaced = False
        for line in base_text.splitlines():
            stripped = line.split("#", 1)[0].strip()
            if stripped.startswith(key) and stripped[len(key):].lstrip().startswith("="):
                lines.append(f"{key} = {value}")
                replaced = True
            elif stripped.startswith("name") and stripped[4:].lstrip().startswith("="):
                base = stripped.split("=", 1)[1].strip()
                lines.append(f"name = {base}-{key}{value}")
            else:
                lines.append(line)
        if not replaced:
            lines.append(f"{key} = {value}")
        jobs.append(("\n".join(lines), args.base_dir))

    worst = 0
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    for name, code in results:
        print(f"{name}: exit {code}")
        worst = max(worst, code)
    return worst


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="chpss",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario config")
    p.add_argument("config")
    p.add_argument("--base-dir", default=".")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("geometry", help="curvature and regions from a run dir")
    p.add_argument("run_dir")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--delta-rel", type=float, default=0.2)
    p.set_defaults(func=_cmd_geometry)

    p = sub.add_parser("diagnose", help="breaking/metric monitors from a run dir")
    p.add_argument("run_dir")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("report", help="comparison table across run dirs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("sweep", help="run a config template over parameter values")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="key=v1,v2,...")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--base-dir", default=".")
    p.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TrivialDatumError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChpssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
