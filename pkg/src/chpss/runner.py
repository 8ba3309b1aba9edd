"""Scenario execution: runs, data products, manifests, comparison reports.

A run directory contains

    frame_<k>.csv        x,u,m,ux per stored frame
    frames_index.csv     k,t,step_index,dt_last,file
    step_log.csv         dense per-step scalar channels
    diagnostics.csv      per-frame conserved/geometry channels
    geometry.csv         x,t,g11,g12,g22,wedge,K,mask   (when requested)
    regions.txt          generic-region rectangles      (when requested)
    characteristics.csv  particle paths                 (when requested)
    blowup.txt           breaking/metric monitor summary
    mckean.txt           sign-classifier verdict
    run_manifest.txt     config echo, termination, verdicts, file inventory

The manifest is written once, last, so its presence marks a complete run.
All CSVs are deterministic for a fixed config; only the manifest carries
wall time.
"""

import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .characteristics import evolve_characteristics, transport_identity_residual
from .diagnostics import (
    breaking_monitor,
    diagnostics_records,
    lifespan_lower_bound,
    mckean_classify,
    metric_blowup_monitor,
    write_diagnostics_csv,
)
from .errors import ChpssError
from .geometry import (
    curvature_lattice,
    extract_tail_amplitudes,
    generic_regions,
    metric_lattice,
)
from .gridfield import Grid
from .scenario import Scenario
from .solver import (
    BLOWUP_DETECTED,
    NAN_FAULT,
    REACHED_T_END,
    TAIL_FAULT,
    Termination,
    Trajectory,
    make_frame,
    run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TAIL = 3
EXIT_NAN = 4
EXIT_ANOMALY = 5

_TERMINATION_EXIT = {
    REACHED_T_END: EXIT_OK,
    BLOWUP_DETECTED: EXIT_OK,
    TAIL_FAULT: EXIT_TAIL,
    NAN_FAULT: EXIT_NAN,
}


@dataclass
class RunManifest:
    values: dict
    files: list

    def get(self, key, default=None):
        return self.values.get(key, default)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_array_csv(path, header, columns):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_frame_csv(path, frame):
    _write_array_csv(
        path,
        ("x", "u", "m", "ux"),
        (frame.u.grid.x, frame.u.values, frame.m.values, frame.ux.values),
    )


def execute(scenario: Scenario, base_dir=".") -> tuple:
    """Run a scenario, write its data products, return (manifest, exit_code)."""
    t_wall = time.time()
    out_dir = scenario.output_dir or os.path.join("runs", scenario.name)
    out_dir = os.path.join(base_dir, out_dir)
    os.makedirs(out_dir, exist_ok=True)

    u0 = scenario.initial_datum()
    cfg = scenario.run_config()
    traj = run(u0, cfg)

    files = []

    def emit(name, writer):
        path = os.path.join(out_dir, name)
        writer(path)
        files.append(name)

    for k, fr in enumerate(traj.frames):
        emit(f"frame_{k:06d}.csv", lambda p, fr=fr: write_frame_csv(p, fr))
    emit(
        "frames_index.csv",
        lambda p: _write_index(p, traj),
    )
    emit("step_log.csv", lambda p: _write_step_log(p, traj.log))

    tails = None
    if "tails" in scenario.diagnostics:
        tails = extract_tail_amplitudes(traj)
    records = diagnostics_records(traj, scenario.lam, tails=tails)
    emit("diagnostics.csv", lambda p: write_diagnostics_csv(p, records))

    verdicts = {}
    anomaly = False

    mck = mckean_classify(traj.frames[0].m)
    verdicts["mckean"] = mck.verdict
    emit("mckean.txt", lambda p: _write_kv(p, {
        "verdict": mck.verdict,
        "crossing": "" if mck.crossing is None else _fmt(mck.crossing),
    }))

    if "breaking" in scenario.diagnostics or "metric_blowup" in scenario.diagnostics:
        rep = breaking_monitor(traj)
        mon = metric_blowup_monitor(traj, scenario.lam)
        anomaly = anomaly or mon.anomalies > 0 or not rep.monotone_after_departure
        verdicts.update(
            criterion_met=rep.criterion_met,
            T_lower=rep.T_lower,
            t_numeric="" if rep.t_numeric is None else rep.t_numeric,
            epsilon_hat="" if rep.epsilon_hat is None else rep.epsilon_hat,
            sup_g22=float(np.max(mon.sup_g22)),
            sandwich_anomalies=mon.anomalies,
        )
        emit("blowup.txt", lambda p: _write_kv(p, {
            "criterion_met": rep.criterion_met,
            "witness_x": _fmt(rep.witness_x),
            "criterion_margin": _fmt(rep.criterion_margin),
            "T_lower": _fmt(rep.T_lower),
            "t_numeric": "" if rep.t_numeric is None else _fmt(rep.t_numeric),
            "epsilon_hat": "" if rep.epsilon_hat is None else _fmt(rep.epsilon_hat),
            "riccati_violations": "" if rep.riccati_violations is None else rep.riccati_violations,
            "y0": _fmt(rep.y0),
            "y_final": _fmt(rep.y_final),
            "monotone_after_departure": rep.monotone_after_departure,
            "h1_drift_at_end": _fmt(rep.h1_drift_at_end),
            "sup_g22": _fmt(float(np.max(mon.sup_g22))),
            "metric_blown_up": mon.blown_up,
            "sandwich_anomalies": mon.anomalies,
            "xi_channels_bounded": mon.channel_bound_ok(),
        }))

    # surface extraction needs a healthy frame lattice; on faulted runs the
    # partial frames and monitors above are all that can be reported
    healthy = traj.termination.kind in (REACHED_T_END, BLOWUP_DETECTED)

    if "geometry" in scenario.diagnostics and healthy:
        cl = curvature_lattice(
            traj,
            scenario.lam,
            delta_rel=scenario.curvature_delta_rel,
            t_min=scenario.curvature_t_min,
            t_max=scenario.curvature_t_max,
        )
        _, cf, g = metric_lattice(
            traj, scenario.lam,
            t_min=scenario.curvature_t_min, t_max=scenario.curvature_t_max,
        )
        emit("geometry.csv", lambda p: _write_geometry(p, traj, cl, cf, g))
        masked = cl.K[cl.mask]
        if masked.size:
            verdicts["curvature_mean"] = float(np.mean(masked))
            verdicts["curvature_within_1e3"] = float(np.mean(np.abs(masked + 1.0) <= 1e-3))

    if "regions" in scenario.diagnostics and healthy:
        regs = generic_regions(traj, scenario.lam)
        anomaly = anomaly or regs.anomaly
        emit("regions.txt", lambda p: _write_regions(p, regs))
        verdicts["generic_regions"] = len(regs.rectangles)

    if "characteristics" in scenario.diagnostics and scenario.seeds is not None and healthy:
        fan = evolve_characteristics(traj, scenario.seeds)
        tres = transport_identity_residual(traj, fan)
        emit("characteristics.csv", lambda p: _write_fan(p, fan))
        verdicts.update(
            q_strictly_increasing=fan.strictly_increasing(),
            transport_max_rel=tres.max_rel_residual(),
            momentum_signs_preserved=tres.signs_preserved(),
        )
        anomaly = anomaly or not fan.strictly_increasing()

    exit_code = _TERMINATION_EXIT[traj.termination.kind]
    if exit_code == EXIT_OK and anomaly:
        exit_code = EXIT_ANOMALY

    manifest_values = {
        "name": scenario.name,
        "version": __version__,
        "datum": scenario.datum_kind,
        "a": scenario.a,
        "n": scenario.n,
        "w": scenario.w,
        "L": scenario.half_width,
        "N": scenario.n_points,
        "lambda": scenario.lam,
        "cfl": scenario.cfl,
        "t_end": scenario.t_end,
        "kernel": scenario.kernel,
        "blowup_threshold": scenario.blowup_threshold,
        "output_stride": scenario.output_stride,
        "tail_rel_tol": scenario.tail_rel_tol,
        "termination": traj.termination.kind,
        "t_final": traj.termination.t,
        "exit_code": exit_code,
        "wall_time_s": round(time.time() - t_wall, 3),
    }
    manifest_values.update({k: v for k, v in verdicts.items()})
    manifest = RunManifest(values=manifest_values, files=sorted(files))
    _write_manifest(os.path.join(out_dir, "run_manifest.txt"), manifest)
    return manifest, exit_code


def _write_index(path, traj: Trajectory):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,t,step_index,dt_last,file\n")
        for k, fr in enumerate(traj.frames):
            fh.write(f"{k},{fr.t:.17g},{fr.step_index},{fr.dt_last:.17g},frame_{k:06d}.csv\n")


def _write_step_log(path, log):
    cols = ("t", "y", "xi", "sup_u", "sup_abs_ux", "H0", "H1", "H2")
    _write_array_csv(path, cols, [log[c] for c in cols])


def _write_kv(path, mapping):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in mapping.items():
            fh.write(f"{k} = {v}\n")


def _write_regions(path, regs):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"delta = {regs.delta:.17g}\n")
        fh.write(f"count = {len(regs.rectangles)}\n")
        fh.write(f"anomaly = {regs.anomaly}\n")
        for i, r in enumerate(regs.rectangles):
            fh.write(
                f"rect {i}: t in [{r.t_lo:.17g}, {r.t_hi:.17g}], "
                f"x in [{r.x_lo:.17g}, {r.x_hi:.17g}], sign_ux = {r.sign_ux:+d}\n"
            )


def _write_fan(path, fan):
    header = ["t"] + [f"q{i}" for i in range(len(fan.seeds))]
    cols = [fan.t] + [fan.q[:, i] for i in range(len(fan.seeds))]
    _write_array_csv(path, header, cols)


def _write_geometry(path, traj, cl, cf, g):
    """Curvature-window lattice: interior frames, one row per (t, x)."""
    nt = len(cl.t)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,t,g11,g12,g22,wedge,K,mask\n")
        for i in range(nt):
            # geometry fields carry two trimmed frames on each side
            gi = i + 2
            for j in range(len(cl.x)):
                K = cl.K[i, j]
                fh.write(
                    f"{cl.x[j]:.17g},{cl.t[i]:.17g},{g.g11[gi, j]:.17g},"
                    f"{g.g12[gi, j]:.17g},{g.g22[gi, j]:.17g},{cl.wedge[i, j]:.17g},"
                    f"{'' if np.isnan(K) else format(K, '.17g')},{int(cl.mask[i, j])}\n"
                )


def _write_manifest(path, manifest: RunManifest):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in manifest.values.items():
            fh.write(f"{k} = {_fmt(v)}\n")
        fh.write("files = " + ",".join(manifest.files) + "\n")


def load_manifest(path) -> RunManifest:
    if not os.path.exists(path):
        raise ChpssError(f"manifest not found: {path}")
    values = {}
    files = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" not in line:
                continue
            k, v = line.split("=", 1)
            k, v = k.strip(), v.strip()
            if k == "files":
                files = [f for f in v.split(",") if f]
            else:
                values[k] = v
    return RunManifest(values=values, files=files)


def load_run(run_dir) -> Trajectory:
    """Rebuild a trajectory from a run directory (frames + step log)."""
    manifest = load_manifest(os.path.join(run_dir, "run_manifest.txt"))
    grid = Grid(float(manifest.values["L"]), int(manifest.values["N"]))
    index = np.genfromtxt(
        os.path.join(run_dir, "frames_index.csv"), delimiter=",", skip_header=1,
        usecols=(0, 1, 2, 3),
    )
    index = np.atleast_2d(index)
    frames = []
    for k, t, step, dt_last in index:
        data = np.genfromtxt(
            os.path.join(run_dir, f"frame_{int(k):06d}.csv"),
            delimiter=",", skip_header=1,
        )
        frames.append(make_frame(grid, data[:, 1], t, int(step), dt_last))
    log_raw = np.genfromtxt(
        os.path.join(run_dir, "step_log.csv"), delimiter=",", skip_header=1
    )
    log_raw = np.atleast_2d(log_raw)
    cols = ("t", "y", "xi", "sup_u", "sup_abs_ux", "H0", "H1", "H2")
    log = {c: log_raw[:, i] for i, c in enumerate(cols)}
    kind = manifest.values["termination"]
    t_final = float(manifest.values["t_final"])
    term = Termination(
        kind=kind,
        t=t_final,
        t_numeric=t_final if kind == BLOWUP_DETECTED else None,
    )
    # reconstruct enough of the config for the geometry/diagnostics passes
    from .solver import RunConfig

    cfg = RunConfig(
        grid=grid,
        lam=float(manifest.values["lambda"]),
        t_end=float(manifest.values["t_end"]),
        cfl=float(manifest.values["cfl"]),
        blowup_threshold=float(manifest.values["blowup_threshold"]),
        output_stride=int(manifest.values["output_stride"]),
        kernel=manifest.values["kernel"],
        allow_trivial=True,
        tail_rel_tol=float(manifest.values["tail_rel_tol"]),
    )
    return Trajectory(grid=grid, config=cfg, frames=frames, termination=term, log=log)


# ----------------------------------------------------------------------------
# comparison report


_REPORT_COLUMNS = (
    "name", "termination", "t_numeric", "T_lower", "h0_drift", "h1_drift",
    "sup_g22", "curvature_mean", "curvature_within_1e3", "mckean",
)


def report(manifest_paths):
    """Comparison table across runs; returns (text, csv_text)."""
    rows = []
    for path in manifest_paths:
        m = load_manifest(path)
        run_dir = os.path.dirname(path)
        log = np.genfromtxt(
            os.path.join(run_dir, "step_log.csv"), delimiter=",", skip_header=1
        )
        log = np.atleast_2d(log)
        H0, H1 = log[:, 5], log[:, 6]
        h0_drift = float(np.max(np.abs(H0 - H0[0])))
        h1_drift = float(np.max(np.abs(H1 / H1[0] - 1.0))) if H1[0] != 0 else 0.0
        rows.append({
            "name": m.values.get("name", "?"),
            "termination": m.values.get("termination", "?"),
            "t_numeric": m.values.get("t_numeric", ""),
            "T_lower": m.values.get("T_lower", ""),
            "h0_drift": f"{h0_drift:.3e}",
            "h1_drift": f"{h1_drift:.3e}",
            "sup_g22": m.values.get("sup_g22", ""),
            "curvature_mean": m.values.get("curvature_mean", ""),
            "curvature_within_1e3": m.values.get("curvature_within_1e3", ""),
            "mckean": m.values.get("mckean", ""),
        })
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in _REPORT_COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in _REPORT_COLUMNS)]
    for r in rows:
        lines.append("  ".join(str(r[c]).ljust(widths[c]) for c in _REPORT_COLUMNS))
    text = "\n".join(lines)
    csv_lines = [",".join(_REPORT_COLUMNS)]
    for r in rows:
        csv_lines.append(",".join(str(r[c]) for c in _REPORT_COLUMNS))
    return text, "\n".join(csv_lines) + "\n"
