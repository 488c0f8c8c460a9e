"""Command-line entry point: ``omegaturn <subcommand> --config FILE [--set k=v ...] --out DIR``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as C
from . import svg
from .chain import ChainGeometry, link_frames
from .compliance import peg_study, random_board, simulate_compliant, summarize_study
from .designs import frozen_design
from .drag import NonConvergence
from .gaits import design_to_dict, geometric_coords
from .geomech import (Axis, GaitPath, InfeasiblePath, ShapeGrid, build_feasibility_mask, forward_embedding,
                      gait_paths, geometric_embedding, height_function, periodic_axis,
                      phase_embedding, reduced_connection, surface_integral, turning_embedding)
from .multileg import default_grid, multileg_height_function, multileg_trajectory, multileg_turn, stripe_bands
from .optimizer import NoFeasibleStart, optimize
from .simulate import feasibility_certificate, integrate_gait, turn_metrics, world_points

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4
EXIT_INTERNAL = 1

WORKERS_ENV = "OMEGATURN_WORKERS"


class SimulationError(RuntimeError):
    """A solver or optimizer failure while running a study."""


# output helpers --------------------------------------------------------------

class Writer:
    def __init__(self, out: Path, cfg: dict):
        self.out = out
        self.cfg = cfg
        self.prov = C.provenance(cfg)
        self.files = []

    def _write(self, name, text):
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.files.append(name)
        return path

    def json(self, name, payload):
        body = {"provenance": self.prov, **payload}
        return self._write(name, json.dumps(_plain(body), indent=2, sort_keys=True) + "\n")

    def csv(self, name, rows):
        if not rows:
            rows = [{}]
        keys = list(rows[0].keys())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config_hash"] + keys)
        for r in rows:
            w.writerow([self.prov["config_hash"]] + [_cell(r.get(k)) for k in keys])
        return self._write(name, buf.getvalue())

    def svg(self, name, text):
        return self._write(name, text)

    @property
    def meta(self):
        return f"config_hash={self.prov['config_hash']} tool_version={self.prov['tool_version']}"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def _centerlines(traj, geom: ChainGeometry, frames: int):
    idx = np.linspace(0, len(traj.t) - 1, frames).round().astype(int)
    centers, _ = link_frames(traj.shapes[idx], geom)
    world = world_points(traj.poses[idx], centers)
    return [w for w in world]


# subcommands -----------------------------------------------------------------

def _simulate_design(args):
    d, geom, model, steps, cycles, samples = args
    cert = feasibility_certificate(d, geom, samples)
    try:
        traj = integrate_gait(d, geom, model, steps, cycles)
    except NonConvergence as exc:
        raise SimulationError(str(exc)) from exc
    return traj, turn_metrics(traj, geom), cert


def cmd_simulate(cfg, w: Writer):
    geom, model, d = C.geometry(cfg), C.friction(cfg), C.design(cfg)
    sim = cfg["simulation"]
    traj, metrics, cert = _simulate_design((d, geom, model, sim["steps_per_cycle"], sim["cycles"],
                                            sim["feasibility_samples"]))
    w.json("metrics.json", {"design": design_to_dict(d), "metrics": metrics.as_dict(), "certificate": cert})
    rows = [{"t": float(t), "x": float(p[0]), "y": float(p[1]), "heading_deg": float(np.degrees(p[2]))}
            for t, p in zip(traj.t, traj.poses)]
    w.csv("trajectory.csv", rows)
    w.svg("overhead.svg", svg.overhead(_centerlines(traj, geom, 4 * sim["cycles"] + 1),
                                       title=f"{metrics.angular_displacement:.1f} deg per cycle", meta=w.meta))
    return {"metrics": metrics.as_dict()}


def _sweep_design(cfg, value):
    p = cfg["sweep"]["parameter"]
    base = C.design(cfg)
    n = cfg["geometry"]["num_joints"]
    if p == "num_joints":
        n = int(value)
    elif p == "theta_max":
        base = base.with_params(theta_max=np.radians(value))
    else:
        base = base.with_params(**{p: float(value)})
    geom = ChainGeometry(n, cfg["geometry"]["link_length"], cfg["geometry"]["link_width"])
    source = cfg["sweep"]["designs"]
    if source == "frozen":
        pr = base.params()
        try:
            return frozen_design(n, pr["k_o"], pr["k_f"], float(np.degrees(pr["theta_max"]))), geom, None
        except KeyError as exc:
            raise C.ConfigError(str(exc.args[0])) from exc
    if source == "optimize":
        try:
            report = optimize(base, C.optimizer_config(cfg), geom, C.friction(cfg))
        except NoFeasibleStart as exc:
            raise SimulationError(f"{p}={value}: {exc}") from exc
        return report.best, geom, report
    return base, geom, None


def cmd_sweep(cfg, w: Writer):
    p = cfg["sweep"]["parameter"]
    values = cfg["sweep"]["values"]
    model, sim = C.friction(cfg), cfg["simulation"]
    picked = [_sweep_design(cfg, v) for v in values]
    results = _map(_simulate_design, [(d, g, model, sim["steps_per_cycle"], sim["cycles"],
                                       sim["feasibility_samples"]) for d, g, _ in picked])
    rows, reports = [], []
    for k, (v, (d, g, rep), (traj, m, cert)) in enumerate(zip(values, picked, results)):
        row = {p: v, **m.as_dict(), "area_per_degree": m.swept_area / abs(m.angular_displacement)
               if m.angular_displacement else float("nan"),
               "feasible": cert["feasible"], "num_joints": g.num_joints,
               **{f"design_{key}": val for key, val in design_to_dict(d).items()}}
        rows.append(row)
        if rep is not None:
            reports.append({p: v, **rep.to_dict()})
        w.svg(f"overhead_{k:02d}.svg", svg.overhead(_centerlines(traj, g, 13),
                                                    title=f"{p}={v:g}: {m.angular_displacement:.1f} deg",
                                                    meta=w.meta))
    best = max(range(len(rows)), key=lambda i: rows[i]["angular_displacement"])
    w.csv("sweep.csv", rows)
    w.json("sweep.json", {"parameter": p, "rows": rows, "argmax": values[best], "optimizer_reports": reports})
    w.svg("sweep.svg", svg.line_plot({"angular displacement (deg)": (values, [r["angular_displacement"]
                                                                             for r in rows])},
                                     xlabel=p, ylabel="deg per cycle", meta=w.meta))
    return {"argmax": values[best]}


def _height_setup(cfg):
    h = cfg["height"]
    d = C.design(cfg)
    n = cfg["geometry"]["num_joints"]
    if h["space"] == "geometric":
        r = np.radians(h["r_max"])
        grid = ShapeGrid(Axis("r1", -r, r, h["cells"]), Axis("r2", -r, r, h["cells"]))
        loop = geometric_coords(np.linspace(0, d.period, 201), d.with_params(k_o=d.k_f))
        return grid, geometric_embedding(h["k"], n), GaitPath(loop, (False, False))
    amax = 2.0 * d.theta_max
    if h["space"] == "turning":
        grid = ShapeGrid(periodic_axis("tau_o", h["tau_cells"]), Axis("A_o", 0.0, amax, h["amp_cells"]))
        embed = turning_embedding(d, n)
    elif h["space"] == "forward":
        grid = ShapeGrid(periodic_axis("tau_f", h["tau_cells"]), Axis("A_f", -amax, amax, h["amp_cells"]))
        embed = forward_embedding(d, n)
    else:
        grid = ShapeGrid(periodic_axis("tau_f", h["tau_cells"]), periodic_axis("tau_o", h["tau_cells"]))
        embed = phase_embedding(d, n)
    return grid, embed, gait_paths(d)[h["space"]]


def cmd_height(cfg, w: Writer):
    geom, model = C.geometry(cfg), C.friction(cfg)
    grid, embed, path = _height_setup(cfg)
    mask = build_feasibility_mask(grid, embed, C.feasibility(cfg), geom)
    try:
        conn = reduced_connection(grid, embed, model, geom, mask)
    except NonConvergence as exc:
        raise SimulationError(str(exc)) from exc
    rows, out = [], {}
    c1, c2 = grid.mesh()
    for name in ("forward", "lateral", "rotational"):
        hf = height_function(conn, name)
        out[name] = hf
    for i, j in np.ndindex(grid.shape):
        rows.append({grid.first.name: float(c1[i, j]), grid.second.name: float(c2[i, j]),
                     "feasible": bool(mask[i, j]),
                     **{f"{k}_height": float(out[k].values[i, j]) for k in out}})
    try:
        integral = surface_integral(out["rotational"], path)
    except (InfeasiblePath, ValueError):
        integral = float("nan")
    w.csv("height.csv", rows)
    w.json("height.json", {"space": cfg["height"]["space"], "axes": [grid.first.name, grid.second.name],
                           "shape": list(grid.shape), "feasible_fraction": float(mask.mean()),
                           "design_path_surface_integral_deg": float(np.degrees(integral))})
    lo = (grid.first.lower, grid.second.lower)
    hi = (grid.first.upper, grid.second.upper)
    w.svg("height.svg", svg.heatmap(out["rotational"].values, (lo[0], hi[0]), (lo[1], hi[1]),
                                    title=f"rotational height ({cfg['height']['space']})", meta=w.meta))
    return {"surface_integral_deg": float(np.degrees(integral))}


def cmd_optimize(cfg, w: Writer):
    geom, model, d = C.geometry(cfg), C.friction(cfg), C.design(cfg)
    try:
        report = optimize(d, C.optimizer_config(cfg), geom, model)
    except NoFeasibleStart as exc:
        raise SimulationError(str(exc)) from exc
    w.json("optimize.json", report.to_dict())
    w.json("design.json", {"design": design_to_dict(report.best)})
    w.csv("trace.csv", [{"outer": k, "objective_deg": v} for k, v in enumerate(report.trace)])
    return {"objective_deg": report.objective}


def cmd_compliant(cfg, w: Writer):
    geom, model, d, p = C.geometry(cfg), C.friction(cfg), C.design(cfg), C.admittance(cfg)
    c = cfg["compliance"]
    kw = {"damping": c["damping"], "load": c["load"]}
    try:
        rows = peg_study(d, c["spacings"], c["trials"], p, geom, model, c["cycles"], cfg["seed"],
                         peg_radius=c["peg_radius"], **kw)
    except NonConvergence as exc:
        raise SimulationError(str(exc)) from exc
    summary = summarize_study(rows)
    w.csv("compliant_runs.csv", rows)
    w.csv("compliant_summary.csv", summary)
    w.json("compliant.json", {"summary": summary})
    board = random_board(c["spacings"][0], cfg["seed"] * 1000003, geom.body_length, peg_radius=c["peg_radius"])
    run = simulate_compliant(d, board, p, geom, model, c["cycles"], True, **kw)
    w.svg("compliant.svg", svg.overhead(_centerlines(run.trajectory, geom, 9), run.pegs, board.peg_radius,
                                        title=f"spacing {board.spacing:g} BL", meta=w.meta))
    return {"summary": summary}


def cmd_multileg(cfg, w: Writer):
    m = cfg["multileg"]
    geom = C.multileg_geometry(cfg)
    grid = default_grid(m["phi_cells"], np.radians(m["w3_max"]), m["w3_cells"])
    try:
        hf = multileg_height_function(grid, geom)
        turns = [(a, multileg_turn(np.radians(a), m["omega"], geom, m["cycles"], m["steps_per_cycle"]))
                 for a in m["A3_values"]]
    except NonConvergence as exc:
        raise SimulationError(str(exc)) from exc
    rows = [{"A3_deg": a, **t.as_dict()} for a, t in turns]
    c1, c2 = grid.mesh()
    hrows = [{"phi": float(c1[i, j]), "w3_deg": float(np.degrees(c2[i, j])), "height": float(hf.values[i, j])}
             for i, j in np.ndindex(grid.shape)]
    bands = stripe_bands(hf)
    w.csv("multileg_sweep.csv", rows)
    w.csv("multileg_height.csv", hrows)
    w.json("multileg.json", {"stance_pattern": geom.stance_pattern, "rows": rows,
                             "bands": [{"sign": s, "start": a, "end": b} for s, a, b in bands]})
    w.svg("multileg_height.svg", svg.heatmap(hf.values, (grid.first.lower, grid.first.upper),
                                             (grid.second.lower, grid.second.upper), title="rotational height (phi, w3)",
                                             meta=w.meta))
    w.svg("multileg_sweep.svg", svg.line_plot({"rotation (deg)": ([r["A3_deg"] for r in rows],
                                                                  [r["angular_displacement"] for r in rows])},
                                              xlabel="A3 (deg)", ylabel="deg per cycle", meta=w.meta))
    a = max(m["A3_values"], key=abs)
    traj = multileg_trajectory(np.radians(a), m["omega"], geom, m["cycles"], m["steps_per_cycle"])
    w.svg("multileg_overhead.svg", svg.overhead(_centerlines(traj, geom.chain, 9),
                                                title=f"A3 = {a:g} deg", meta=w.meta))
    return {"rows": rows}


REPORT_SOURCES = {
    "sweep.csv": ("sweep", None),
    "compliant_summary.csv": ("compliant", "spacing"),
    "multileg_sweep.csv": ("multileg", "A3_deg"),
}


def cmd_report(cfg, w: Writer):
    """Collect the known result tables found under the output directory into one long table."""
    root = w.out
    rows = []
    for path in sorted(root.rglob("*.csv")):
        if path.name not in REPORT_SOURCES:
            continue
        study, key = REPORT_SOURCES[path.name]
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                k = key or next(c for c in rec if c not in ("config_hash",))
                for col, val in rec.items():
                    if col in ("config_hash", k) or col.startswith("design_"):
                        continue
                    rows.append({"source": str(path.relative_to(root)), "study": study, "key": k,
                                 "key_value": rec[k], "metric": col, "value": val,
                                 "source_config_hash": rec.get("config_hash", "")})
    w.csv("report.csv", rows)
    w.json("report.json", {"tables": sorted({r["source"] for r in rows}), "entries": len(rows)})
    return {"entries": len(rows)}


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "height": cmd_height,
    "optimize": cmd_optimize,
    "compliant": cmd_compliant,
    "multileg": cmd_multileg,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise C.ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="omegaturn", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file or the name of a shipped example (missing keys take defaults)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry, e.g. --set design.k_o=0.75")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    return ap


def _fail(code, kind, message, out=None):
    err = {"error": kind, "message": message, "exit_code": code}
    text = json.dumps(err, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    out = None
    try:
        args = build_parser().parse_args(argv)
        overrides = list(args.overrides)
        if args.out:
            overrides.append(f"output_dir={json.dumps(args.out)}")
        cfg = C.load_config(args.config, overrides)
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        writer = Writer(out, cfg)
        (out / "config.json").write_text(C.dumps(cfg))
        summary = COMMANDS[args.command](cfg, writer)
        print(json.dumps(_plain({"command": args.command, "output_dir": str(out), **writer.prov,
                                 "files": writer.files, **summary}), sort_keys=True))
        return EXIT_OK
    except C.ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", str(exc))
    except (SimulationError, NonConvergence, InfeasiblePath) as exc:
        return _fail(EXIT_SIMULATION, "SimulationError", str(exc), out)
    except OSError as exc:
        return _fail(EXIT_IO, "IOError", str(exc))
    except Exception as exc:  # noqa: BLE001 - still report machine-readably
        return _fail(EXIT_INTERNAL, type(exc).__name__, str(exc), out)


if __name__ == "__main__":
    sys.exit(main())
