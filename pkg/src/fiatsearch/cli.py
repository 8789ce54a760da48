"""Command-line front end: ``fiatsearch {steady,nash,sweep,welfare}``.

Every command reads one JSON config (schema in the README) and writes CSV or
JSON files into ``--out``.  Exit codes: 0 ok, 2 config error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .core import (BASELINE, ModelParams, PiecewiseStrategyPath, StrategyProfile, is_feasible,
                   validate_params)
from .dynamics import DEFAULT_DT, fixed_point, production_rate
from .errors import (DivergenceError, DomainError, FeasibilityDrift, NoConvergence,
                     SingularSystem, TooManySwitches)
from .nash import certify, find_nash_path, verify_nash_steady
from .steadystate import enumerate_steady_states, steady_record
from .welfare import path_welfare, welfare_curve

log = logging.getLogger("fiatsearch")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
SOLVER_ERRORS = (NoConvergence, TooManySwitches, DivergenceError, FeasibilityDrift, SingularSystem)


class ConfigError(DomainError):
    pass


# ---------------------------------------------------------------- config parsing

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def params_from(block: dict, base: dict | None = None) -> ModelParams:
    """Params from a config block; ``model`` pulls in a baseline calibration."""
    raw = dict(base or {})
    block = dict(block or {})
    model = block.pop("model", None)
    if model is not None:
        if str(model).upper() not in BASELINE:
            raise ConfigError(f"unknown model {model!r}")
        raw = {**BASELINE[str(model).upper()], "theta": (1 / 3, 1 / 3, 1 / 3), **raw}
    raw.update(block)
    return validate_params(raw)


def grid_values(spec, name: str) -> list[float]:
    """A grid given as a list or as ``{"start", "stop", "step"}`` (inclusive)."""
    if isinstance(spec, (int, float)):
        vals = [float(spec)]
    elif isinstance(spec, list):
        vals = [float(x) for x in spec]
    elif isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except KeyError as e:
            raise ConfigError(f"grid {name} needs start, stop and step") from e
        if step <= 0:
            raise ConfigError(f"grid {name}: step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9))
        vals = [round(start + k * step, 12) for k in range(n + 1)]
    else:
        raise ConfigError(f"grid {name} has an unsupported form")
    if not vals:
        raise ConfigError(f"grid {name} is empty")
    return vals


def theta_values(spec) -> list[tuple[float, float, float]]:
    if isinstance(spec, dict) and "simplex" in spec:
        n = int(spec["simplex"])
        if n < 3:
            raise ConfigError("simplex resolution must be at least 3")
        pts = [(a / n, b / n, (n - a - b) / n) for a in range(1, n) for b in range(1, n - a)]
    elif isinstance(spec, list):
        pts = [tuple(float(x) for x in t) for t in spec]
    else:
        raise ConfigError("theta grid must be a list of triples or {\"simplex\": n}")
    if not pts:
        raise ConfigError("theta grid is empty")
    return pts


def section(cfg: dict, name: str) -> dict:
    block = cfg.get(name, {})
    if not isinstance(block, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return block


def _threads(cfg, args) -> int:
    n = args.threads if args.threads is not None else cfg.get("threads", os.cpu_count() or 1)
    if int(n) < 1:
        raise ConfigError("threads must be >= 1")
    return int(n)


def _positive(value, name):
    value = float(value)
    if not value > 0:
        raise ConfigError(f"{name} must be positive")
    return value


def parse_path(spec) -> PiecewiseStrategyPath:
    if isinstance(spec, str):
        return PiecewiseStrategyPath.constant(StrategyProfile.parse(spec))
    bps = tuple((float(t), StrategyProfile.parse(lbl)) for t, lbl in spec.get("breakpoints", []))
    return PiecewiseStrategyPath(StrategyProfile.parse(spec["initial"]), bps)


# ---------------------------------------------------------------- commands

def cmd_steady(cfg: dict, out: Path, args) -> int:
    params = params_from(cfg.get("params", {}))
    block = section(cfg, "steady")
    rep = enumerate_steady_states(params, threads=_threads(cfg, args))
    recs = rep.records
    if block.get("nash_only"):
        recs = [r for r in recs if r.is_nash]
    io.write_steady_csv(out / "steady_states.csv", recs)
    io.write_json(out / "steady_diagnostics.json",
                  {"attempted": rep.attempted, "records": len(rep.records),
                   "failures": rep.failures, "params": params.to_dict()})
    log.info("%d profiles, %d fixed points, %d Nash", rep.attempted, len(rep.records),
             sum(r.is_nash for r in rep.records))
    return EXIT_OK


def _initial_inventory(spec, params: ModelParams):
    """``p0`` as a 5-vector or as the steady state of a profile under other params."""
    if isinstance(spec, dict):
        prof = StrategyProfile.parse(spec["steady"])
        pre = params_from(spec.get("params", {}), params.to_dict())
        p0 = fixed_point(prof, pre)
        return p0, {"profile": prof.label, "params": pre.to_dict(), "p": p0,
                    "is_nash": verify_nash_steady(prof, p0, pre).is_nash,
                    "production": production_rate(p0, prof, pre)}
    p0 = np.asarray(spec, dtype=float)
    if p0.shape != (5,) or not is_feasible(p0, params):
        raise ConfigError(f"p0 must be a feasible 5-vector, got {spec}")
    return p0, None


def _bit_name(i: int, b: int) -> str:
    nxt, far = i % 3 + 1, (i + 1) % 3 + 1
    return [f"s{i}[{nxt},m]", f"s{i}[{far},m]", f"s{i}[{nxt},{far}]"][b]


def cmd_nash(cfg: dict, out: Path, args) -> int:
    params = params_from(cfg.get("params", {}))
    block = section(cfg, "nash")
    if "p0" not in block or "target" not in block:
        raise ConfigError("nash section needs p0 and target")
    p0, pre = _initial_inventory(block["p0"], params)
    prof = StrategyProfile.parse(block["target"])
    target = steady_record(prof, fixed_point(prof, params), params)
    if not target.is_nash:
        raise NoConvergence(f"target {prof} is not a Nash steady state at these parameters")
    dt = _positive(args.dt if args.dt is not None else cfg.get("dt", DEFAULT_DT), "dt")
    tol = _positive(args.tol if args.tol is not None else cfg.get("tol", 1e-4), "tol")
    s0 = parse_path(block["s0"]) if "s0" in block else None
    res = find_nash_path(p0, target, params, s0=s0, tol=tol, dt=dt,
                         eps=float(block.get("eps", 1e-8)), T0=float(block.get("T0", 100.0)),
                         T_max=float(block.get("T_max", 5000.0)),
                         max_iter=int(block.get("max_iter", 50)))
    cert = certify(res, tol)
    stride = max(1, int(block.get("stride", 10)))
    traj, vp, path = res.trajectory, res.value_path, res.strategy_path
    W = path_welfare(vp)
    header = (["t", "profile"] + io.STEADY_HEADER[2:7] + io.STEADY_HEADER[7:16]
              + ["W1", "W2", "W3", "W", "production"])
    keep = sorted(set(range(0, len(traj.times), stride)) | {len(traj.times) - 1})
    rows = []
    for k in keep:
        t = traj.times[k]
        pr = path.profile_at(t)
        rows.append([t, pr.label, *traj.states[k], *vp.V[k].ravel(), *W[k],
                     production_rate(traj.states[k], pr, params)])
    io.write_csv(out / "trajectory.csv", header, rows)
    io.write_json(out / "switches.json", {
        "converged": res.converged, "iterations": res.iterations, "final_gap": res.final_gap,
        "gap_history": res.history, "initial": path.initial,
        "breakpoints": [{"t": t, "profile": p} for t, p in path.breakpoints],
        "events": [{"t": t, "type": i, "bit": _bit_name(i, b), "value": v}
                   for t, i, b, v in path.events()],
        "certificate": {"passed": cert.passed, "gap": cert.gap},
        "target": {"profile": prof, "p_star": target.p_star, "margin": target.margin},
        "pre_shock": pre, "params": params.to_dict(), "horizon": traj.horizon,
    })
    log.info("converged in %d iterations, %d switching times", res.iterations, len(path))
    return EXIT_OK


SWEEP_HEADER = ["M", "delta_m", "theta1", "theta2", "theta3", "n_nash", "profiles", "s3",
                "margins", "error"]


def sweep_cell(params: ModelParams) -> list:
    th = params.theta
    try:
        rep = enumerate_steady_states(params)
        nash = rep.nash(monetary_only=params.M > 0)
        return [params.M, params.delta_m, *th, len(nash), ";".join(r.profile.label for r in nash),
                ";".join("".join(map(str, r.profile.third_row)) for r in nash),
                ";".join(io.fmt(r.margin) for r in nash), ""]
    except (DomainError, *SOLVER_ERRORS) as e:
        return [params.M, params.delta_m, *th, 0, "", "", "", f"{type(e).__name__}: {e}"]


def sweep_cells(cfg: dict) -> list[ModelParams]:
    params = params_from(cfg.get("params", {}))
    block = section(cfg, "sweep")
    if "theta" in block:
        return [params.replace(theta=t) for t in theta_values(block["theta"])]
    Ms = grid_values(block.get("M", params.M), "M")
    dms = grid_values(block.get("delta_m", params.delta_m), "delta_m")
    return [params.replace(M=m, delta_m=d) for m in Ms for d in dms]


def cmd_sweep(cfg: dict, out: Path, args) -> int:
    try:
        cells = sweep_cells(cfg)
    except DomainError as e:
        raise ConfigError(str(e)) from e
    n = _threads(cfg, args)
    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            rows = list(ex.map(sweep_cell, cells))
    else:
        rows = [sweep_cell(c) for c in cells]
    io.write_csv(out / "regions.csv", SWEEP_HEADER, rows)
    log.info("%d cells", len(rows))
    return EXIT_OK


WELFARE_HEADER = ["profile", "W1", "W2", "W3", "W", "Q", "W_G", "error"]


def cmd_welfare(cfg: dict, out: Path, args) -> int:
    params = params_from(cfg.get("params", {}))
    block = section(cfg, "welfare")
    axis = block.get("axis", "M")
    if axis not in ("M", "delta_m"):
        raise ConfigError("welfare axis must be 'M' or 'delta_m'")
    grid = grid_values(block.get("grid", []), axis)
    selection = block.get("selection", "max")
    if selection not in ("max", "min", "full"):
        raise ConfigError(f"unknown selection rule {selection!r}")
    rows = welfare_curve(params, axis, grid, selection, _threads(cfg, args))
    body = []
    for r in rows:
        vals = r["report"].row() if r["report"] is not None else [float("nan")] * 6
        body.append([r[axis], r["profile"], *vals, r["error"]])
    io.write_csv(out / "welfare.csv", [axis] + WELFARE_HEADER, body)
    return EXIT_OK


COMMANDS = {"steady": cmd_steady, "nash": cmd_nash, "sweep": cmd_sweep, "welfare": cmd_welfare}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fiatsearch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--dt", type=float, default=None, help="integration step")
        sp.add_argument("--tol", type=float, default=None, help="switching-time tolerance")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except SOLVER_ERRORS as e:
        print(f"solver failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, KeyError, TypeError, ValueError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
