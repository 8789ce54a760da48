"""Stable CSV/JSON serialization of results."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import StrategyProfile
from .steadystate import SteadyStateRecord

FLOAT_FMT = ".17g"

STEADY_HEADER = (["profile", "s3"] + [f"p{k}" for k in ("12", "23", "31", "1m", "2m")]
                 + [f"V{i}_{j}" for i in (1, 2, 3) for j in ("a", "b", "m")]
                 + ["is_nash", "knife_edge", "margin", "residual", "multi_start_agreement", "note"])


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return format(x, FLOAT_FMT)
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, StrategyProfile):
        return obj.label
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------- steady states

def steady_row(r: SteadyStateRecord) -> list:
    return ([r.profile.label, "".join(map(str, r.profile.third_row))] + list(r.p_star)
            + list(np.asarray(r.V_star).ravel())
            + [r.is_nash, r.knife_edge, r.margin, r.residual, r.multi_start_agreement, r.note])


def write_steady_csv(path, records) -> Path:
    return write_csv(path, STEADY_HEADER, (steady_row(r) for r in records))


def read_steady_csv(path) -> list[dict]:
    """Parse a steady-state CSV back into typed fields."""
    out = []
    for row in read_csv(path):
        out.append({
            "profile": StrategyProfile.parse(row["profile"]),
            "p_star": np.array([float(row[h]) for h in STEADY_HEADER[2:7]]),
            "V_star": np.array([float(row[h]) for h in STEADY_HEADER[7:16]]).reshape(3, 3),
            "is_nash": row["is_nash"] == "1",
            "knife_edge": row["knife_edge"] == "1",
            "margin": float(row["margin"]),
            "residual": float(row["residual"]),
            "multi_start_agreement": row["multi_start_agreement"] == "1",
            "note": row["note"],
        })
    return out


__all__ = ["fmt", "write_csv", "read_csv", "write_json", "write_steady_csv", "read_steady_csv",
           "steady_row", "STEADY_HEADER", "FLOAT_FMT"]
