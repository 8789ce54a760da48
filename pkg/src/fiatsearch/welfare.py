"""Group, society and government welfare on steady states and along paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ModelParams, holdings, local_grid
from .errors import NoConvergence
from .steadystate import enumerate_steady_states, nash_filter


@dataclass
class WelfareReport:
    W_i: np.ndarray
    W: float
    Q: float
    W_G: float

    def row(self) -> list[float]:
        return [*map(float, self.W_i), self.W, self.Q, self.W_G]


def group_payoffs(p, V, params: ModelParams) -> np.ndarray:
    """W_i = sum_j p_{i,j} V_{i,j} / theta_i."""
    G = local_grid(holdings(p, params))
    V = np.asarray(V, dtype=float).reshape(3, 3)
    return (G * V).sum(axis=1) / np.asarray(params.theta)


def seignorage_value(params: ModelParams) -> float:
    """Present value of the government's consumption stream, M delta_m / rho_g."""
    return params.M * params.delta_m / params.rho_g


def government_welfare(Q: float, W: float, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return (1.0 - lam) * Q + lam * W


def group_welfare(p, V, params: ModelParams) -> WelfareReport:
    W_i = group_payoffs(p, V, params)
    W = float(np.dot(params.theta, W_i))
    Q = seignorage_value(params)
    return WelfareReport(W_i, W, Q, government_welfare(Q, W, params.lam))


def path_welfare(value_path) -> np.ndarray:
    """(n, 4) array of W_1, W_2, W_3, W along a value path."""
    traj = value_path.trajectory
    out = np.empty((len(value_path.times), 4))
    for k, (p, V) in enumerate(zip(traj.states, value_path.V)):
        W_i = group_payoffs(p, V, traj.params)
        out[k, :3] = W_i
        out[k, 3] = np.dot(traj.params.theta, W_i)
    return out


# ---------------------------------------------------------------- curves

SELECTIONS = ("max", "min", "full")


def select_equilibrium(records, params: ModelParams, selection: str = "max"):
    """Pick one steady-state equilibrium to evaluate welfare on.

    ``max``/``min`` rank strict Nash records by W; ``full`` takes the
    equilibrium with the most money-acceptance bits, then the highest W.
    Records that are non-monetary are ignored when any monetary one exists.
    """
    if selection not in SELECTIONS:
        raise ValueError(f"selection must be one of {SELECTIONS}")
    cands = nash_filter(records, monetary_only=params.M > 0)
    if not cands:
        raise NoConvergence("no Nash steady state to evaluate")
    scored = [(group_welfare(r.p_star, r.V_star, params), r) for r in cands]
    if selection == "max":
        return max(scored, key=lambda x: x[0].W)
    if selection == "min":
        return min(scored, key=lambda x: x[0].W)
    money_bits = lambda r: sum(t.bits[0] + t.bits[1] for t in r.profile.types)  # noqa: E731
    return max(scored, key=lambda x: (money_bits(x[1]), x[0].W))


def steady_welfare(params: ModelParams, selection: str = "max", threads: int = 1):
    """(WelfareReport, record) for the selected Nash steady state at ``params``."""
    report = enumerate_steady_states(params, threads=threads)
    return select_equilibrium(report.records, params, selection)


def welfare_curve(base: ModelParams, axis: str, grid, selection: str = "max",
                  threads: int = 1) -> list[dict]:
    """Welfare of the selected equilibrium along a 1-D grid over ``M`` or ``delta_m``."""
    if axis not in ("M", "delta_m"):
        raise ValueError("axis must be 'M' or 'delta_m'")
    rows = []
    for x in grid:
        prm = base.replace(**{axis: float(x)})
        try:
            rep, rec = steady_welfare(prm, selection, threads)
            rows.append({axis: float(x), "profile": rec.profile.label, "report": rep, "error": ""})
        except NoConvergence as e:
            rows.append({axis: float(x), "profile": "", "report": None, "error": str(e)})
    return rows


__all__ = ["WelfareReport", "group_payoffs", "group_welfare", "seignorage_value",
           "government_welfare", "path_welfare", "select_equilibrium", "steady_welfare",
           "welfare_curve"]
