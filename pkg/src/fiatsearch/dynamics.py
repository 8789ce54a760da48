"""Inventory dynamics: right-hand side, forward integration, fixed points."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import (FEAS_TOL, ModelParams, PiecewiseStrategyPath, StrategyProfile,
                   acceptance_tensor, holdings, local_grid, reduce_holdings)
from .errors import FeasibilityDrift, NoConvergence

DEFAULT_DT = 0.01
RELAX_LEG = 25.0


def inventory_rhs(p5, profile: StrategyProfile, params: ModelParams) -> np.ndarray:
    """Time derivative of the five free inventory coordinates."""
    return K.rhs5(np.asarray(p5, dtype=np.float64), acceptance_tensor(profile), params.packed())


def holdings_derivative(p5, profile: StrategyProfile, params: ModelParams) -> np.ndarray:
    """Derivative of the full 3x3 grid (rows: types, cols: i+1, i+2, m)."""
    P = holdings(p5, params)
    dP = K.full_rhs(P, acceptance_tensor(profile), params.packed())
    return local_grid(dP)


def production_rate(p5, profile: StrategyProfile, params: ModelParams) -> float:
    """Aggregate production flow: consumption events plus confiscations.

    Every consumption is followed by production and a confiscated money holder
    produces without consuming.
    """
    P = holdings(p5, params)
    acc = acceptance_tensor(profile)
    rate = 0.0
    for i in range(3):
        meet = sum(P[ip, i] * acc[ip, i, j] * P[i, j]
                   for ip in range(3) for j in range(4) if j != i)
        rate += params.alpha * meet
    return rate + params.delta_m * float(P[:, 3].sum())


@dataclass
class Trajectory:
    """Sampled inventory path.

    ``codes[k]`` is the profile code active on ``[times[k], times[k+1])``.
    """
    times: np.ndarray
    states: np.ndarray
    path: PiecewiseStrategyPath
    codes: np.ndarray
    params: ModelParams = field(repr=False)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def grids(self) -> np.ndarray:
        return np.stack([local_grid(holdings(p, self.params)) for p in self.states])


def _profile_table(path: PiecewiseStrategyPath):
    profs = path.profiles()
    accs = np.stack([acceptance_tensor(p) for p in profs])
    return profs, accs


def time_grid(t0: float, T: float, dt: float, switch_times=()) -> np.ndarray:
    """Uniform grid ``t0 + k dt`` on [t0, T] with the switching times inserted."""
    n = int(np.floor((T - t0) / dt + 1e-9))
    base = t0 + dt * np.arange(n + 1)
    pts = [base, [T]] + [[s] for s in switch_times if t0 < s < T]
    grid = np.unique(np.concatenate(pts))
    keep = np.concatenate(([True], np.diff(grid) > 1e-12))
    return grid[keep]


def interval_indices(times: np.ndarray, path: PiecewiseStrategyPath) -> np.ndarray:
    """Index into ``path.profiles()`` of the profile on each grid interval."""
    sw = np.asarray(path.switch_times, dtype=float)
    # a switch at t_h takes effect for intervals starting at t >= t_h
    return np.searchsorted(sw, times[:-1], side="right").astype(np.int64)


def check_trajectory(states: np.ndarray, params: ModelParams, tol: float = FEAS_TOL) -> None:
    th = np.asarray(params.theta)
    for k, p in enumerate(states):
        P = holdings(p, params)
        if not np.all(np.isfinite(P)) or P.min() < -tol or np.any(P.max(axis=1) > th + tol):
            raise FeasibilityDrift(f"inventory left the feasible set at sample {k}: {p}")


def integrate_forward(p0, path: PiecewiseStrategyPath, T: float, dt: float,
                      params: ModelParams, t0: float = 0.0, check: bool = True) -> Trajectory:
    """Fixed-step RK4 from ``t0`` to ``T``; steps are split at switching times."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T <= t0:
        raise ValueError("horizon must exceed the start time")
    p0 = np.asarray(p0, dtype=np.float64)
    times = time_grid(t0, T, dt, path.switch_times)
    profs, accs = _profile_table(path)
    idx = interval_indices(times, path)
    states = K.rk4_forward(p0, times, idx, accs, params.packed())
    if check:
        check_trajectory(states, params)
    codes = np.array([profs[k].code for k in idx], dtype=np.int64)
    return Trajectory(times, states, path, codes, params)


def extend(traj: Trajectory, T: float, dt: float, check: bool = True) -> Trajectory:
    """Continue a trajectory to a longer horizon."""
    more = integrate_forward(traj.final, traj.path, T, dt, traj.params,
                             t0=traj.horizon, check=check)
    return Trajectory(np.concatenate([traj.times, more.times[1:]]),
                      np.concatenate([traj.states, more.states[1:]]),
                      traj.path, np.concatenate([traj.codes, more.codes]), traj.params)


# ---------------------------------------------------------------- fixed points

def default_starts(params: ModelParams) -> list[np.ndarray]:
    """Centroid plus four corner-leaning points of the feasible polytope."""
    th = np.asarray(params.theta)
    M = params.M
    prop = M * th
    greedy_fwd = np.zeros(3)
    greedy_bwd = np.zeros(3)
    left = M
    for i in range(3):
        greedy_fwd[i] = min(th[i], left)
        left -= greedy_fwd[i]
    left = M
    for i in (2, 1, 0):
        greedy_bwd[i] = min(th[i], left)
        left -= greedy_bwd[i]

    def build(money, share_next):
        goods = th - money
        grid = np.column_stack([goods * share_next, goods * (1 - share_next), money])
        return np.array([grid[0, 0], grid[1, 0], grid[2, 0], grid[0, 2], grid[1, 2]])

    return [build(prop, 0.5), build(prop, 0.95), build(prop, 0.05),
            build(greedy_fwd, 0.8), build(greedy_bwd, 0.2)]


@dataclass
class FixedPointSearch:
    points: list[np.ndarray]
    residuals: list[float]
    failures: list[str]
    agreement: bool


def find_fixed_point(profile: StrategyProfile, params: ModelParams, starts=None,
                     tol: float = 1e-13, dedupe: float = 1e-8, maxit: int = 60,
                     relax_time: float = 400.0) -> FixedPointSearch:
    """Stationary inventories under a constant profile.

    Each start gets a damped, feasibility-preserving Newton solve.  Starts on
    which Newton stalls are relaxed along the flow, up to ``relax_time``, and
    polished again; starts that still fail are reported, not raised.
    """
    acc = acceptance_tensor(profile)
    prm = params.packed()
    starts = default_starts(params) if starts is None else [np.asarray(s, float) for s in starts]
    if not starts:
        raise ValueError("at least one start is required")
    points, resid, failures = [], [], []
    for n, s in enumerate(starts):
        p, r, ok = K.newton(s, acc, prm, maxit, tol)
        q, spent = s, 0.0
        while not ok and spent < relax_time:
            # follow the flow in short legs, polishing after each
            leg = min(RELAX_LEG, relax_time - spent)
            q = K.relax(q, acc, prm, leg, 0.05)
            spent += leg
            p, r, ok = K.newton(q, acc, prm, maxit, tol)
        if not ok:
            failures.append(f"start {n}: residual {r:.3e}")
            continue
        if params.M == 0:
            # feasibility pins both money shares to zero
            p = p.copy()
            p[3:] = 0.0
        for k, q in enumerate(points):
            if np.max(np.abs(q - p)) <= dedupe:
                break
        else:
            points.append(p)
            resid.append(float(r))
    return FixedPointSearch(points, resid, failures,
                            agreement=len(points) == 1 and not failures)


def fixed_point(profile: StrategyProfile, params: ModelParams, **kw) -> np.ndarray:
    """The fixed point, raising when there is none or the starts disagree."""
    res = find_fixed_point(profile, params, **kw)
    if not res.points:
        raise NoConvergence(f"no fixed point for {profile}: {res.failures}")
    if len(res.points) > 1:
        raise NoConvergence(f"{len(res.points)} distinct fixed points for {profile}")
    return res.points[0]


def integrate_full(p0, path: PiecewiseStrategyPath, T: float, dt: float,
                   params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Integrate all holding cells independently; returns (times, (n, 3, 3) grids).

    Used to audit conservation: nothing here enforces the row or money sums.
    """
    times = time_grid(0.0, T, dt, path.switch_times)
    _, accs = _profile_table(path)
    idx = interval_indices(times, path)
    full = K.rk4_full(holdings(p0, params), times, idx, accs, params.packed())
    return times, np.stack([local_grid(P) for P in full])


def conservation_drift(grids: np.ndarray, params: ModelParams) -> tuple[float, float]:
    """(max per-type sum drift, max money-total drift) over a grid series."""
    rows = np.max(np.abs(grids.sum(axis=2) - np.asarray(params.theta)))
    money = np.max(np.abs(grids[:, :, 2].sum(axis=1) - params.M))
    return float(rows), float(money)


__all__ = ["inventory_rhs", "holdings_derivative", "production_rate", "Trajectory",
           "integrate_forward", "extend", "time_grid", "default_starts",
           "find_fixed_point", "fixed_point", "FixedPointSearch", "reduce_holdings",
           "integrate_full", "conservation_drift"]
