"""Nash steady states and the forward/backward best-response iteration."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bestresponse import (DEADBAND, DEFAULT_CAP, extract_switches, path_distance,
                           sigma_from_values, sign_bits)
from .core import ModelParams, PiecewiseStrategyPath, StrategyProfile
from .dynamics import DEFAULT_DT, Trajectory, extend, integrate_forward
from .errors import DivergenceError, NoConvergence, TooManySwitches
from .valuation import ValuePath, integrate_value_backward, steady_value

KNIFE_EDGE = 1e-10


@dataclass
class NashVerdict:
    is_nash: bool
    margin: float
    V: np.ndarray
    deltas: np.ndarray
    best_response: StrategyProfile
    mismatches: list = field(default_factory=list)

    @property
    def knife_edge(self) -> bool:
        return self.margin < KNIFE_EDGE

    def __bool__(self):
        return self.is_nash


def _row_deltas(V) -> np.ndarray:
    V = np.asarray(V).reshape(3, 3)
    return np.stack([V[:, 0] - V[:, 2], V[:, 1] - V[:, 2], V[:, 0] - V[:, 1]], axis=1)


def verify_nash_steady(s: StrategyProfile, p, params: ModelParams) -> NashVerdict:
    """Check every stored bit of ``s`` against the sign of its value difference.

    ``deltas[i, b]`` is V_j - V_k behind bit b of type i; the bit must be 1
    when it is negative and 0 when positive.  Dead-band ties do not count as
    contradictions but pull the margin to zero.
    """
    V = steady_value(p, s, params)
    d = _row_deltas(V)
    mism = []
    for i in range(3):
        for b in range(3):
            bit = s.types[i].bits[b]
            if (bit == 1 and d[i, b] > DEADBAND) or (bit == 0 and d[i, b] < -DEADBAND):
                mism.append((i + 1, b))
    return NashVerdict(not mism, float(np.min(np.abs(d))), V, d,
                       sigma_from_values(V, tie=s), mism)


@dataclass
class NashResult:
    converged: bool
    iterations: int
    final_gap: float
    trajectory: Trajectory
    strategy_path: PiecewiseStrategyPath
    value_path: ValuePath
    target: object
    best_response: PiecewiseStrategyPath | None = None
    history: list = field(default_factory=list)

    @property
    def switches(self) -> list:
        return self.strategy_path.events()


def _target_parts(target, params):
    prof = target.profile
    p_star = np.asarray(target.p_star, dtype=float)
    V_star = getattr(target, "V_star", None)
    if V_star is None:
        V_star = steady_value(p_star, prof, params)
    return prof, p_star, np.asarray(V_star, dtype=float)


def _reach(p0, path, p_star, params, T, dt, eps, T_max):
    """Forward run whose horizon grows by half until p(T) is within ``eps``."""
    traj = integrate_forward(p0, path, T, dt, params)
    while np.linalg.norm(traj.final - p_star) > eps:
        if traj.horizon >= T_max:
            raise NoConvergence(
                f"inventory still {np.linalg.norm(traj.final - p_star):.2e} from the target "
                f"at T={traj.horizon:g}")
        T = min(1.5 * traj.horizon, T_max)
        traj = extend(traj, T, dt)
    return traj


def find_nash_path(p0, target, params: ModelParams, s0: PiecewiseStrategyPath | None = None,
                   tol: float = 1e-4, dt: float = DEFAULT_DT, eps: float = 1e-8,
                   T0: float = 100.0, T_max: float = 5000.0, max_iter: int = 50,
                   cap: int = DEFAULT_CAP) -> NashResult:
    """Iterate s -> best response to s until switching times settle.

    ``target`` needs ``profile`` and ``p_star`` attributes (and optionally
    ``V_star``).  Each pass integrates inventories forward under the current
    guess to within ``eps`` of the target, integrates values backward from
    V*, and reads the best-response path off the value differences.
    """
    prof, p_star, V_star = _target_parts(target, params)
    s = PiecewiseStrategyPath.constant(prof) if s0 is None else s0
    T = T0
    history = []
    gap = math.inf
    for n in range(1, max_iter + 1):
        if s.tail != prof:
            raise NoConvergence(f"guess ends in {s.tail}, target is {prof}")
        last = s.switch_times[-1] if len(s) else 0.0
        T = max(T, 2.0 * last + 10.0)
        traj = _reach(p0, s, p_star, params, T, dt, eps, T_max)
        T = traj.horizon
        vp = integrate_value_backward(traj, V_star, params)
        sigma = extract_switches(vp, cap=cap)
        gap = path_distance(sigma, s)
        history.append(gap)
        if gap <= tol:
            return NashResult(True, n, gap, traj, s, vp, target, sigma, history)
        if sigma.tail != prof:
            raise NoConvergence(f"best response leaves the target profile: tail {sigma.tail}")
        s = sigma
    raise NoConvergence(f"no fixed point after {max_iter} iterations; last gap {gap}, "
                        f"last switches {s.events()}")


@dataclass
class Certificate:
    passed: bool
    gap: float
    best_response: PiecewiseStrategyPath


def certify(result: NashResult, tol: float = 1e-4) -> Certificate:
    """Independent no-deviation check.

    Values are integrated with every agent bound to the returned path; the
    sign rule applied to those values must reproduce the path.
    """
    traj = result.trajectory
    _, _, V_star = _target_parts(result.target, traj.params)
    vp = integrate_value_backward(traj, V_star, own="fixed")
    signed = ValuePath(vp.times, vp.V, sign_bits(vp), traj)
    br = extract_switches(signed, fixed_own=True)
    gap = path_distance(br, result.strategy_path)
    return Certificate(gap <= tol, gap, br)


def probe_multiplicity(p0, params: ModelParams, seeds, threads: int = 1, **kw) -> list[NashResult]:
    """Dynamic equilibria from ``p0`` toward each seed steady state.

    Seeds that fail to converge are dropped; results keep the seed order and
    are distinct by target profile.
    """
    seeds = list(seeds)

    def run(seed):
        try:
            return find_nash_path(p0, seed, params, **kw)
        except (NoConvergence, TooManySwitches, DivergenceError):
            return None

    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    out, seen = [], set()
    for r in results:
        if r is not None and r.target.profile not in seen:
            seen.add(r.target.profile)
            out.append(r)
    return out


__all__ = ["NashVerdict", "verify_nash_steady", "NashResult", "find_nash_path", "Certificate",
           "certify", "probe_multiplicity", "KNIFE_EDGE"]
