"""Steady states of all 216 constant profiles, their Nash status and M = 0 closed forms."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ModelParams, StrategyProfile, all_profiles
from .dynamics import find_fixed_point, inventory_rhs
from .errors import DomainError, Unsupported
from .nash import KNIFE_EDGE, verify_nash_steady
from .valuation import steady_residual

UNSTABLE_NOTE = "stability not guaranteed"


@dataclass
class SteadyStateRecord:
    profile: StrategyProfile
    p_star: np.ndarray
    V_star: np.ndarray
    is_nash: bool
    margin: float
    residual: float
    multi_start_agreement: bool
    value_residual: float = 0.0
    note: str = ""

    @property
    def knife_edge(self) -> bool:
        return self.margin < KNIFE_EDGE

    @property
    def monetary(self) -> bool:
        """False when no type ever trades a commodity for money."""
        return any(t.bits[0] or t.bits[1] for t in self.profile.types)

    @property
    def strict_nash(self) -> bool:
        return self.is_nash and not self.knife_edge


def steady_record(profile: StrategyProfile, p_star, params: ModelParams,
                  agreement: bool = True) -> SteadyStateRecord:
    p_star = np.asarray(p_star, dtype=float)
    verdict = verify_nash_steady(profile, p_star, params)
    resid = float(np.max(np.abs(inventory_rhs(p_star, profile, params))))
    note = UNSTABLE_NOTE if profile.third_row == (1, 1, 1) else ""
    return SteadyStateRecord(profile, p_star, verdict.V, verdict.is_nash, verdict.margin, resid,
                             agreement, steady_residual(verdict.V, p_star, profile, params), note)


@dataclass
class SteadyStateReport:
    params: ModelParams
    records: list[SteadyStateRecord]
    failures: dict = field(default_factory=dict)
    attempted: int = 0

    def nash(self, monetary_only: bool = False, strict: bool = True) -> list[SteadyStateRecord]:
        return nash_filter(self.records, monetary_only, strict)

    def by_profile(self, profile) -> list[SteadyStateRecord]:
        if isinstance(profile, str):
            profile = StrategyProfile.parse(profile)
        return [r for r in self.records if r.profile == profile]


def nash_filter(records, monetary_only: bool = False, strict: bool = True):
    """Nash records, optionally dropping knife-edge and non-monetary ones."""
    out = []
    for r in records:
        if not r.is_nash or (strict and r.knife_edge) or (monetary_only and not r.monetary):
            continue
        out.append(r)
    return out


def _solve_profile(profile: StrategyProfile, params: ModelParams, starts):
    search = find_fixed_point(profile, params, starts)
    recs = [steady_record(profile, p, params, search.agreement) for p in search.points]
    return recs, search.failures


def enumerate_steady_states(params: ModelParams, profiles=None, starts=None,
                            threads: int = 1) -> SteadyStateReport:
    """Fixed point, steady values and Nash verdict for every profile.

    Every distinct fixed point found from the multi-start search is kept.
    Starts that fail are listed in ``failures`` keyed by profile label.
    """
    profiles = all_profiles() if profiles is None else list(profiles)

    def run(pr):
        return _solve_profile(pr, params, starts)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, profiles))
    else:
        results = [run(pr) for pr in profiles]
    records, failures = [], {}
    for pr, (recs, fails) in zip(profiles, results):
        records.extend(recs)
        if fails:
            failures[pr.label] = fails
    return SteadyStateReport(params, records, failures, len(profiles))


# ---------------------------------------------------------------- M = 0 closed forms

def _root(b: float, c: float) -> float:
    """Positive root of x^2 + b x - c = 0 for b, c > 0."""
    return 0.5 * (-b + math.sqrt(b * b + 4 * c))


def analytic_m0_steady(s3, theta=(1 / 3, 1 / 3, 1 / 3)) -> np.ndarray:
    """Closed-form M = 0 steady state for a third-row pattern ``s3``.

    Returns the 5-vector with zero money holdings.
    """
    s3 = tuple(int(b) for b in s3)
    t1, t2, t3 = (float(x) for x in theta)
    if s3 == (1, 1, 1):
        raise Unsupported("no closed form for (1,1,1): global stability is not established")
    if s3 == (0, 1, 0):
        p = (t1, t1 * t2 / (t1 + t3), t3)
    elif s3 == (1, 1, 0):
        p23 = _root(t1 + t3, t1 * t2)
        p = (t1 * t3 / (t3 + p23), p23, t3)
    elif s3 == (1, 0, 1):
        p12 = _root(t3 + t2, t3 * t1)
        p = (p12, t2, t2 * t3 / (p12 + t2))
    elif s3 == (0, 1, 1):
        p31 = _root(t2 + t1, t2 * t3)
        p = (t1, t1 * t2 / (p31 + t1), p31)
    else:
        raise Unsupported(f"no closed form implemented for {s3}")
    return np.array(list(p) + [0.0, 0.0])


# ---------------------------------------------------------------- existence conditions

@dataclass
class Condition:
    """``lhs < rhs`` is the passing direction."""
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _full(s3, theta) -> dict:
    t1, t2, t3 = theta
    p12, p23, p31 = analytic_m0_steady(s3, theta)[:3]
    return {"p12": p12, "p13": t1 - p12, "p23": p23, "p21": t2 - p23, "p31": p31, "p32": t3 - p31}


def existence_conditions(model: str, params: ModelParams) -> dict[str, Condition]:
    """Cost-versus-liquidity inequalities for the M = 0 steady states.

    Holdings are evaluated at the closed-form steady state of the profile each
    inequality supports.  Model A: "CF" (fundamental (0,1,0)) needs
    p31 - p21 < (c3 - c2)/(u1 alpha); "CS" (speculative (1,1,0)) needs the
    reverse.  Model B ((0,1,1)): "cond1b" needs p32 - p12 < (c3 - c1)/(u2 alpha)
    and "cond2b" needs (c2 - c3)/(u1 alpha) < p21.  Model B's (1,0,1) needs
    no cost condition.
    """
    if params.M != 0:
        raise DomainError("existence conditions are stated for M = 0")
    th, u, c, a = params.theta, params.u, params.c, params.alpha
    model = model.upper()
    if model == "A":
        gap = (c[2] - c[1]) / (u[0] * a)
        f, s = _full((0, 1, 0), th), _full((1, 1, 0), th)
        return {"CF": Condition("CF", f["p31"] - f["p21"], gap),
                "CS": Condition("CS", gap, s["p31"] - s["p21"])}
    if model == "B":
        q = _full((0, 1, 1), th)
        return {"cond1b": Condition("cond1b", q["p32"] - q["p12"], (c[2] - c[0]) / (u[1] * a)),
                "cond2b": Condition("cond2b", (c[1] - c[2]) / (u[0] * a), q["p21"])}
    raise DomainError(f"unknown model {model!r}")


def condition_profiles(model: str) -> dict[str, tuple[int, int, int]]:
    """Third-row pattern each condition supports."""
    return {"A": {"CF": (0, 1, 0), "CS": (1, 1, 0)},
            "B": {"cond1b": (0, 1, 1), "cond2b": (0, 1, 1)}}[model.upper()]


__all__ = ["SteadyStateRecord", "SteadyStateReport", "steady_record", "enumerate_steady_states",
           "nash_filter", "analytic_m0_steady", "existence_conditions", "Condition", "condition_profiles"]
