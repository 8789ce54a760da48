import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fiatsearch import StrategyProfile, baseline  # noqa: E402

SQ2 = np.sqrt(2.0)
FULL_SPEC = StrategyProfile.parse("111|111|110")   # every type takes money, third row (1,1,0)


def s3(bits):
    """Profile with the given third row and every money bit set."""
    return StrategyProfile.with_third_row(bits)


@pytest.fixture
def model_a():
    return baseline("A")


@pytest.fixture
def model_b():
    return baseline("B")


@pytest.fixture
def monetary_a():
    return baseline("A", M=0.3, delta_m=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_inventory(rng, params):
    """Uniform-ish feasible 5-vector via a Dirichlet split of each row."""
    th = np.asarray(params.theta)
    M = params.M
    money = rng.dirichlet(np.ones(3)) * M
    while np.any(money > th):
        money = rng.dirichlet(np.ones(3)) * M
    share = rng.random(3)
    goods = (th - money) * share
    return np.array([goods[0], goods[1], goods[2], money[0], money[1]])


def random_params(rng, M=None):
    th = rng.dirichlet(np.ones(3)) * 0.97 + 0.01
    th = th / th.sum()
    M_ = float(rng.uniform(0, 0.9 * th.min())) if M is None else M
    return baseline("A", theta=tuple(th), M=M_, delta_m=float(rng.uniform(0, 0.3)),
                  alpha=float(rng.uniform(0.2, 2.0)), rho=float(rng.uniform(0.01, 0.2)))


def random_profile(rng):
    return StrategyProfile.from_code(int(rng.integers(216)))


# ---------------------------------------------------------------- shared transition runs

def emergence_run(delta_m, M=0.3):
    """Emergence transition: one type-1 start toward the full-monetary equilibrium."""
    from fiatsearch import find_nash_path, fixed_point
    from fiatsearch.steadystate import steady_record
    prm = baseline("A", M=M, delta_m=delta_m)
    target = steady_record(FULL_SPEC, fixed_point(FULL_SPEC, prm), prm)
    p0 = np.array([prm.theta[0], 0, 0, 0, M / 4])
    return find_nash_path(p0, target, prm)


def reform_run():
    """Seignorage cut 0.1 -> 0.02 at M = 0.3 from the partial-acceptance steady state."""
    from fiatsearch import find_nash_path, fixed_point, verify_nash_steady
    from fiatsearch.steadystate import steady_record
    pre_prof = StrategyProfile.parse("110|101|110")
    pre = baseline("A", M=0.3, delta_m=0.1)
    post = pre.replace(delta_m=0.02)
    p0 = fixed_point(pre_prof, pre)
    target = steady_record(FULL_SPEC, fixed_point(FULL_SPEC, post), post)
    res = find_nash_path(p0, target, post)
    return {"pre_profile": pre_prof, "pre": pre, "post": post, "p0": p0, "result": res,
            "pre_nash": verify_nash_steady(pre_prof, p0, pre).is_nash}


@pytest.fixture(scope="session")
def emerge_07():
    return emergence_run(0.07)


@pytest.fixture(scope="session")
def emerge_06():
    return emergence_run(0.06)


@pytest.fixture(scope="session")
def reform():
    return reform_run()


# ---------------------------------------------------------------- acceptance report

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    ok = rep.passed and not hasattr(rep, "wasxfail")
    note = ""
    if hasattr(rep, "wasxfail"):
        note = f"known failure: {rep.wasxfail}"
    elif rep.failed:
        note = str(rep.longrepr).strip().splitlines()[-1][:160]
    _CRITERIA.setdefault(mark.args[0], []).append((item.name, ok, note))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        parts = _CRITERIA[n]
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  "
                      f"({sum(p[1] for p in parts)}/{len(parts)} checks)")
        for name, good, note in parts:
            if not good:
                tr.write_line(f"    {name}: {note}")
