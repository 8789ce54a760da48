"""Group, society and government welfare."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FULL_SPEC, random_inventory, random_params
from fiatsearch import (NoConvergence, PiecewiseStrategyPath, StrategyProfile, fixed_point,
                        group_welfare, integrate_forward, integrate_value_backward,
                        seignorage_value, steady_value, baseline)
from fiatsearch.steadystate import steady_record
from fiatsearch.welfare import (group_payoffs, government_welfare, path_welfare,
                                select_equilibrium, welfare_curve)


def test_constant_values():
    prm = baseline("A", M=0.3, delta_m=0.1)
    rep = group_welfare(fixed_point(FULL_SPEC, prm), np.full((3, 3), 2.5), prm)
    assert np.allclose(rep.W_i, 2.5) and rep.W == pytest.approx(2.5)


@pytest.mark.parametrize("M,dm,expected", [(0.3, 0.0, 0.0), (0.3, 0.1, 1.0), (0.0, 0.1, 0.0)])
def test_seignorage_value(M, dm, expected):
    assert seignorage_value(baseline("A", M=M, delta_m=dm, rho_g=0.03)) == pytest.approx(expected)


def test_government_welfare():
    assert government_welfare(2.0, 4.0, 1.0) == 4.0
    assert government_welfare(2.0, 4.0, 0.0) == 2.0
    assert government_welfare(2.0, 4.0, 0.5) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        government_welfare(2.0, 4.0, 1.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_aggregation_invariants(seed):
    rng = np.random.default_rng(seed)
    prm = random_params(rng)
    p, V = random_inventory(rng, prm), rng.normal(size=(3, 3))
    rep = group_welfare(p, V, prm)
    assert rep.W == pytest.approx(float(np.dot(prm.theta, rep.W_i)), abs=1e-12)
    assert rep.W_G == pytest.approx(rep.W, abs=1e-15)          # lambda defaults to 1


def _rotate(p, prm, V):
    """Relabel type i as type i+1 (goods follow)."""
    p3m = prm.M - p[3] - p[4]
    q = np.array([p[2], p[0], p[1], p3m, p[3]])
    th = (prm.theta[2], prm.theta[0], prm.theta[1])
    return q, prm.replace(theta=th), V[[2, 0, 1]]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    prm = random_params(rng)
    p, V = random_inventory(rng, prm), rng.normal(size=(3, 3))
    q, prm_r, V_r = _rotate(p, prm, V)
    a, b = group_welfare(p, V, prm), group_welfare(q, V_r, prm_r)
    assert b.W == pytest.approx(a.W, abs=1e-12)
    assert np.allclose(b.W_i, a.W_i[[2, 0, 1]], atol=1e-12)


def test_steady_matches_long_backward_run():
    prm = baseline("A", M=0.3, delta_m=0.04)
    p = fixed_point(FULL_SPEC, prm)
    V = steady_value(p, FULL_SPEC, prm)
    tr = integrate_forward(p, PiecewiseStrategyPath.constant(FULL_SPEC), 700.0, 0.1, prm)
    vp = integrate_value_backward(tr, V + 0.5, own="fixed")   # wrong boundary, forgotten by t=0
    W_path = path_welfare(vp)
    assert W_path.shape == (len(tr.times), 4)
    assert W_path[0, 3] == pytest.approx(group_welfare(p, V, prm).W, abs=1e-6)
    assert np.allclose(group_payoffs(p, V, prm), W_path[0, :3], atol=1e-6)


def test_selection_rules():
    prm = baseline("A", M=0.3, delta_m=0.06)
    recs = [steady_record(StrategyProfile.parse(lbl), fixed_point(StrategyProfile.parse(lbl), prm),
                          prm) for lbl in ("111|111|110", "110|101|110")]
    hi, rec_hi = select_equilibrium(recs, prm, "max")
    lo, rec_lo = select_equilibrium(recs, prm, "min")
    full, rec_full = select_equilibrium(recs, prm, "full")
    assert hi.W >= lo.W
    assert rec_full.profile == FULL_SPEC
    with pytest.raises(ValueError):
        select_equilibrium(recs, prm, "median")
    with pytest.raises(NoConvergence):
        select_equilibrium([r for r in recs if not r.is_nash], prm)


def test_welfare_curve_rows():
    rows = welfare_curve(baseline("A", M=0.3), "delta_m", [0.02, 0.04], threads=4)
    assert [r["delta_m"] for r in rows] == [0.02, 0.04]
    for r in rows:
        assert r["error"] == "" and r["profile"] == FULL_SPEC.label
        assert r["report"].Q == pytest.approx(0.3 * r["delta_m"] / 0.03)
    with pytest.raises(ValueError):
        welfare_curve(baseline("A"), "rho", [0.1])
