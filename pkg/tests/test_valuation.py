"""Flow utilities, generator matrix, steady values and the backward value ODE."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_inventory, random_params, random_profile, s3
from fiatsearch import (DivergenceError, PiecewiseStrategyPath, StrategyProfile, fixed_point,
                        integrate_forward, integrate_value_backward, steady_value, baseline)
from fiatsearch.core import SIGMA
from fiatsearch.dynamics import Trajectory
from fiatsearch.valuation import (build_A, flow_utilities, flow_utility, steady_residual,
                                  value_rhs)
from oracles import monte_carlo_values, phi_form, transcribe_A

FUND_P = np.array([1, 0.5, 1, 0, 0]) / 3


# ---------------------------------------------------------------- flow utility

def test_flow_utility_without_own_good_in_circulation():
    prm = baseline("A", M=0.3, delta_m=0.1)
    # nobody holds good 1: p21 = 0 (type 2 holds 3 or money), p31 = 0
    p = np.array([0.1, 1 / 3 - 0.1, 0.0, 0.1, 0.1])
    s = StrategyProfile.parse("111|111|111")
    assert flow_utility(1, 2, p, s, prm) == pytest.approx(-prm.c[1])
    assert flow_utility(1, 3, p, s, prm) == pytest.approx(-prm.c[2])
    assert flow_utility(1, "m", p, s, prm) == pytest.approx(-prm.delta_m * prm.D[0])
    assert flow_utility(1, "m", p, s, prm.replace(delta_m=0.0)) == 0.0


def test_flow_utility_fundamental_value():
    prm = baseline("A")
    assert flow_utility(1, 2, FUND_P, s3((0, 1, 0)), prm) == pytest.approx(1 / 15, abs=1e-15)


# ---------------------------------------------------------------- generator

def test_generator_zero_when_nothing_trades():
    """Types 2 and 3 hold only money and type 1 refuses it: type 1 never moves."""
    prm = baseline("A", M=2 / 3)
    p = np.array([0.2, 0.0, 0.0, 0.0, 1 / 3])
    A = build_A(1, p, None, StrategyProfile.parse("000|000|000"), prm)
    assert np.all(A == 0.0)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_generator_property(seed):
    rng = np.random.default_rng(seed)
    prm = random_params(rng)
    p, s = random_inventory(rng, prm), random_profile(rng)
    own = SIGMA[int(rng.integers(6))]
    for i in (1, 2, 3):
        A = build_A(i, p, own, s, prm)
        assert np.max(np.abs(A.sum(axis=1))) <= 1e-14
        assert np.all(A - np.diag(np.diag(A)) >= 0)


@pytest.mark.parametrize("label", ["111|111|110", "110|101|110"])
def test_generator_matches_transcription(label):
    prm = baseline("A", M=0.3, delta_m=0.02)
    s = StrategyProfile.parse(label)
    p = fixed_point(s, prm)
    for i in (1, 2, 3):
        own = s.types[i - 1].bits
        assert np.allclose(build_A(i, p, own, s, prm), transcribe_A(i, p, own, s, prm),
                           atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_generator_transcription_random(seed):
    rng = np.random.default_rng(seed)
    prm = random_params(rng)
    p, s = random_inventory(rng, prm), random_profile(rng)
    own = SIGMA[int(rng.integers(6))]
    i = int(rng.integers(1, 4))
    assert np.allclose(build_A(i, p, own, s, prm), transcribe_A(i, p, own, s, prm), atol=1e-14)


# ---------------------------------------------------------------- steady values

def test_myopic_limit():
    prm = baseline("A", M=0.3, delta_m=0.1, rho=1e6)
    s = StrategyProfile.parse("111|111|110")
    p = fixed_point(s, prm)
    V = steady_value(p, s, prm)
    v = flow_utilities(p, s, prm)
    assert np.allclose(V, v / prm.rho, rtol=1e-4, atol=0)


@pytest.mark.parametrize("label,M,dm", [("110|111|110", 0.0, 0.0), ("110|101|110", 0.3, 0.1)])
def test_steady_value_against_monte_carlo(label, M, dm):
    """Discounted holding-chain simulation, 2e5 paths per start, 1% tolerance."""
    prm = baseline("A", M=M, delta_m=dm)
    s = StrategyProfile.parse(label)
    p = FUND_P if M == 0 else fixed_point(s, prm)
    V = steady_value(p, s, prm)
    for i in (1, 2, 3):
        mc = monte_carlo_values(i, p, s, prm, n=200_000, seed=100 + i)
        assert np.allclose(mc, V[i - 1], rtol=0.01), (i, mc, V[i - 1])
    if M == 0:
        # fundamental point: type 1 values good 3 above good 2, so (0,1,0) is not self-enforcing
        assert V[0, 1] > V[0, 0]


def test_steady_residual_small(monetary_a):
    for label in ("111|111|110", "110|101|110", "000|000|000", "101|010|111"):
        s = StrategyProfile.parse(label)
        p = fixed_point(s, monetary_a)
        V = steady_value(p, s, monetary_a)
        assert steady_residual(V, p, s, monetary_a) <= 1e-10
        for i in (1, 2, 3):
            assert np.max(np.abs(value_rhs(i, V[i - 1], p, None, s, monetary_a))) <= 1e-10


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_two_forms_of_value_ode_agree(seed):
    rng = np.random.default_rng(seed)
    prm = random_params(rng)
    p, s = random_inventory(rng, prm), random_profile(rng)
    own = SIGMA[int(rng.integers(6))]
    Vi = rng.normal(size=3) * 3
    i = int(rng.integers(1, 4))
    assert np.allclose(value_rhs(i, Vi, p, own, s, prm), phi_form(i, Vi, p, own, s, prm),
                       atol=1e-12, rtol=0)


def test_seignorage_term_cancels_between_goods(rng):
    """The purchase channel adds delta_g (V_a - V_b) to dV_a - dV_b whatever V_m is."""
    prm = baseline("A", M=0.3, delta_m=0.1)
    off = prm.replace(delta_m=0.0)
    s = StrategyProfile.parse("111|111|110")
    p = fixed_point(s, prm)
    for _ in range(20):
        Vi = rng.normal(size=3)
        Vi[2] = rng.normal() * 100
        on_, off_ = value_rhs(1, Vi, p, None, s, prm), value_rhs(1, Vi, p, None, s, off)
        extra = (on_[0] - on_[1]) - (off_[0] - off_[1])
        assert extra == pytest.approx(prm.delta_g * (Vi[0] - Vi[1]), abs=1e-12)


# ---------------------------------------------------------------- backward integration

def _steady_traj(s, prm, T=40.0, dt=0.05):
    p = fixed_point(s, prm)
    return p, integrate_forward(p, PiecewiseStrategyPath.constant(s), T, dt, prm)


def test_constant_traj_keeps_steady_values(monetary_a):
    s = StrategyProfile.parse("110|101|110")
    p, tr = _steady_traj(s, monetary_a)
    V = steady_value(p, s, monetary_a)
    vp = integrate_value_backward(tr, V, own="fixed")
    assert np.max(np.abs(vp.V - V)) < 1e-10
    assert np.array_equal(vp.V[-1], V)
    vp = integrate_value_backward(tr, V)
    assert np.max(np.abs(vp.V - V)) < 1e-10


def test_contraction_in_boundary(rng):
    prm = baseline("A", M=0.3, delta_m=0.07)
    tr = integrate_forward([1 / 3, 0, 0, 0, 0.075],
                           PiecewiseStrategyPath.constant(StrategyProfile.parse("111|111|110")),
                           30.0, 0.05, prm)
    T = tr.horizon
    bound = np.exp(-prm.rho * (T - tr.times))
    for _ in range(20):
        W1, W2 = rng.normal(size=(2, 3, 3)) * 2
        a = integrate_value_backward(tr, W1, own="fixed").V
        b = integrate_value_backward(tr, W2, own="fixed").V
        gap = np.abs(a - b).reshape(len(tr.times), -1).max(axis=1)
        assert np.all(gap <= bound * np.abs(W1 - W2).max() * (1 + 1e-9))


def test_horizon_doubling_bound():
    """Values at t=0 from horizon T sit within sqrt(3) e^{-rho T} |V(T) - V*| of the 2T run."""
    prm = baseline("A", M=0.3, delta_m=0.02)
    s = StrategyProfile.parse("111|111|110")
    p_star = fixed_point(s, prm)
    V_star = steady_value(p_star, s, prm)
    p0 = [1 / 3, 0, 0, 0, 0.075]
    path = PiecewiseStrategyPath.constant(s)
    T = 60.0
    short = integrate_forward(p0, path, T, 0.02, prm)
    long = integrate_forward(p0, path, 2 * T, 0.02, prm)
    v_short = integrate_value_backward(short, V_star, own="fixed").V[0]
    vp_long = integrate_value_backward(long, V_star, own="fixed")
    k = np.searchsorted(long.times, T)
    v_long, V_T = vp_long.V[0], vp_long.V[k]
    bound = np.sqrt(3) * np.exp(-prm.rho * T) * np.abs(V_T - V_star).max()
    assert np.abs(v_short - v_long).max() <= bound


def test_divergence_guard():
    prm = baseline("A", M=0.3, delta_m=0.07)
    s = StrategyProfile.parse("111|111|110")
    p, tr = _steady_traj(s, prm, T=10.0)
    with pytest.raises(DivergenceError):
        integrate_value_backward(tr, steady_value(p, s, prm), vbound=0.5)


def test_trajectory_dataclass_shape(monetary_a):
    s = StrategyProfile.parse("111|111|110")
    _, tr = _steady_traj(s, monetary_a, T=1.0, dt=0.1)
    assert isinstance(tr, Trajectory)
    assert tr.states.shape == (len(tr.times), 5)
