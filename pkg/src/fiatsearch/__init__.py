"""Steady states and dynamic Nash equilibria of a three-type search economy with fiat money."""
from .core import (ModelParams, PiecewiseStrategyPath, StrategyProfile, TypeStrategy, accepts,
                   expand_inventory, baseline, validate_params)
from .dynamics import find_fixed_point, fixed_point, integrate_forward, inventory_rhs
from .errors import (DivergenceError, DomainError, FeasibilityDrift, NoConvergence,
                     SingularSystem, TooManySwitches, Unsupported)
from .nash import certify, find_nash_path, probe_multiplicity, verify_nash_steady
from .steadystate import analytic_m0_steady, enumerate_steady_states, existence_conditions
from .valuation import integrate_value_backward, steady_value
from .welfare import group_welfare, seignorage_value

__version__ = "0.1.0"
