"""Flow utilities, the local generator, steady values and the backward value ODE.

Public functions use 1-based types and objects in ``{1, 2, 3, "m"}``.  Value
tables are (3, 3) arrays: row i - 1 holds (V_{i,i+1}, V_{i,i+2}, V_{i,m}).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import (MONEY, ModelParams, StrategyProfile, TypeStrategy,
                   acceptance_tensor, holdings, own_acceptance)
from .dynamics import Trajectory, interval_indices
from .errors import DivergenceError, DomainError, SingularSystem

DEFAULT_VBOUND = 1e6


def _type(i) -> int:
    if int(i) not in (1, 2, 3):
        raise DomainError(f"unknown type {i!r}")
    return int(i) - 1


def local_position(i: int, j) -> int:
    """Position of object ``j`` in type ``i``'s row: 0 for i+1, 1 for i+2, 2 for m."""
    ii = _type(i)
    if j == MONEY:
        return 2
    jj = int(j) - 1
    if jj == ii:
        raise DomainError(f"type {i} never holds its own consumption good")
    return 0 if jj == (ii + 1) % 3 else 1


def _own(i: int, own, profile: StrategyProfile) -> np.ndarray:
    if own is None:
        return acceptance_tensor(profile)[i]
    if not isinstance(own, TypeStrategy):
        own = TypeStrategy(tuple(own))
    return own_acceptance(i, own)


def flow_utility(i, j, p, s: StrategyProfile, params: ModelParams) -> float:
    """v_{i,j}: expected consumption flow net of the holding cost of ``j``."""
    v = K.flow_utility(holdings(p, params), acceptance_tensor(s), _type(i), params.packed())
    return float(v[local_position(i, j)])


def flow_utilities(p, s: StrategyProfile, params: ModelParams) -> np.ndarray:
    P = holdings(p, params)
    acc = acceptance_tensor(s)
    prm = params.packed()
    return np.stack([K.flow_utility(P, acc, i, prm) for i in range(3)])


def build_A(i, p, own, s: StrategyProfile, params: ModelParams) -> np.ndarray:
    """Generator over holdings (i+1, i+2, m) of a type-i agent playing ``own``.

    ``own=None`` means the agent follows the population rule ``s``.
    """
    ii = _type(i)
    return K.local_generator(holdings(p, params), acceptance_tensor(s),
                             _own(ii, own, s), ii, params.packed())


def steady_value(p, s: StrategyProfile, params: ModelParams) -> np.ndarray:
    """Solve (rho I - A^i) V_i = v_i for each type, own rule equal to ``s``."""
    if params.rho <= 0:
        raise SingularSystem("rho must be positive")
    V = np.empty((3, 3))
    for i in range(3):
        A = build_A(i + 1, p, None, s, params)
        V[i] = np.linalg.solve(params.rho * np.eye(3) - A, flow_utilities(p, s, params)[i])
    return V


def steady_residual(V, p, s: StrategyProfile, params: ModelParams) -> float:
    r = [value_rhs(i + 1, V[i], p, None, s, params) for i in range(3)]
    return float(np.max(np.abs(r)))


def value_rhs(i, V_i, p, own, s: StrategyProfile, params: ModelParams) -> np.ndarray:
    """dV_i/dt = rho V_i - A^i V_i - v_i."""
    ii = _type(i)
    return K.value_rhs_local(np.asarray(V_i, dtype=np.float64), holdings(p, params),
                             acceptance_tensor(s), _own(ii, own, s), ii, params.packed())


@dataclass
class ValuePath:
    """Value tables on the trajectory grid, with the own rule used at each node.

    ``bits[k, i]`` is type i's best-response triple at ``times[k]``.
    """
    times: np.ndarray
    V: np.ndarray
    bits: np.ndarray
    trajectory: Trajectory = field(repr=False)

    @property
    def deltas(self) -> np.ndarray:
        """(n, 3, 3) differences V_j - V_k behind each bit."""
        V = self.V
        return np.stack([V[:, :, 0] - V[:, :, 2], V[:, :, 1] - V[:, :, 2],
                         V[:, :, 0] - V[:, :, 1]], axis=2)

    def at(self, k: int) -> np.ndarray:
        return self.V[k]


def integrate_value_backward(traj: Trajectory, V_boundary, params: ModelParams | None = None,
                             own: str = "best", vbound: float = DEFAULT_VBOUND) -> ValuePath:
    """RK4 from ``traj.times[-1]`` back to ``traj.times[0]``.

    With ``own="best"`` every type's rule follows the sign rule on its current
    values (the best response); with ``own="fixed"`` it equals the population
    rule carried by the trajectory.  Inventories between nodes come from cubic
    Hermite interpolation; switching times are grid nodes already.
    """
    if own not in ("best", "fixed"):
        raise ValueError(f"own must be 'best' or 'fixed', got {own!r}")
    params = traj.params if params is None else params
    V_end = np.asarray(V_boundary, dtype=np.float64).reshape(3, 3)
    path = traj.path
    accs = np.stack([acceptance_tensor(p) for p in path.profiles()])
    idx = interval_indices(traj.times, path)
    V, B, ok = K.value_backward(traj.times, traj.states, idx, accs, params.packed(),
                                V_end, own == "fixed", vbound)
    if not ok:
        raise DivergenceError(f"value function exceeded {vbound:g} in magnitude")
    return ValuePath(traj.times, V, B, traj)


__all__ = ["flow_utility", "flow_utilities", "build_A", "steady_value", "steady_residual",
           "value_rhs", "ValuePath", "integrate_value_backward", "local_position"]
