"""Model primitives, strategy lattice and inventory bookkeeping.

Conventions used throughout the package:

* Public functions take types and goods as 1, 2, 3 and money as ``"m"``.
* Internally objects are array columns 0, 1, 2 (goods) and 3 (money) and
  types are rows 0, 1, 2.  Good ``g`` is consumed by type ``g`` and produced
  by type ``g - 1`` (mod 3).
* A reduced inventory is the 5-vector ``(p12, p23, p31, p1m, p2m)``.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError

MONEY = "m"
MONEY_IDX = 3
FEAS_TOL = 1e-10

# admissible per-type triples (s_{i+1,m}, s_{i+2,m}, s_{i+1,i+2})
SIGMA: tuple[tuple[int, int, int], ...] = (
    (1, 1, 1), (1, 0, 1), (1, 1, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0),
)


@dataclass(frozen=True)
class ModelParams:
    theta: tuple[float, float, float]
    alpha: float
    rho: float
    u: tuple[float, float, float]
    D: tuple[float, float, float]
    c: tuple[float, float, float]
    M: float = 0.0
    delta_m: float = 0.0
    rho_g: float | None = None
    lam: float = 1.0

    def __post_init__(self):
        for name in ("theta", "u", "D", "c"):
            val = getattr(self, name)
            if np.isscalar(val):
                val = (val, val, val)
            val = tuple(float(x) for x in val)
            if len(val) != 3:
                raise DomainError(f"{name} must have 3 entries, got {len(val)}")
            object.__setattr__(self, name, val)
        for name in ("alpha", "rho", "M", "delta_m", "lam"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.rho_g is None:
            object.__setattr__(self, "rho_g", self.rho)
        object.__setattr__(self, "rho_g", float(self.rho_g))
        self._check()

    def _check(self):
        vals = (*self.theta, *self.u, *self.D, *self.c, self.alpha, self.rho,
                self.rho_g, self.M, self.delta_m, self.lam)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("all parameters must be finite")
        if min(self.theta) <= 0:
            raise DomainError(f"population shares must be positive: theta={self.theta}")
        if abs(sum(self.theta) - 1.0) > 1e-12:
            raise DomainError(
                f"population shares must sum to 1: theta={self.theta} sums to {sum(self.theta):.6g}")
        if self.alpha <= 0:
            raise DomainError("alpha must be > 0")
        if self.rho <= 0:
            raise DomainError("rho must be > 0")
        if self.rho_g <= 0:
            raise DomainError("rho_g must be > 0")
        if min(self.u) <= 0:
            raise DomainError("net utilities u must be > 0")
        if min(self.D) <= 0:
            raise DomainError("production disutilities D must be > 0")
        if not 0 <= self.M < 1:
            raise DomainError(f"money share must satisfy 0 <= M < 1, got M={self.M}")
        if self.delta_m < 0:
            raise DomainError("delta_m must be >= 0")
        if not 0 <= self.lam <= 1:
            raise DomainError("lambda must lie in [0, 1]")

    @property
    def delta_g(self) -> float:
        """Government purchase rate that balances the seignorage budget."""
        if self.M == 0:
            return 0.0
        return self.delta_m * self.M / (1.0 - self.M)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def packed(self) -> np.ndarray:
        """Flat float array consumed by the compiled kernels."""
        return np.array([self.alpha, self.rho, self.delta_m, self.delta_g, self.M,
                         *self.theta, *self.u, *self.D, *self.c], dtype=np.float64)

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "alpha": self.alpha, "rho": self.rho,
                "rho_g": self.rho_g, "u": list(self.u), "D": list(self.D),
                "c": list(self.c), "M": self.M, "delta_m": self.delta_m,
                "lambda": self.lam}


# packed layout offsets
P_ALPHA, P_RHO, P_DM, P_DG, P_M, P_THETA, P_U, P_D, P_C = 0, 1, 2, 3, 4, 5, 8, 11, 14

_REQUIRED = ("theta", "alpha", "rho", "u", "D", "c")


def validate_params(raw: Mapping) -> ModelParams:
    """Build a :class:`ModelParams` from a loose mapping (e.g. parsed JSON).

    Scalars are broadcast for the per-type fields ``u``, ``D`` and ``theta``;
    ``lambda`` is accepted as an alias of ``lam``.
    """
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise DomainError(f"missing parameter fields: {', '.join(missing)}")
    kw = dict(raw)
    if "lambda" in kw:
        kw["lam"] = kw.pop("lambda")
    known = {f.name for f in dataclasses.fields(ModelParams)}
    extra = set(kw) - known
    if extra:
        raise DomainError(f"unknown parameter fields: {', '.join(sorted(extra))}")
    try:
        return ModelParams(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(str(exc)) from exc


BASELINE = {
    "A": dict(rho=0.03, alpha=1.0, u=1.0, D=0.028, c=(0.03, 0.1, 0.2)),
    "B": dict(rho=0.03, alpha=1.0, u=1.0, D=0.028, c=(0.1, 0.05, 0.03)),
}


def baseline(model: str = "A", theta=(1 / 3, 1 / 3, 1 / 3), M: float = 0.0,
             delta_m: float = 0.0, **overrides) -> ModelParams:
    """Baseline calibration ("A": c1<c2<c3, "B": c3<c2<c1)."""
    base = dict(BASELINE[model.upper()])
    base.update(theta=theta, M=M, delta_m=delta_m)
    base.update(overrides)
    return ModelParams(**base)


# ---------------------------------------------------------------- strategies

@dataclass(frozen=True)
class TypeStrategy:
    """Trading rule of one type: (s_{i+1,m}, s_{i+2,m}, s_{i+1,i+2})."""
    bits: tuple[int, int, int]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != 3 or any(b not in (0, 1) for b in bits):
            raise DomainError(f"strategy bits must be three 0/1 values, got {self.bits}")
        if bits not in SIGMA:
            raise DomainError(f"intransitive trading rule {bits}")
        object.__setattr__(self, "bits", bits)

    @property
    def index(self) -> int:
        return SIGMA.index(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))


def is_admissible(bits: Sequence[int]) -> bool:
    return tuple(int(b) for b in bits) in SIGMA


@dataclass(frozen=True)
class StrategyProfile:
    """One :class:`TypeStrategy` per type."""
    types: tuple[TypeStrategy, TypeStrategy, TypeStrategy]

    def __post_init__(self):
        ts = tuple(t if isinstance(t, TypeStrategy) else TypeStrategy(tuple(t)) for t in self.types)
        if len(ts) != 3:
            raise DomainError("a profile needs exactly three type strategies")
        object.__setattr__(self, "types", ts)

    @classmethod
    def from_columns(cls, cols: Iterable[Sequence[int]]) -> "StrategyProfile":
        return cls(tuple(TypeStrategy(tuple(c)) for c in cols))

    @classmethod
    def from_matrix(cls, mat) -> "StrategyProfile":
        """From the 3x3 display matrix (rows are decisions, columns are types)."""
        m = np.asarray(mat, dtype=int)
        return cls.from_columns(m.T.tolist())

    @classmethod
    def from_code(cls, code: int) -> "StrategyProfile":
        if not 0 <= code < 216:
            raise DomainError(f"profile code out of range: {code}")
        return cls.from_columns(SIGMA[(code // 6 ** i) % 6] for i in range(3))

    @classmethod
    def parse(cls, label: str) -> "StrategyProfile":
        """Parse ``"111|111|110"`` (one triple per type)."""
        parts = label.replace(".", "|").replace(" ", "|").split("|")
        parts = [p for p in parts if p]
        if len(parts) != 3 or any(len(p) != 3 for p in parts):
            raise DomainError(f"cannot parse profile label {label!r}")
        return cls.from_columns([int(ch) for ch in p] for p in parts)

    @classmethod
    def with_third_row(cls, s3: Sequence[int], money=((1, 1), (1, 1), (1, 1))) -> "StrategyProfile":
        return cls.from_columns((money[i][0], money[i][1], s3[i]) for i in range(3))

    @property
    def code(self) -> int:
        return sum(t.index * 6 ** i for i, t in enumerate(self.types))

    @property
    def label(self) -> str:
        return "|".join(str(t) for t in self.types)

    def matrix(self) -> np.ndarray:
        return np.array([t.bits for t in self.types], dtype=int).T

    @property
    def third_row(self) -> tuple[int, int, int]:
        return tuple(t.bits[2] for t in self.types)

    def bit(self, i: int, b: int) -> int:
        """Bit ``b`` (0, 1, 2) of type ``i`` (1-based)."""
        return self.types[i - 1].bits[b]

    def __str__(self):
        return self.label


def all_profiles() -> list[StrategyProfile]:
    return [StrategyProfile.from_code(c) for c in range(216)]


def all_triples() -> list[tuple[tuple[int, int, int], bool]]:
    """Every binary triple with its admissibility flag."""
    return [(t, t in SIGMA) for t in itertools.product((0, 1), repeat=3)]


def _obj(x) -> int:
    if x == MONEY:
        return MONEY_IDX
    x = int(x)
    if x not in (1, 2, 3):
        raise DomainError(f"unknown object {x!r}")
    return x - 1


def _type_acceptance(i: int, bits: tuple[int, int, int]) -> np.ndarray:
    """4x4 matrix a[j, k] = 1 iff type i (0-based) gives up j for k."""
    a = np.zeros((4, 4), dtype=np.float64)
    nxt, far, m = (i + 1) % 3, (i + 2) % 3, MONEY_IDX
    for j in (nxt, far, m):
        a[j, i] = 1.0
    a[nxt, m], a[m, nxt] = bits[0], 1 - bits[0]
    a[far, m], a[m, far] = bits[1], 1 - bits[1]
    a[nxt, far], a[far, nxt] = bits[2], 1 - bits[2]
    return a


@functools.lru_cache(maxsize=512)
def _acceptance_by_code(code: int) -> np.ndarray:
    prof = StrategyProfile.from_code(code)
    acc = np.stack([_type_acceptance(i, t.bits) for i, t in enumerate(prof.types)])
    acc.setflags(write=False)
    return acc


def acceptance_tensor(profile: StrategyProfile) -> np.ndarray:
    """Read-only (3, 4, 4) array ``acc[i, j, k]``: type i trades j away for k."""
    return _acceptance_by_code(profile.code)


def own_acceptance(i: int, strategy: TypeStrategy) -> np.ndarray:
    return _type_acceptance(i, strategy.bits)


def accepts(i: int, j, k, profile: StrategyProfile) -> int:
    """1 iff a type-``i`` agent holding ``j`` trades it for ``k``."""
    ii, jj, kk = int(i) - 1, _obj(j), _obj(k)
    if ii not in (0, 1, 2):
        raise DomainError(f"unknown type {i!r}")
    if jj == ii:
        raise DomainError(f"type {i} never holds its own consumption good")
    if kk == ii:
        return 1
    if kk == jj:
        return 0
    return int(acceptance_tensor(profile)[ii, jj, kk])


# ---------------------------------------------------------------- inventory

def holdings(p5, params: ModelParams) -> np.ndarray:
    """(3, 4) array of holdings indexed by (type, object); own-good column is 0."""
    p12, p23, p31, p1m, p2m = (float(x) for x in p5)
    th = params.theta
    P = np.zeros((3, 4))
    P[0, 1], P[1, 2], P[2, 0] = p12, p23, p31
    P[0, 3], P[1, 3], P[2, 3] = p1m, p2m, params.M - p1m - p2m
    P[0, 2] = th[0] - p12 - p1m
    P[1, 0] = th[1] - p23 - p2m
    P[2, 1] = th[2] - p31 - P[2, 3]
    return P


def check_feasible(P: np.ndarray, params: ModelParams, tol: float = FEAS_TOL) -> None:
    th = np.asarray(params.theta)
    if not np.all(np.isfinite(P)):
        raise DomainError("inventory has non-finite entries")
    if P.min() < -tol or np.any(P.max(axis=1) > th + tol):
        raise DomainError(f"infeasible inventory (min entry {P.min():.3e})")


def is_feasible(p5, params: ModelParams, tol: float = FEAS_TOL) -> bool:
    try:
        check_feasible(holdings(p5, params), params, tol)
    except DomainError:
        return False
    return True


def expand_inventory(p5, params: ModelParams) -> np.ndarray:
    """3x3 grid with row i = (p_{i,i+1}, p_{i,i+2}, p_{i,m})."""
    if not np.all(np.isfinite(np.asarray(p5, dtype=float))):
        raise DomainError("inventory has non-finite entries")
    P = holdings(p5, params)
    check_feasible(P, params)
    return local_grid(P)


def local_grid(P: np.ndarray) -> np.ndarray:
    return np.array([[P[i, (i + 1) % 3], P[i, (i + 2) % 3], P[i, 3]] for i in range(3)])


def restrict(grid) -> np.ndarray:
    """Inverse of :func:`expand_inventory`: pick the five free coordinates."""
    g = np.asarray(grid, dtype=float)
    return np.array([g[0, 0], g[1, 0], g[2, 0], g[0, 2], g[1, 2]])


def reduce_holdings(P: np.ndarray) -> np.ndarray:
    return np.array([P[0, 1], P[1, 2], P[2, 0], P[0, 3], P[1, 3]])


# ---------------------------------------------------------------- strategy paths

@dataclass(frozen=True)
class PiecewiseStrategyPath:
    """Right-continuous piecewise-constant profile path.

    ``initial`` holds on ``[0, t_1)``; each breakpoint ``(t_h, profile)``
    switches the population to ``profile`` from ``t_h`` on.
    """
    initial: StrategyProfile
    breakpoints: tuple[tuple[float, StrategyProfile], ...] = ()

    def __post_init__(self):
        bps = tuple((float(t), p) for t, p in self.breakpoints)
        prev_t, prev_p = -math.inf, self.initial
        for t, p in bps:
            if not t > prev_t:
                raise DomainError("switching times must be strictly increasing")
            if t < 0:
                raise DomainError("switching times must be non-negative")
            if p == prev_p:
                raise DomainError(f"breakpoint at t={t} does not change the profile")
            prev_t, prev_p = t, p
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, profile: StrategyProfile) -> "PiecewiseStrategyPath":
        return cls(profile, ())

    @property
    def tail(self) -> StrategyProfile:
        return self.breakpoints[-1][1] if self.breakpoints else self.initial

    @property
    def switch_times(self) -> list[float]:
        return [t for t, _ in self.breakpoints]

    def profiles(self) -> list[StrategyProfile]:
        return [self.initial] + [p for _, p in self.breakpoints]

    def profile_at(self, t: float) -> StrategyProfile:
        prof = self.initial
        for tb, p in self.breakpoints:
            if t >= tb:
                prof = p
            else:
                break
        return prof

    def events(self) -> list[tuple[float, int, int, int]]:
        """Bit flips as ``(time, type 1..3, bit 0..2, new value)``."""
        out = []
        prev = self.initial
        for t, p in self.breakpoints:
            for i in range(3):
                for b in range(3):
                    if p.types[i].bits[b] != prev.types[i].bits[b]:
                        out.append((t, i + 1, b, p.types[i].bits[b]))
            prev = p
        return out

    def __len__(self):
        return len(self.breakpoints)
