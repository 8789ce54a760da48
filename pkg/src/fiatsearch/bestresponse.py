"""Sign-rule best responses, switching-time extraction and path distances."""
from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from . import _kernels as K
from .core import SIGMA, PiecewiseStrategyPath, StrategyProfile, acceptance_tensor
from .dynamics import interval_indices
from .errors import TooManySwitches
from .valuation import ValuePath

DEADBAND = K.DEADBAND
REFINE_TOL = 1e-9
MERGE_TOL = 1e-9
DEFAULT_CAP = 64

# (j, k) positions in a value row behind each stored bit
_PAIRS = ((0, 2), (1, 2), (0, 1))


def _bits_from_row(row, tie) -> tuple[int, int, int]:
    out = []
    for b, (j, k) in enumerate(_PAIRS):
        d = row[j] - row[k]
        if d < -DEADBAND:
            out.append(1)
        elif d > DEADBAND:
            out.append(0)
        else:
            out.append(int(tie[b]) if tie is not None else 0)
    return tuple(out)


def sigma_from_values(V, tie: StrategyProfile | None = None) -> StrategyProfile:
    """Best-response profile: bit (j, k) is 1 iff V_{i,j} < V_{i,k}.

    Differences inside the dead-band take the bit from ``tie`` (the profile
    just after, in the backward construction) or 0 when no tie profile is
    given.  A tie resolution that would be intransitive falls back to 0s.
    """
    V = np.asarray(V, dtype=float).reshape(3, 3)
    cols = []
    for i in range(3):
        bits = _bits_from_row(V[i], tie.types[i].bits if tie is not None else None)
        if bits not in SIGMA:
            bits = _bits_from_row(V[i], None)
        cols.append(bits)
    return StrategyProfile.from_columns(cols)


def value_slopes(vp: ValuePath, fixed_own: bool = False) -> np.ndarray:
    """dV/dt at every node.

    Each type's own rule is taken from ``vp.bits``, or from the population
    rule when ``fixed_own`` is set.
    """
    traj = vp.trajectory
    prm = traj.params.packed()
    path = traj.path
    accs = np.stack([acceptance_tensor(p) for p in path.profiles()])
    idx = interval_indices(traj.times, path)
    idx = np.append(idx, idx[-1]) if idx.size else np.zeros(1, dtype=np.int64)
    out = np.empty_like(vp.V)
    for k in range(len(vp.times)):
        P = K.expand(traj.states[k], prm)
        acc = accs[idx[k]]
        for i in range(3):
            if fixed_own:
                own = acc[i]
            else:
                b = vp.bits[k, i]
                own = K.bits_acceptance(i, b[0], b[1], b[2])
            out[k, i] = K.value_rhs_local(vp.V[k, i], P, acc, own, i, prm)
    return out


def _hermite(t0, t1, y0, y1, d0, d1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = s ** 3 - 2 * s ** 2 + s
    h01 = -2 * s ** 3 + 3 * s ** 2
    h11 = s ** 3 - s ** 2
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def refine_root(t0, t1, y0, y1, d0=None, d1=None, tol: float = REFINE_TOL) -> float:
    """Bisection for the zero of the interpolant of Δ on [t0, t1].

    Uses the cubic Hermite interpolant when slopes are given and it changes
    sign on the interval, else the chord.
    """
    if d0 is not None and d1 is not None:
        f = lambda t: _hermite(t0, t1, y0, y1, d0, d1, t)  # noqa: E731
    else:
        f = lambda t: y0 + (y1 - y0) * (t - t0) / (t1 - t0)  # noqa: E731
    a, b = t0, t1
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        # the cubic can miss a dead-band crossing; fall back to the chord
        if d0 is not None:
            return refine_root(t0, t1, y0, y1, None, None, tol)
        return 0.5 * (t0 + t1)
    while b - a > tol:
        c = 0.5 * (a + b)
        fc = f(c)
        if fc == 0:
            return c
        if np.sign(fc) == np.sign(fa):
            a, fa = c, fc
        else:
            b = c
    return 0.5 * (a + b)


def _build_path(initial: StrategyProfile, events) -> PiecewiseStrategyPath:
    """Apply sorted (t, i, b, value) events, merging near-simultaneous ones."""
    groups: list[list] = []
    for ev in sorted(events):
        if groups and ev[0] - groups[-1][-1][0] <= MERGE_TOL:
            groups[-1].append(ev)
        else:
            groups.append([ev])
    cols = [list(t.bits) for t in initial.types]
    bps = []
    pending_t = None
    for g in groups:
        for _, i, b, v in g:
            cols[i][b] = v
        t = g[0][0] if pending_t is None else pending_t
        if any(tuple(c) not in SIGMA for c in cols):
            # intransitive in-between state: fold into the next flip
            pending_t = t
            continue
        pending_t = None
        prof = StrategyProfile.from_columns(cols)
        prev = bps[-1][1] if bps else initial
        if prof != prev:
            if bps and abs(bps[-1][0] - t) <= MERGE_TOL:
                bps[-1] = (bps[-1][0], prof)
            else:
                bps.append((t, prof))
    bps = [(t, p) for n, (t, p) in enumerate(bps) if p != (bps[n - 1][1] if n else initial)]
    return PiecewiseStrategyPath(initial, tuple(bps))


def sign_bits(vp: ValuePath) -> np.ndarray:
    """Sign-rule bits of every node, ties resolved toward the later node."""
    d = vp.deltas
    out = np.empty(d.shape, dtype=np.int64)
    out[-1] = vp.bits[-1]
    for k in range(len(d) - 1, -1, -1):
        nxt = out[k + 1] if k + 1 < len(d) else vp.bits[-1]
        out[k] = np.where(d[k] < -DEADBAND, 1, np.where(d[k] > DEADBAND, 0, nxt))
    return out


def extract_switches(vp: ValuePath, cap: int = DEFAULT_CAP,
                     fixed_own: bool = False) -> PiecewiseStrategyPath:
    """Best-response strategy path read off a value path.

    Every bit flip between consecutive nodes is located by bisection on the
    Hermite interpolant of the underlying value difference.
    """
    if len(vp.times) == 0:
        raise ValueError("empty value path")
    bits = vp.bits
    flips = np.argwhere(bits[1:] != bits[:-1])
    if len(flips) > cap:
        raise TooManySwitches(f"{len(flips)} bit flips exceed the cap of {cap}")
    initial = StrategyProfile.from_columns([tuple(int(x) for x in bits[0, i]) for i in range(3)])
    if len(flips) == 0:
        return PiecewiseStrategyPath.constant(initial)
    deltas = vp.deltas
    slopes = value_slopes(vp, fixed_own)
    dslopes = np.stack([slopes[:, :, 0] - slopes[:, :, 2], slopes[:, :, 1] - slopes[:, :, 2],
                        slopes[:, :, 0] - slopes[:, :, 1]], axis=2)
    t = vp.times
    events = []
    for k, i, b in flips:
        tk = refine_root(t[k], t[k + 1], deltas[k, i, b], deltas[k + 1, i, b],
                         dslopes[k, i, b], dslopes[k + 1, i, b])
        # a switch exactly at the left node belongs to the interval it opens
        events.append((float(tk), int(i), int(b), int(bits[k + 1, i, b])))
    return _build_path(initial, events)


def channel_events(path: PiecewiseStrategyPath) -> dict:
    """Switching times per (type, bit) channel, with the direction of each flip."""
    ch = defaultdict(list)
    for t, i, b, v in path.events():
        ch[(i, b)].append((t, v))
    return dict(ch)


def path_distance(a: PiecewiseStrategyPath, b: PiecewiseStrategyPath) -> float:
    """Largest gap between matched switching times, ``inf`` if incomparable."""
    if a.initial != b.initial:
        return math.inf
    ca, cb = channel_events(a), channel_events(b)
    if ca.keys() != cb.keys():
        return math.inf
    gap = 0.0
    for key, ev in ca.items():
        other = cb[key]
        if len(ev) != len(other) or any(x[1] != y[1] for x, y in zip(ev, other)):
            return math.inf
        gap = max([gap] + [abs(x[0] - y[0]) for x, y in zip(ev, other)])
    return gap


__all__ = ["sigma_from_values", "extract_switches", "path_distance", "refine_root",
           "channel_events", "value_slopes", "sign_bits", "PiecewiseStrategyPath", "DEADBAND"]
