"""Compiled inner loops (numba).

Everything here works on raw arrays: holdings ``P[type, object]`` with object
3 = money, acceptance tensors ``acc[type, give, get]`` and the packed parameter
vector produced by :meth:`ModelParams.packed`.
"""
import numpy as np
from numba import njit

A_, RHO_, DM_, DG_, M_, TH_, U_, D_, C_ = 0, 1, 2, 3, 4, 5, 8, 11, 14
DEADBAND = 1e-12


@njit(cache=True, nogil=True)
def expand(p5, prm):
    P = np.zeros((3, 4))
    P[0, 1] = p5[0]
    P[1, 2] = p5[1]
    P[2, 0] = p5[2]
    P[0, 3] = p5[3]
    P[1, 3] = p5[4]
    P[2, 3] = prm[M_] - p5[3] - p5[4]
    P[0, 2] = prm[TH_] - p5[0] - p5[3]
    P[1, 0] = prm[TH_ + 1] - p5[1] - p5[4]
    P[2, 1] = prm[TH_ + 2] - p5[2] - P[2, 3]
    return P


@njit(cache=True, nogil=True)
def type_rates(P, acc, own, i, prm):
    """Off-diagonal transition rates R[j, l] of a type-i agent using rule ``own``."""
    alpha = prm[A_]
    R = np.zeros((4, 4))
    nxt = (i + 1) % 3
    for j in range(4):
        if j == i:
            continue
        for ip in range(3):
            for k in range(4):
                if k == j:
                    continue
                w = P[ip, k]
                if w == 0.0:
                    continue
                if own[j, k] * acc[ip, k, j] == 0.0:
                    continue
                l = k if k != i else nxt
                if l != j:
                    R[j, l] += alpha * w
    R[3, nxt] += prm[DM_]
    R[nxt, 3] += prm[DG_]
    R[(i + 2) % 3, 3] += prm[DG_]
    return R


@njit(cache=True, nogil=True)
def full_rhs(P, acc, prm):
    dP = np.zeros((3, 4))
    for i in range(3):
        R = type_rates(P, acc, acc[i], i, prm)
        for j in range(4):
            if P[i, j] == 0.0:
                continue
            for l in range(4):
                r = P[i, j] * R[j, l]
                dP[i, l] += r
                dP[i, j] -= r
    return dP


@njit(cache=True, nogil=True)
def rhs5(p5, acc, prm):
    dP = full_rhs(expand(p5, prm), acc, prm)
    out = np.empty(5)
    out[0] = dP[0, 1]
    out[1] = dP[1, 2]
    out[2] = dP[2, 0]
    out[3] = dP[0, 3]
    out[4] = dP[1, 3]
    return out


@njit(cache=True, nogil=True)
def min_slack(p5, prm):
    """Smallest distance to the feasibility bounds (negative when outside)."""
    P = expand(p5, prm)
    s = 1e300
    for i in range(3):
        for j in range(4):
            if j == i:
                continue
            s = min(s, P[i, j], prm[TH_ + i] - P[i, j])
    return s


@njit(cache=True, nogil=True)
def rk4_step(p, acc, prm, h):
    k1 = rhs5(p, acc, prm)
    k2 = rhs5(p + 0.5 * h * k1, acc, prm)
    k3 = rhs5(p + 0.5 * h * k2, acc, prm)
    k4 = rhs5(p + h * k3, acc, prm)
    return p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True, nogil=True)
def rk4_forward(p0, times, prof_idx, accs, prm):
    """Integrate on a prescribed grid; interval k uses profile ``prof_idx[k]``."""
    n = times.shape[0]
    out = np.empty((n, 5))
    out[0] = p0
    p = p0.copy()
    for k in range(n - 1):
        p = rk4_step(p, accs[prof_idx[k]], prm, times[k + 1] - times[k])
        out[k + 1] = p
    return out


@njit(cache=True, nogil=True)
def relax(p0, acc, prm, T, dt):
    p = p0.copy()
    n = int(np.ceil(T / dt))
    for _ in range(n):
        p = rk4_step(p, acc, prm, dt)
    return p


@njit(cache=True, nogil=True)
def jacobian5(p5, acc, prm):
    # the rhs is quadratic in p, so central differences are exact up to rounding
    J = np.empty((5, 5))
    h = 1e-6
    for c in range(5):
        e = np.zeros(5)
        e[c] = h
        J[:, c] = (rhs5(p5 + e, acc, prm) - rhs5(p5 - e, acc, prm)) / (2 * h)
    return J


@njit(cache=True, nogil=True)
def newton(p0, acc, prm, maxit, tol):
    """Damped Newton that never leaves the feasible polytope.

    Returns (point, residual, converged).
    """
    p = p0.copy()
    f = rhs5(p, acc, prm)
    r = np.max(np.abs(f))
    for _ in range(maxit):
        if r <= tol:
            return p, r, True
        J = jacobian5(p, acc, prm)
        # least squares: with M = 0 the money rows of J vanish identically
        step = np.linalg.lstsq(J, -f)[0]
        lam = 1.0
        accepted = False
        for _ in range(40):
            q = p + lam * step
            if min_slack(q, prm) >= -1e-13:
                fq = rhs5(q, acc, prm)
                rq = np.max(np.abs(fq))
                if rq < r or rq <= tol:
                    p, f, r = q, fq, rq
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            return p, r, False
    return p, r, r <= tol


# ------------------------------------------------------------------ values

@njit(cache=True, nogil=True)
def local_objects(i):
    return np.array([(i + 1) % 3, (i + 2) % 3, 3])


@njit(cache=True, nogil=True)
def local_generator(P, acc, own, i, prm):
    R = type_rates(P, acc, own, i, prm)
    obj = local_objects(i)
    A = np.zeros((3, 3))
    for a in range(3):
        s = 0.0
        for b in range(3):
            if a != b:
                A[a, b] = R[obj[a], obj[b]]
                s += A[a, b]
        A[a, a] = -s
    return A


@njit(cache=True, nogil=True)
def flow_utility(P, acc, i, prm):
    obj = local_objects(i)
    v = np.empty(3)
    for a in range(3):
        j = obj[a]
        meet = 0.0
        for ip in range(3):
            meet += P[ip, i] * acc[ip, i, j]
        cost = prm[C_ + j] if j < 3 else prm[DM_] * prm[D_ + i]
        v[a] = prm[A_] * prm[U_ + i] * meet - cost
    return v


@njit(cache=True, nogil=True)
def bits_acceptance(i, b0, b1, b2):
    a = np.zeros((4, 4))
    nxt = (i + 1) % 3
    far = (i + 2) % 3
    a[nxt, i] = 1.0
    a[far, i] = 1.0
    a[3, i] = 1.0
    a[nxt, 3] = b0
    a[3, nxt] = 1 - b0
    a[far, 3] = b1
    a[3, far] = 1 - b1
    a[nxt, far] = b2
    a[far, nxt] = 1 - b2
    return a


@njit(cache=True, nogil=True)
def sign_bit(delta, prev):
    # sigma = 1 iff V_j - V_k < 0; inside the dead-band keep the later-time bit
    if delta < -DEADBAND:
        return 1
    if delta > DEADBAND:
        return 0
    return prev


@njit(cache=True, nogil=True)
def best_bits(V, prev):
    out = np.empty(3, dtype=np.int64)
    out[0] = sign_bit(V[0] - V[2], prev[0])
    out[1] = sign_bit(V[1] - V[2], prev[1])
    out[2] = sign_bit(V[0] - V[1], prev[2])
    return out


@njit(cache=True, nogil=True)
def value_rhs_local(V, P, acc, own, i, prm):
    A = local_generator(P, acc, own, i, prm)
    v = flow_utility(P, acc, i, prm)
    return prm[RHO_] * V - A @ V - v


@njit(cache=True, nogil=True)
def _stage(V, P, acc, i, prm, fixed_own, bits):
    # returns the reversed-time derivative g = -(rho V - A V - v)
    if fixed_own:
        own = acc[i]
    else:
        b = best_bits(V, bits)
        own = bits_acceptance(i, b[0], b[1], b[2])
    return -value_rhs_local(V, P, acc, own, i, prm)


@njit(cache=True, nogil=True)
def value_backward(times, states, prof_idx, accs, prm, V_end, fixed_own, vbound):
    """RK4 on the value ODE from the last grid node back to the first.

    ``V_end`` is (3, 3).  Returns (V[n, 3, 3], bits[n, 3, 3], ok).  When
    ``fixed_own`` is false each type's own rule follows the sign rule on the
    current stage values; otherwise it equals the population rule.
    """
    n = times.shape[0]
    V = np.empty((n, 3, 3))
    B = np.zeros((n, 3, 3), dtype=np.int64)
    V[n - 1] = V_end
    last = accs[prof_idx[n - 2]] if n > 1 else accs[prof_idx[0]]
    for i in range(3):
        # the boundary rule: sign rule at V_end, ties default to the population rule
        pop = np.array([int(last[i, (i + 1) % 3, 3]), int(last[i, (i + 2) % 3, 3]),
                        int(last[i, (i + 1) % 3, (i + 2) % 3])])
        B[n - 1, i] = pop if fixed_own else best_bits(V_end[i], pop)
    for k in range(n - 2, -1, -1):
        h = times[k + 1] - times[k]
        acc = accs[prof_idx[k]]
        p0 = states[k]
        p1 = states[k + 1]
        f0 = rhs5(p0, acc, prm)
        f1 = rhs5(p1, acc, prm)
        pm = 0.5 * (p0 + p1) + h / 8.0 * (f0 - f1)
        P1 = expand(p1, prm)
        Pm = expand(pm, prm)
        P0 = expand(p0, prm)
        for i in range(3):
            y = V[k + 1, i].copy()
            bits = B[k + 1, i].copy()
            k1 = _stage(y, P1, acc, i, prm, fixed_own, bits)
            k2 = _stage(y + 0.5 * h * k1, Pm, acc, i, prm, fixed_own, bits)
            k3 = _stage(y + 0.5 * h * k2, Pm, acc, i, prm, fixed_own, bits)
            k4 = _stage(y + h * k3, P0, acc, i, prm, fixed_own, bits)
            y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            V[k, i] = y
            if fixed_own:
                B[k, i, 0] = int(acc[i, (i + 1) % 3, 3])
                B[k, i, 1] = int(acc[i, (i + 2) % 3, 3])
                B[k, i, 2] = int(acc[i, (i + 1) % 3, (i + 2) % 3])
            else:
                B[k, i] = best_bits(y, bits)
            if np.max(np.abs(y)) > vbound:
                return V, B, False
    return V, B, True


@njit(cache=True, nogil=True)
def rk4_full(P0, times, prof_idx, accs, prm):
    """RK4 on all twelve holding cells, without using the accounting identities."""
    n = times.shape[0]
    out = np.empty((n, 3, 4))
    out[0] = P0
    P = P0.copy()
    for k in range(n - 1):
        h = times[k + 1] - times[k]
        acc = accs[prof_idx[k]]
        k1 = full_rhs(P, acc, prm)
        k2 = full_rhs(P + 0.5 * h * k1, acc, prm)
        k3 = full_rhs(P + 0.5 * h * k2, acc, prm)
        k4 = full_rhs(P + h * k3, acc, prm)
        P = P + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = P
    return out
