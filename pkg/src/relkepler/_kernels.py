"""Compiled right-hand sides and the Dormand-Prince 5(4) stepping loop.

Parameters are packed into a float array ``prm`` (see the ``P_*`` indices).
The stepping loop is plain Python so that it can run un-compiled with an
arbitrary Python right-hand side (tabulated perturbations); ``dp5_jit`` is the
compiled version bound to the built-in kernels.
"""

import math

import numpy as np
from numba import njit
from numba.extending import overload

P_M, P_C, P_ALPHA, P_EPS, P_KIND, P_AMP, P_PERIOD = range(7)
N_PRM = 7

KIND_NONE, KIND_DIPOLE, KIND_RADIAL = 0, 1, 2

ST_OK, ST_COLLISION, ST_UNDERFLOW, ST_MAXSTEPS = 0, 1, 2, 3

_jit = njit(cache=True, nogil=True, error_model="numpy")


@_jit
def _envelope(t, prm):
    T = prm[P_PERIOD]
    return prm[P_AMP] * math.cos(2.0 * math.pi * np.fmod(t, T) / T)


@_jit
def force(t, x1, x2, prm):
    """Total ``pdot`` at position ``(x1, x2)``."""
    r2 = x1 * x1 + x2 * x2
    r = math.sqrt(r2)
    r3 = r2 * r
    f1 = -prm[P_ALPHA] * x1 / r3
    f2 = -prm[P_ALPHA] * x2 / r3
    kind = int(prm[P_KIND])
    eps = prm[P_EPS]
    if eps != 0.0 and kind != KIND_NONE:
        e = eps * _envelope(t, prm)
        if kind == KIND_DIPOLE:
            f1 += e * x2 * x2 / r3
            f2 -= e * x1 * x2 / r3
        elif kind == KIND_RADIAL:
            f1 -= e * x1 / r3
            f2 -= e * x2 / r3
    return f1, f2


@_jit
def rhs(t, y, prm):
    out = np.empty(4)
    m = prm[P_M]
    mc = m * prm[P_C]
    g = math.sqrt(1.0 + (y[2] * y[2] + y[3] * y[3]) / (mc * mc))
    out[0] = y[2] / (m * g)
    out[1] = y[3] / (m * g)
    f1, f2 = force(t, y[0], y[1], prm)
    out[2] = f1
    out[3] = f2
    return out


@_jit
def jacobian(t, y, prm):
    A = np.zeros((4, 4))
    m = prm[P_M]
    mc2 = (m * prm[P_C]) ** 2
    x1, x2, p1, p2 = y[0], y[1], y[2], y[3]
    g2 = 1.0 + (p1 * p1 + p2 * p2) / mc2
    g = math.sqrt(g2)
    s = 1.0 / (m * g)
    q = 1.0 / (mc2 * g2)
    A[0, 2] = s * (1.0 - p1 * p1 * q)
    A[0, 3] = -s * p1 * p2 * q
    A[1, 2] = A[0, 3]
    A[1, 3] = s * (1.0 - p2 * p2 * q)
    r2 = x1 * x1 + x2 * x2
    r = math.sqrt(r2)
    r3 = r2 * r
    r5 = r3 * r2
    al = prm[P_ALPHA]
    h11 = -al * (1.0 / r3 - 3.0 * x1 * x1 / r5)
    h12 = al * 3.0 * x1 * x2 / r5
    h22 = -al * (1.0 / r3 - 3.0 * x2 * x2 / r5)
    kind = int(prm[P_KIND])
    eps = prm[P_EPS]
    if eps != 0.0 and kind != KIND_NONE:
        e = eps * _envelope(t, prm)
        if kind == KIND_DIPOLE:
            h11 += e * (-3.0 * x1 * x2 * x2 / r5)
            h12 += e * x2 * (2.0 * x1 * x1 - x2 * x2) / r5
            h22 += e * (-x1 / r3 + 3.0 * x1 * x2 * x2 / r5)
        elif kind == KIND_RADIAL:
            h11 += e * (-1.0 / r3 + 3.0 * x1 * x1 / r5)
            h12 += e * 3.0 * x1 * x2 / r5
            h22 += e * (-1.0 / r3 + 3.0 * x2 * x2 / r5)
    A[2, 0] = h11
    A[2, 1] = h12
    A[3, 0] = h12
    A[3, 1] = h22
    return A


@_jit
def rhs_tangent(t, y, prm):
    """State plus row-major 4x4 variational matrix ``M' = A(t, z) M``."""
    out = np.empty(20)
    out[:4] = rhs(t, y[:4], prm)
    A = jacobian(t, y[:4], prm)
    M = y[4:].reshape((4, 4))
    out[4:] = (A @ M).reshape(16)
    return out


def _call(f, tangent, t, y, prm):
    return f(t, y, prm)


@overload(_call)
def _call_compiled(f, tangent, t, y, prm):
    # compiled callers pass f=None and get the built-in kernels
    def impl(f, tangent, t, y, prm):
        if tangent:
            return rhs_tangent(t, y, prm)
        return rhs(t, y, prm)
    return impl


# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

SAFE, FAC_MIN, FAC_MAX, BETA = 0.9, 0.2, 10.0, 0.04
EXPO1 = 0.2 - BETA * 0.75
MAX_DTHETA = 0.5 * math.pi


@_jit
def _grow(ts, ys, th, cf):
    cap = 2 * ts.shape[0]
    ts2 = np.empty(cap)
    ys2 = np.empty((cap, ys.shape[1]))
    th2 = np.empty(cap)
    cf2 = np.empty((cap, 5, cf.shape[2]))
    n = ts.shape[0]
    ts2[:n] = ts
    ys2[:n] = ys
    th2[:n] = th
    cf2[:n] = cf
    return ts2, ys2, th2, cf2


@_jit
def _err_norm(y, yn, err, rtol, atol, nerr):
    s = 0.0
    for i in range(nerr):
        sk = atol + rtol * max(abs(y[i]), abs(yn[i]))
        s += (err[i] / sk) ** 2
    return math.sqrt(s / nerr)


def dp5(f, tangent, prm, t0, y0, t1, rtol, atol, max_step, rmin, nerr, record, max_steps):
    """Integrate ``y' = f(t, y, prm)`` from ``t0`` to ``t1``.

    The first two components are the planar position: steps are rejected if
    the polar angle advances by more than ``pi/2`` and integration stops with
    ``ST_COLLISION`` when the radius falls below ``rmin``. Only the first
    ``nerr`` components enter the error norm. Returns
    ``(status, n, ts, ys, thetas, coeffs)`` with ``n`` stored samples and
    per-step dense-output coefficients in ``coeffs[:n-1]``.
    """
    dim = y0.shape[0]
    cap = 64 if record else 2
    ts = np.empty(cap)
    ys = np.empty((cap, dim))
    th = np.empty(cap)
    cf = np.empty((cap, 5, dim))
    ts[0] = t0
    ys[0] = y0
    theta = math.atan2(y0[1], y0[0])
    th[0] = theta
    n = 1
    if math.hypot(y0[0], y0[1]) < rmin:
        return ST_COLLISION, n, ts, ys, th, cf
    if t1 == t0:
        return ST_OK, n, ts, ys, th, cf

    direction = 1.0 if t1 > t0 else -1.0
    hmax = min(abs(max_step), abs(t1 - t0))
    t = t0
    y = y0.copy()
    k1 = _call(f, tangent, t, y, prm)

    # initial step (Hairer's heuristic)
    dnf = 0.0
    dny = 0.0
    for i in range(nerr):
        sk = atol + rtol * abs(y[i])
        dnf += (k1[i] / sk) ** 2
        dny += (y[i] / sk) ** 2
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = math.sqrt(dny / dnf) * 0.01
    h = min(h, hmax)
    yt = y + direction * h * k1
    f1 = _call(f, tangent, t + direction * h, yt, prm)
    der2 = 0.0
    for i in range(nerr):
        sk = atol + rtol * abs(y[i])
        der2 += ((f1[i] - k1[i]) / sk) ** 2
    der2 = math.sqrt(der2) / h
    der12 = max(abs(der2), math.sqrt(dnf))
    if der12 <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    h = min(100.0 * h, h1, hmax)

    errold = 1e-4
    rejected = False
    nsteps = 0
    status = ST_OK
    while True:
        if nsteps >= max_steps:
            status = ST_MAXSTEPS
            break
        nsteps += 1
        last = False
        if h >= abs(t1 - t):
            h = abs(t1 - t)
            last = True
        hs = direction * h
        k2 = _call(f, tangent, t + C2 * hs, y + hs * (A21 * k1), prm)
        k3 = _call(f, tangent, t + C3 * hs, y + hs * (A31 * k1 + A32 * k2), prm)
        k4 = _call(f, tangent, t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3), prm)
        k5 = _call(f, tangent, t + C5 * hs,
                   y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), prm)
        k6 = _call(f, tangent, t + hs,
                   y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), prm)
        yn = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        tn = t1 if last else t + hs
        k7 = _call(f, tangent, tn, yn, prm)
        errv = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err = _err_norm(y, yn, errv, rtol, atol, nerr)
        if not math.isfinite(err):
            err = 1e10
        dth = math.atan2(y[0] * yn[1] - y[1] * yn[0], y[0] * yn[0] + y[1] * yn[1])
        fac11 = err**EXPO1
        if err <= 1.0 and abs(dth) < MAX_DTHETA:
            fac = fac11 / errold**BETA
            fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
            hnew = h / fac
            if rejected:
                hnew = min(hnew, h)
            hnew = min(hnew, hmax)
            errold = max(err, 1e-4)
            rejected = False
            theta += dth
            if record:
                if n >= ts.shape[0]:
                    ts, ys, th, cf = _grow(ts, ys, th, cf)
                ydiff = yn - y
                bspl = hs * k1 - ydiff
                cf[n - 1, 0] = y
                cf[n - 1, 1] = ydiff
                cf[n - 1, 2] = bspl
                cf[n - 1, 3] = ydiff - hs * k7 - bspl
                cf[n - 1, 4] = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
                ts[n] = tn
                ys[n] = yn
                th[n] = theta
                n += 1
            else:
                ts[1] = tn
                ys[1] = yn
                th[1] = theta
                n = 2
            t = tn
            y = yn
            k1 = k7
            if math.hypot(y[0], y[1]) < rmin:
                status = ST_COLLISION
                break
            if last:
                break
            h = hnew
        else:
            if err <= 1.0:
                h = 0.5 * h
            else:
                h = h / min(1.0 / FAC_MIN, fac11 / SAFE)
            rejected = True
        if h < 1e-14 * max(1.0, abs(t)):
            status = ST_UNDERFLOW
            break
    return status, n, ts, ys, th, cf


dp5_jit = _jit(dp5)
