"""Compiled planar fast path for the level recursion.

Evaluating a level-n field integrates a full level-(n-1) flow, so the cost
of the general path grows geometrically with n.  This module repeats the
same numerics (identical tableau, step controller, bracketing, bisection,
horizon policy, finite-difference accelerations) on flat planar arrays so
numba can compile the whole recursion; ``trajectory`` dispatches here for
planar states.  When numba is missing, or LWPAIR_DISABLE_JIT=1 is set, the
identical code runs uncompiled.

Errors are threaded through the recursion as status codes and turned into
the package exception types (with the level they arose at) by the Python
wrapper.
"""

import os

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateConfigurationError,
    IntegrationStallError,
    NoRootError,
    SingularityError,
    SuperluminalError,
)
from .rkf45 import (
    TERM_SEPARATION,
    TERM_SPEED,
    TERM_TARGET,
    TrajectorySegment,
)

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

COMPILED = _HAVE_NUMBA and os.environ.get("LWPAIR_DISABLE_JIT", "0") not in (
    "1",
    "true",
)

if COMPILED:

    def _jit(fn):
        return numba.njit(cache=True)(fn)

else:

    def _jit(fn):
        return fn


OK = 0
ERR_SINGULAR = 1
ERR_SUPERLUMINAL = 2
ERR_DEGENERATE = 3
ERR_STALL = 4
ERR_NOROOT = 5
ERR_CONV = 6
ERR_BUDGET = 7

REASON_TARGET = 0
REASON_SPEED = 1
REASON_SEPARATION = 2

# Fehlberg 4(5) tableau (identical to rkf45.py).
_A21 = 0.25
_A31, _A32 = 3.0 / 32.0, 9.0 / 32.0
_A41, _A42, _A43 = 1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0
_A51, _A52, _A53, _A54 = 439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0
_A61, _A62, _A63, _A64, _A65 = (
    -8.0 / 27.0,
    2.0,
    -3544.0 / 2565.0,
    1859.0 / 4104.0,
    -11.0 / 40.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    16.0 / 135.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
)
_E1, _E3, _E4, _E5, _E6 = (
    1.0 / 360.0,
    -128.0 / 4275.0,
    -2197.0 / 75240.0,
    1.0 / 50.0,
    2.0 / 55.0,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_STALL_FLOOR = 1e-12
_EVENT_RES = 1e-9
_DENOM_FLOOR = 1e-9
_COND_LIMIT = 1e12
_BISECT_MAX = 200
_HARD_MARGIN = 1.0 + 1e-6
_MAX_EXTEND = 64
# a healthy inner flow needs a few thousand knots; far beyond that it is
# grinding asymptotically toward its own singularity and is treated like a
# stalled (dead but usable) flow
_MAX_STEPS_FLOW = 200_000


@_jit
def _kern2(px, py, wx, wy, ex, ey, dist, s, sign):
    """Planar force kernel; returns (status, fx, fy, m00, m01, m10, m11)."""
    wex = s * wx
    wey = s * wy
    d = 1.0 - (wex * ex + wey * ey)
    if abs(d) < _DENOM_FLOOR:
        return ERR_SINGULAR, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    w2 = wx * wx + wy * wy
    d3 = d * d * d
    pre = sign * (1.0 - w2) / (d3 * dist * dist)
    zeta = wex * ey - wey * ex
    fx = pre * (py * zeta + ex - wex)
    fy = pre * (-px * zeta + ey - wey)

    pe = px * ex + py * ey
    ewx = ex - wex
    ewy = ey - wey
    pew = px * ewx + py * ewy
    one_pe = 1.0 - pe
    l00 = one_pe * d + d * ex * px - one_pe * ewx * ex - pew * ex * ex
    l01 = d * ex * py - one_pe * ewx * ey - pew * ex * ey
    l10 = d * ey * px - one_pe * ewy * ex - pew * ey * ex
    l11 = one_pe * d + d * ey * py - one_pe * ewy * ey - pew * ey * ey
    fac = sign / (d3 * dist)
    return OK, fx, fy, fac * l00, fac * l01, fac * l10, fac * l11


@_jit
def _h0(y, eta, sign, alpha, out):
    """Equal-times planar field; writes (v1, a1, v2, a2) into out."""
    dx = y[0] - y[4]
    dy = y[1] - y[5]
    r2 = dx * dx + dy * dy
    if r2 == 0.0:
        return ERR_SINGULAR
    dist = np.sqrt(r2)
    e1x = dx / dist
    e1y = dy / dist
    v1x, v1y, v2x, v2y = y[2], y[3], y[6], y[7]

    st, f1mx, f1my, a00, a01, a10, a11 = _kern2(
        v1x, v1y, v2x, v2y, e1x, e1y, dist, 1.0, sign
    )
    if st != OK:
        return st
    st, f1px, f1py, b00, b01, b10, b11 = _kern2(
        v1x, v1y, v2x, v2y, e1x, e1y, dist, -1.0, sign
    )
    if st != OK:
        return st
    st, f2mx, f2my, c00, c01, c10, c11 = _kern2(
        v2x, v2y, v1x, v1y, -e1x, -e1y, dist, 1.0, sign
    )
    if st != OK:
        return st
    st, f2px, f2py, d00, d01, d10, d11 = _kern2(
        v2x, v2y, v1x, v1y, -e1x, -e1y, dist, -1.0, sign
    )
    if st != OK:
        return st

    wr = 0.5 + alpha
    wa = 0.5 - alpha
    f1x = wr * f1mx + wa * f1px
    f1y = wr * f1my + wa * f1py
    f2x = wr * f2mx + wa * f2px
    f2y = wr * f2my + wa * f2py
    m12_00 = wr * a00 + wa * b00
    m12_01 = wr * a01 + wa * b01
    m12_10 = wr * a10 + wa * b10
    m12_11 = wr * a11 + wa * b11
    m21_00 = wr * c00 + wa * d00
    m21_01 = wr * c01 + wa * d01
    m21_10 = wr * c10 + wa * d10
    m21_11 = wr * c11 + wa * d11

    s1 = v1x * v1x + v1y * v1y
    s2 = v2x * v2x + v2y * v2y
    if s1 >= 1.0 or s2 >= 1.0:
        return ERR_SUPERLUMINAL
    g1i = np.sqrt(1.0 - s1)
    g2i = np.sqrt(1.0 - s2)
    p100 = g1i * (1.0 - v1x * v1x)
    p101 = -g1i * v1x * v1y
    p111 = g1i * (1.0 - v1y * v1y)
    p200 = g2i * (1.0 - v2x * v2x)
    p201 = -g2i * v2x * v2y
    p211 = g2i * (1.0 - v2y * v2y)

    c12_00 = p100 * m12_00 + p101 * m12_10
    c12_01 = p100 * m12_01 + p101 * m12_11
    c12_10 = p101 * m12_00 + p111 * m12_10
    c12_11 = p101 * m12_01 + p111 * m12_11
    c21_00 = p200 * m21_00 + p201 * m21_10
    c21_01 = p200 * m21_01 + p201 * m21_11
    c21_10 = p201 * m21_00 + p211 * m21_10
    c21_11 = p201 * m21_01 + p211 * m21_11

    inv_eta = 1.0 / eta
    t00 = c12_00 * c21_00 + c12_01 * c21_10
    t01 = c12_00 * c21_01 + c12_01 * c21_11
    t10 = c12_10 * c21_00 + c12_11 * c21_10
    t11 = c12_10 * c21_01 + c12_11 * c21_11
    q00 = 1.0 - inv_eta * t00
    q01 = -inv_eta * t01
    q10 = -inv_eta * t10
    q11 = 1.0 - inv_eta * t11

    u00 = c21_00 * c12_00 + c21_01 * c12_10
    u01 = c21_00 * c12_01 + c21_01 * c12_11
    u10 = c21_10 * c12_00 + c21_11 * c12_10
    u11 = c21_10 * c12_01 + c21_11 * c12_11
    w00 = 1.0 - inv_eta * u00
    w01 = -inv_eta * u01
    w10 = -inv_eta * u10
    w11 = 1.0 - inv_eta * u11

    det_q = q00 * q11 - q01 * q10
    det_w = w00 * w11 - w01 * w10
    if det_q == 0.0 or det_w == 0.0:
        return ERR_DEGENERATE
    fq = q00 * q00 + q01 * q01 + q10 * q10 + q11 * q11
    fw = w00 * w00 + w01 * w01 + w10 * w10 + w11 * w11
    # kappa + 1/kappa = ||A||_F^2 / |det|, so this bounds the 2-norm condition
    if fq / abs(det_q) > _COND_LIMIT or fw / abs(det_w) > _COND_LIMIT:
        return ERR_DEGENERATE

    g2fx = p200 * f2x + p201 * f2y
    g2fy = p201 * f2x + p211 * f2y
    rhs1x = p100 * f1x + p101 * f1y - (c12_00 * g2fx + c12_01 * g2fy)
    rhs1y = p101 * f1x + p111 * f1y - (c12_10 * g2fx + c12_11 * g2fy)
    a1x = (q11 * rhs1x - q01 * rhs1y) / det_q * inv_eta
    a1y = (-q10 * rhs1x + q00 * rhs1y) / det_q * inv_eta

    g1fx = p100 * f1x + p101 * f1y
    g1fy = p101 * f1x + p111 * f1y
    rhs2x = g2fx - inv_eta * (c21_00 * g1fx + c21_01 * g1fy)
    rhs2y = g2fy - inv_eta * (c21_10 * g1fx + c21_11 * g1fy)
    a2x = (w11 * rhs2x - w01 * rhs2y) / det_w
    a2y = (-w10 * rhs2x + w00 * rhs2y) / det_w

    out[0] = v1x
    out[1] = v1y
    out[2] = a1x
    out[3] = a1y
    out[4] = v2x
    out[5] = v2y
    out[6] = a2x
    out[7] = a2y
    return OK


@_jit
def _locate(ts, nk, tau, asc):
    lo = 0
    hi = nk - 1
    if asc:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ts[mid] <= tau:
                lo = mid
            else:
                hi = mid
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ts[mid] >= tau:
                lo = mid
            else:
                hi = mid
    return lo


@_jit
def _interp(ts, ys, ks, nk, tau, asc, out):
    """Cubic Hermite state at tau; exact at knots."""
    i = _locate(ts, nk, tau, asc)
    t0 = ts[i]
    t1 = ts[i + 1]
    if tau == t0:
        for j in range(8):
            out[j] = ys[i, j]
        return
    if tau == t1:
        for j in range(8):
            out[j] = ys[i + 1, j]
        return
    h = t1 - t0
    th = (tau - t0) / h
    t2 = th * th
    t3 = t2 * th
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h01 = -2.0 * t3 + 3.0 * t2
    h10 = t3 - 2.0 * t2 + th
    h11 = t3 - t2
    for j in range(8):
        out[j] = (
            h00 * ys[i, j]
            + h01 * ys[i + 1, j]
            + h * (h10 * ks[i, j] + h11 * ks[i + 1, j])
        )


@_jit
def _residual(ts, ys, ks, nk, asc, particle, rox, roy, tau, adv, buf):
    _interp(ts, ys, ks, nk, tau, asc, buf)
    off = 0 if particle == 1 else 4
    dx = rox - buf[off]
    dy = roy - buf[off + 1]
    dist = np.sqrt(dx * dx + dy * dy)
    if adv:
        return tau - dist
    return tau + dist


@_jit
def _field(
    n,
    y,
    eta,
    sign,
    alpha,
    atol,
    rtol,
    delay_tol,
    dtau_rel,
    horizon_factor,
    exact_accel,
    out,
):
    """Level-n planar field value; returns (status, level_of_error)."""
    if n == 0:
        return _h0(y, eta, sign, alpha, out), 0

    sx = y[0] - y[4]
    sy = y[1] - y[5]
    sep = np.sqrt(sx * sx + sy * sy)
    if sep == 0.0:
        return ERR_SINGULAR, n
    dtau = dtau_rel * sep
    r1x, r1y, r2x, r2y = y[0], y[1], y[4], y[5]
    wr = 0.5 + alpha
    wa = 0.5 - alpha

    dst = np.empty((4, 8))
    dacc = np.empty((4, 4))
    buf = np.empty(8)
    buf2 = np.empty(8)
    yt = np.empty(8)
    kk = np.empty((6, 8))

    for di in range(2):
        # a zero-weight branch never constrains the field's domain
        if di == 0 and wr == 0.0:
            continue
        if di == 1 and wa == 0.0:
            continue
        dirn = -1.0 if di == 0 else 1.0
        asc = di == 1
        cap = 512
        ts = np.empty(cap)
        ys = np.empty((cap, 8))
        ks = np.empty((cap, 8))
        st, el = _field(
            n - 1, y, eta, sign, alpha, atol, rtol, delay_tol, dtau_rel,
            horizon_factor, exact_accel, buf,
        )
        if st != OK:
            return st, el
        ts[0] = 0.0
        for j in range(8):
            ys[0, j] = y[j]
            ks[0, j] = buf[j]
        nk = 1
        bmax1 = np.sqrt(y[2] * y[2] + y[3] * y[3])
        bmax2 = np.sqrt(y[6] * y[6] + y[7] * y[7])

        needed = horizon_factor * sep
        d0s = 0.0
        d1s = 0.0
        for j in range(8):
            sc = atol + rtol * abs(y[j])
            d0s += (y[j] / sc) ** 2
            d1s += (buf[j] / sc) ** 2
        d0 = np.sqrt(d0s / 8.0)
        d1 = np.sqrt(d1s / 8.0)
        if d1 <= 1e-300:
            h = needed
        else:
            h = 0.01 * max(d0, 1e-6) / d1
            if h > needed:
                h = needed

        yc = np.empty(8)
        k1 = np.empty(8)
        for j in range(8):
            yc[j] = y[j]
            k1[j] = buf[j]
        tcur = 0.0

        root1 = 0.0
        root2 = 0.0
        solved = False
        # a flow stalling at its own singularity stays usable up to its span
        flow_dead = False
        steps = 0
        for _ext in range(_MAX_EXTEND):
            while not flow_dead and abs(tcur) < needed:
                steps += 1
                if steps > _MAX_STEPS_FLOW:
                    flow_dead = True
                    break
                if h < _STALL_FLOOR * max(1.0, abs(tcur)):
                    flow_dead = True
                    break
                hs = dirn * h
                for j in range(8):
                    kk[0, j] = k1[j]
                bad = False
                for stg in range(1, 6):
                    if stg == 1:
                        for j in range(8):
                            yt[j] = yc[j] + hs * _A21 * kk[0, j]
                    elif stg == 2:
                        for j in range(8):
                            yt[j] = yc[j] + hs * (_A31 * kk[0, j] + _A32 * kk[1, j])
                    elif stg == 3:
                        for j in range(8):
                            yt[j] = yc[j] + hs * (
                                _A41 * kk[0, j] + _A42 * kk[1, j] + _A43 * kk[2, j]
                            )
                    elif stg == 4:
                        for j in range(8):
                            yt[j] = yc[j] + hs * (
                                _A51 * kk[0, j]
                                + _A52 * kk[1, j]
                                + _A53 * kk[2, j]
                                + _A54 * kk[3, j]
                            )
                    else:
                        for j in range(8):
                            yt[j] = yc[j] + hs * (
                                _A61 * kk[0, j]
                                + _A62 * kk[1, j]
                                + _A63 * kk[2, j]
                                + _A64 * kk[3, j]
                                + _A65 * kk[4, j]
                            )
                    if (
                        yt[2] * yt[2] + yt[3] * yt[3] >= 1.0
                        or yt[6] * yt[6] + yt[7] * yt[7] >= 1.0
                    ):
                        bad = True
                        break
                    # trial states probing past a singularity only reject the step
                    st, el = _field(
                        n - 1, yt, eta, sign, alpha, atol, rtol, delay_tol,
                        dtau_rel, horizon_factor, exact_accel, buf,
                    )
                    if st != OK:
                        bad = True
                        break
                    for j in range(8):
                        kk[stg, j] = buf[j]
                if bad:
                    h *= 0.5
                    continue

                errn = 0.0
                for j in range(8):
                    e = hs * (
                        _E1 * kk[0, j]
                        + _E3 * kk[2, j]
                        + _E4 * kk[3, j]
                        + _E5 * kk[4, j]
                        + _E6 * kk[5, j]
                    )
                    sc = atol + rtol * abs(yc[j])
                    errn += (e / sc) ** 2
                errn = np.sqrt(errn / 8.0)
                if errn > 1.0:
                    fac = _SAFETY * errn**-0.2
                    if fac < _MIN_FACTOR:
                        fac = _MIN_FACTOR
                    h *= fac
                    continue

                for j in range(8):
                    yt[j] = yc[j] + hs * (
                        _B1 * kk[0, j]
                        + _B3 * kk[2, j]
                        + _B4 * kk[3, j]
                        + _B5 * kk[4, j]
                        + _B6 * kk[5, j]
                    )
                if (
                    yt[2] * yt[2] + yt[3] * yt[3] >= 1.0
                    or yt[6] * yt[6] + yt[7] * yt[7] >= 1.0
                ):
                    h *= 0.5
                    continue
                st, el = _field(
                    n - 1, yt, eta, sign, alpha, atol, rtol, delay_tol,
                    dtau_rel, horizon_factor, exact_accel, buf,
                )
                if st != OK:
                    h *= 0.5
                    continue
                if nk == cap:
                    cap2 = cap * 2
                    ts2 = np.empty(cap2)
                    ys2 = np.empty((cap2, 8))
                    ks2 = np.empty((cap2, 8))
                    for i in range(nk):
                        ts2[i] = ts[i]
                        for j in range(8):
                            ys2[i, j] = ys[i, j]
                            ks2[i, j] = ks[i, j]
                    ts = ts2
                    ys = ys2
                    ks = ks2
                    cap = cap2
                tcur += hs
                for j in range(8):
                    yc[j] = yt[j]
                    k1[j] = buf[j]
                ts[nk] = tcur
                for j in range(8):
                    ys[nk, j] = yc[j]
                    ks[nk, j] = k1[j]
                nk += 1
                sp1 = np.sqrt(yc[2] * yc[2] + yc[3] * yc[3])
                sp2 = np.sqrt(yc[6] * yc[6] + yc[7] * yc[7])
                if sp1 > bmax1:
                    bmax1 = sp1
                if sp2 > bmax2:
                    bmax2 = sp2
                if errn == 0.0:
                    h *= _MAX_FACTOR
                else:
                    fac = _SAFETY * errn**-0.2
                    if fac < _MIN_FACTOR:
                        fac = _MIN_FACTOR
                    elif fac > _MAX_FACTOR:
                        fac = _MAX_FACTOR
                    h *= fac

            extend = False
            for particle in range(1, 3):
                rox = r2x if particle == 1 else r1x
                roy = r2y if particle == 1 else r1y
                bmax = bmax1 if particle == 1 else bmax2
                if bmax >= 1.0:
                    return ERR_NOROOT, n - 1
                r0 = sep
                hard = r0 / (1.0 - bmax) * _HARD_MARGIN + 1e-12
                far = dirn * 2.0 * r0  # hard bound caps expansion, not the guess
                g_near = _residual(
                    ts, ys, ks, nk, asc, particle, rox, roy, 0.0, asc, buf
                )
                span_end = ts[nk - 1]
                bracketed = False
                while True:
                    # probe no farther than the covered span; a root inside
                    # a flow that ended early is still usable
                    probe = span_end if abs(far) > abs(span_end) else far
                    g_far = _residual(
                        ts, ys, ks, nk, asc, particle, rox, roy, probe, asc, buf
                    )
                    if g_far == 0.0 or (g_far < 0.0) != (g_near < 0.0):
                        far = probe
                        bracketed = True
                        break
                    if probe != far:
                        needed = abs(far) + sep
                        extend = True
                        break
                    if abs(far) >= hard:
                        return ERR_NOROOT, n - 1
                    nfar = 2.0 * abs(far)
                    if nfar > hard:
                        nfar = hard
                    far = dirn * nfar
                if extend:
                    break
                if not bracketed:
                    return ERR_NOROOT, n - 1
                lo = far if far < 0.0 else 0.0
                hi = 0.0 if far < 0.0 else far
                # clip to the first knot interval with a sign change: knot
                # states are exact, which keeps the bisection out of the
                # corrupt final interval of a flow that stalled at its own
                # singularity (tiny step paired with exploding derivatives)
                off = 0 if particle == 1 else 4
                pg = 0.0
                pt = 0.0
                have_prev = False
                for i in range(nk):
                    tk = ts[i]
                    if tk < lo or tk > hi:
                        break  # storage walks outward from tau = 0
                    ddx = rox - ys[i, off]
                    ddy = roy - ys[i, off + 1]
                    gd = np.sqrt(ddx * ddx + ddy * ddy)
                    gk = tk - gd if asc else tk + gd
                    if have_prev and (gk < 0.0) != (pg < 0.0):
                        a = pt if pt < tk else tk
                        b = tk if pt < tk else pt
                        if a > lo:
                            lo = a
                        if b < hi:
                            hi = b
                        break
                    pg = gk
                    pt = tk
                    have_prev = True
                g_lo = _residual(ts, ys, ks, nk, asc, particle, rox, roy, lo, asc, buf)
                g_hi = _residual(ts, ys, ks, nk, asc, particle, rox, roy, hi, asc, buf)
                root = 0.0
                found = False
                if g_lo == 0.0:
                    root = lo
                    found = True
                elif g_hi == 0.0:
                    root = hi
                    found = True
                elif (g_lo < 0.0) == (g_hi < 0.0):
                    return ERR_NOROOT, n - 1
                if not found:
                    for _it in range(_BISECT_MAX):
                        mid = 0.5 * (lo + hi)
                        g_mid = _residual(
                            ts, ys, ks, nk, asc, particle, rox, roy, mid, asc, buf
                        )
                        if abs(g_mid) < delay_tol:
                            root = mid
                            found = True
                            break
                        if (g_mid < 0.0) == (g_lo < 0.0):
                            lo = mid
                            g_lo = g_mid
                        else:
                            hi = mid
                    if not found:
                        return ERR_CONV, n - 1
                if particle == 1:
                    root1 = root
                else:
                    root2 = root
            if extend:
                if flow_dead:
                    return ERR_STALL, n - 1
                continue
            if asc and not exact_accel and not flow_dead:
                margin = max(root1, root2) + 2.0 * dtau
                if ts[nk - 1] < margin:
                    needed = margin + sep
                    continue
            solved = True
            break
        if not solved:
            return ERR_BUDGET, n - 1

        base = 0 if di == 0 else 2
        for particle in range(1, 3):
            root = root1 if particle == 1 else root2
            slot = base + particle - 1
            _interp(ts, ys, ks, nk, root, asc, buf)
            for j in range(8):
                dst[slot, j] = buf[j]
            fd_ok = not exact_accel
            if fd_ok and asc and root + dtau > ts[nk - 1]:
                # stalled flow edge: fall back to the exact field value
                fd_ok = False
            if fd_ok:
                _interp(ts, ys, ks, nk, root + dtau, asc, buf2)
                dacc[slot, 0] = (buf2[2] - buf[2]) / dtau
                dacc[slot, 1] = (buf2[3] - buf[3]) / dtau
                dacc[slot, 2] = (buf2[6] - buf[6]) / dtau
                dacc[slot, 3] = (buf2[7] - buf[7]) / dtau
            else:
                for j in range(8):
                    yt[j] = buf[j]
                st, el = _field(
                    n - 1, yt, eta, sign, alpha, atol, rtol, delay_tol,
                    dtau_rel, horizon_factor, exact_accel, buf2,
                )
                if st != OK:
                    return st, el
                dacc[slot, 0] = buf2[2]
                dacc[slot, 1] = buf2[3]
                dacc[slot, 2] = buf2[6]
                dacc[slot, 3] = buf2[7]

    v1x, v1y, v2x, v2y = y[2], y[3], y[6], y[7]
    s1 = v1x * v1x + v1y * v1y
    s2 = v2x * v2x + v2y * v2y
    if s1 >= 1.0 or s2 >= 1.0:
        return ERR_SUPERLUMINAL, n

    # force on particle 1: particle 2's data at tau2_ret (slot 1), tau2_adv (slot 3)
    rhs1x = 0.0
    rhs1y = 0.0
    for pass_i in range(2):
        slot = 1 if pass_i == 0 else 3
        s = 1.0 if pass_i == 0 else -1.0
        wgt = wr if pass_i == 0 else wa
        if wgt == 0.0:
            continue
        rdx = r1x - dst[slot, 4]
        rdy = r1y - dst[slot, 5]
        dist = np.sqrt(rdx * rdx + rdy * rdy)
        if dist == 0.0:
            return ERR_SINGULAR, n
        st, fx, fy, m00, m01, m10, m11 = _kern2(
            v1x, v1y, dst[slot, 6], dst[slot, 7], rdx / dist, rdy / dist, dist, s, sign
        )
        if st != OK:
            return st, n
        ax = dacc[slot, 2]
        ay = dacc[slot, 3]
        rhs1x += wgt * (fx - (m00 * ax + m01 * ay))
        rhs1y += wgt * (fy - (m10 * ax + m11 * ay))

    # force on particle 2: particle 1's data at tau1_ret (slot 0), tau1_adv (slot 2)
    rhs2x = 0.0
    rhs2y = 0.0
    for pass_i in range(2):
        slot = 0 if pass_i == 0 else 2
        s = 1.0 if pass_i == 0 else -1.0
        wgt = wr if pass_i == 0 else wa
        if wgt == 0.0:
            continue
        rdx = r2x - dst[slot, 0]
        rdy = r2y - dst[slot, 1]
        dist = np.sqrt(rdx * rdx + rdy * rdy)
        if dist == 0.0:
            return ERR_SINGULAR, n
        st, fx, fy, m00, m01, m10, m11 = _kern2(
            v2x, v2y, dst[slot, 2], dst[slot, 3], rdx / dist, rdy / dist, dist, s, sign
        )
        if st != OK:
            return st, n
        ax = dacc[slot, 0]
        ay = dacc[slot, 1]
        rhs2x += wgt * (fx - (m00 * ax + m01 * ay))
        rhs2y += wgt * (fy - (m10 * ax + m11 * ay))

    g1i = np.sqrt(1.0 - s1)
    g2i = np.sqrt(1.0 - s2)
    p100 = g1i * (1.0 - v1x * v1x)
    p101 = -g1i * v1x * v1y
    p111 = g1i * (1.0 - v1y * v1y)
    p200 = g2i * (1.0 - v2x * v2x)
    p201 = -g2i * v2x * v2y
    p211 = g2i * (1.0 - v2y * v2y)

    out[0] = v1x
    out[1] = v1y
    out[2] = (p100 * rhs1x + p101 * rhs1y) / eta
    out[3] = (p101 * rhs1x + p111 * rhs1y) / eta
    out[4] = v2x
    out[5] = v2y
    out[6] = p200 * rhs2x + p201 * rhs2y
    out[7] = p201 * rhs2x + p211 * rhs2y
    return OK, 0


@_jit
def _run(
    n,
    y0,
    eta,
    sign,
    alpha,
    atol,
    rtol,
    delay_tol,
    dtau_rel,
    horizon_factor,
    exact_accel,
    t_limit,
    v_threshold,
    min_sep,
    max_steps,
):
    """Top-level trajectory integration with stop conditions.

    Returns (ts, ys, ks, nk, status, err_level, reason, t_end, h_last).
    """
    cap = 1024
    ts = np.empty(cap)
    ys = np.empty((cap, 8))
    ks = np.empty((cap, 8))
    buf = np.empty(8)
    yt = np.empty(8)
    y_ev = np.empty(8)
    kk = np.empty((6, 8))

    st, el = _field(
        n, y0, eta, sign, alpha, atol, rtol, delay_tol, dtau_rel,
        horizon_factor, exact_accel, buf,
    )
    if st != OK:
        return ts, ys, ks, 0, st, el, REASON_TARGET, 0.0, 0.0
    ts[0] = 0.0
    for j in range(8):
        ys[0, j] = y0[j]
        ks[0, j] = buf[j]
    nk = 1

    target = t_limit
    dirn = 1.0 if target > 0 else -1.0

    d0s = 0.0
    d1s = 0.0
    for j in range(8):
        sc = atol + rtol * abs(y0[j])
        d0s += (y0[j] / sc) ** 2
        d1s += (buf[j] / sc) ** 2
    d0 = np.sqrt(d0s / 8.0)
    d1 = np.sqrt(d1s / 8.0)
    if d1 <= 1e-300:
        h = abs(target)
    else:
        h = 0.01 * max(d0, 1e-6) / d1
        if h > abs(target):
            h = abs(target)

    smax0 = max(
        np.sqrt(y0[2] * y0[2] + y0[3] * y0[3]),
        np.sqrt(y0[6] * y0[6] + y0[7] * y0[7]),
    )
    sep0 = np.sqrt((y0[0] - y0[4]) ** 2 + (y0[1] - y0[5]) ** 2)
    if smax0 >= v_threshold:
        return ts, ys, ks, nk, OK, 0, REASON_SPEED, 0.0, h
    if sep0 <= min_sep:
        return ts, ys, ks, nk, OK, 0, REASON_SEPARATION, 0.0, h

    yc = np.empty(8)
    k1 = np.empty(8)
    for j in range(8):
        yc[j] = y0[j]
        k1[j] = buf[j]
    tcur = 0.0

    for _step in range(max_steps):
        remaining = abs(target - tcur)
        if remaining <= abs(target) * 1e-15:
            return ts, ys, ks, nk, OK, 0, REASON_TARGET, tcur, h
        if h > remaining:
            h = remaining
        if h < _STALL_FLOOR * max(1.0, abs(tcur)):
            return ts, ys, ks, nk, ERR_STALL, n, REASON_TARGET, tcur, h

        hs = dirn * h
        for j in range(8):
            kk[0, j] = k1[j]
        bad = False
        for stg in range(1, 6):
            if stg == 1:
                for j in range(8):
                    yt[j] = yc[j] + hs * _A21 * kk[0, j]
            elif stg == 2:
                for j in range(8):
                    yt[j] = yc[j] + hs * (_A31 * kk[0, j] + _A32 * kk[1, j])
            elif stg == 3:
                for j in range(8):
                    yt[j] = yc[j] + hs * (
                        _A41 * kk[0, j] + _A42 * kk[1, j] + _A43 * kk[2, j]
                    )
            elif stg == 4:
                for j in range(8):
                    yt[j] = yc[j] + hs * (
                        _A51 * kk[0, j]
                        + _A52 * kk[1, j]
                        + _A53 * kk[2, j]
                        + _A54 * kk[3, j]
                    )
            else:
                for j in range(8):
                    yt[j] = yc[j] + hs * (
                        _A61 * kk[0, j]
                        + _A62 * kk[1, j]
                        + _A63 * kk[2, j]
                        + _A64 * kk[3, j]
                        + _A65 * kk[4, j]
                    )
            if (
                yt[2] * yt[2] + yt[3] * yt[3] >= 1.0
                or yt[6] * yt[6] + yt[7] * yt[7] >= 1.0
            ):
                bad = True
                break
            # trial states probing past a singularity only reject the step
            st, el = _field(
                n, yt, eta, sign, alpha, atol, rtol, delay_tol, dtau_rel,
                horizon_factor, exact_accel, buf,
            )
            if st != OK:
                bad = True
                break
            for j in range(8):
                kk[stg, j] = buf[j]
        if bad:
            h *= 0.5
            continue

        errn = 0.0
        for j in range(8):
            e = hs * (
                _E1 * kk[0, j]
                + _E3 * kk[2, j]
                + _E4 * kk[3, j]
                + _E5 * kk[4, j]
                + _E6 * kk[5, j]
            )
            sc = atol + rtol * abs(yc[j])
            errn += (e / sc) ** 2
        errn = np.sqrt(errn / 8.0)
        if errn > 1.0:
            fac = _SAFETY * errn**-0.2
            if fac < _MIN_FACTOR:
                fac = _MIN_FACTOR
            h *= fac
            continue

        for j in range(8):
            yt[j] = yc[j] + hs * (
                _B1 * kk[0, j]
                + _B3 * kk[2, j]
                + _B4 * kk[3, j]
                + _B5 * kk[4, j]
                + _B6 * kk[5, j]
            )
        if (
            yt[2] * yt[2] + yt[3] * yt[3] >= 1.0
            or yt[6] * yt[6] + yt[7] * yt[7] >= 1.0
        ):
            h *= 0.5
            continue
        st, el = _field(
            n, yt, eta, sign, alpha, atol, rtol, delay_tol, dtau_rel,
            horizon_factor, exact_accel, buf,
        )
        if st != OK:
            h *= 0.5
            continue

        if nk == cap:
            cap2 = cap * 2
            ts2 = np.empty(cap2)
            ys2 = np.empty((cap2, 8))
            ks2 = np.empty((cap2, 8))
            for i in range(nk):
                ts2[i] = ts[i]
                for j in range(8):
                    ys2[i, j] = ys[i, j]
                    ks2[i, j] = ks[i, j]
            ts = ts2
            ys = ys2
            ks = ks2
            cap = cap2

        t_new = tcur + hs
        ts[nk] = t_new
        for j in range(8):
            ys[nk, j] = yt[j]
            ks[nk, j] = buf[j]
        nk += 1

        smax = max(
            np.sqrt(yt[2] * yt[2] + yt[3] * yt[3]),
            np.sqrt(yt[6] * yt[6] + yt[7] * yt[7]),
        )
        sep = np.sqrt((yt[0] - yt[4]) ** 2 + (yt[1] - yt[5]) ** 2)
        speed_hit = smax >= v_threshold
        sep_hit = sep <= min_sep
        if speed_hit or sep_hit:
            t_lo = tcur
            t_hi = t_new
            i0 = nk - 2
            hh = ts[i0 + 1] - ts[i0]
            while abs(t_hi - t_lo) > _EVENT_RES:
                mid = 0.5 * (t_lo + t_hi)
                th = (mid - ts[i0]) / hh
                tt2 = th * th
                tt3 = tt2 * th
                h00 = 2.0 * tt3 - 3.0 * tt2 + 1.0
                h01 = -2.0 * tt3 + 3.0 * tt2
                h10 = tt3 - 2.0 * tt2 + th
                h11 = tt3 - tt2
                for j in range(8):
                    y_ev[j] = (
                        h00 * ys[i0, j]
                        + h01 * ys[i0 + 1, j]
                        + hh * (h10 * ks[i0, j] + h11 * ks[i0 + 1, j])
                    )
                if speed_hit:
                    g = (
                        max(
                            np.sqrt(y_ev[2] * y_ev[2] + y_ev[3] * y_ev[3]),
                            np.sqrt(y_ev[6] * y_ev[6] + y_ev[7] * y_ev[7]),
                        )
                        - v_threshold
                    )
                else:
                    g = min_sep - np.sqrt(
                        (y_ev[0] - y_ev[4]) ** 2 + (y_ev[1] - y_ev[5]) ** 2
                    )
                if g >= 0.0:
                    t_hi = mid
                else:
                    t_lo = mid
            t_event = t_hi
            th = (t_event - ts[i0]) / hh
            tt2 = th * th
            tt3 = tt2 * th
            h00 = 2.0 * tt3 - 3.0 * tt2 + 1.0
            h01 = -2.0 * tt3 + 3.0 * tt2
            h10 = tt3 - 2.0 * tt2 + th
            h11 = tt3 - tt2
            for j in range(8):
                y_ev[j] = (
                    h00 * ys[i0, j]
                    + h01 * ys[i0 + 1, j]
                    + hh * (h10 * ks[i0, j] + h11 * ks[i0 + 1, j])
                )
            st, el = _field(
                n, y_ev, eta, sign, alpha, atol, rtol, delay_tol, dtau_rel,
                horizon_factor, exact_accel, buf,
            )
            if st != OK:
                return ts, ys, ks, nk, st, el, REASON_TARGET, tcur, h
            ts[nk - 1] = t_event
            for j in range(8):
                ys[nk - 1, j] = y_ev[j]
                ks[nk - 1, j] = buf[j]
            reason = REASON_SPEED if speed_hit else REASON_SEPARATION
            return ts, ys, ks, nk, OK, 0, reason, t_event, h

        if errn == 0.0:
            h *= _MAX_FACTOR
        else:
            fac = _SAFETY * errn**-0.2
            if fac < _MIN_FACTOR:
                fac = _MIN_FACTOR
            elif fac > _MAX_FACTOR:
                fac = _MAX_FACTOR
            h *= fac
        tcur = t_new
        for j in range(8):
            yc[j] = yt[j]
            k1[j] = buf[j]

    return ts, ys, ks, nk, ERR_BUDGET, n, REASON_TARGET, tcur, h


_STATUS_EXC = {
    ERR_SINGULAR: (SingularityError, "singular kernel in compiled planar run"),
    ERR_SUPERLUMINAL: (SuperluminalError, "superluminal state in compiled planar run"),
    ERR_DEGENERATE: (
        DegenerateConfigurationError,
        "ill-conditioned acceleration solve in compiled planar run",
    ),
    ERR_STALL: (IntegrationStallError, "step size underflow in compiled planar run"),
    ERR_NOROOT: (NoRootError, "no light-cone root in compiled planar run"),
    ERR_CONV: (ConvergenceError, "bisection stalled in compiled planar run"),
    ERR_BUDGET: (IntegrationStallError, "step budget exhausted in compiled planar run"),
}

_REASONS = {
    REASON_TARGET: TERM_TARGET,
    REASON_SPEED: TERM_SPEED,
    REASON_SEPARATION: TERM_SEPARATION,
}


def usable(cfg):
    """The fast path covers planar runs with the per-evaluation cache."""
    return cfg.cache == "per-evaluation"


def _planarize(x0):
    if x0.dim == 2:
        return x0.to_array()
    return np.concatenate([x0.r1[:2], x0.v1[:2], x0.r2[:2], x0.v2[:2]])


_EMBED_COLS = (0, 1, 3, 4, 6, 7, 9, 10)


def _embed(arr, dim):
    if dim == 2:
        return arr.copy()
    out = np.zeros((arr.shape[0], 12))
    for src, dst in enumerate(_EMBED_COLS):
        out[:, dst] = arr[:, src]
    return out


def field_value(n, y8, params, cfg):
    """Engine evaluation of the level-n planar field (testing hook)."""
    out = np.empty(8)
    st, el = _field(
        int(n),
        np.asarray(y8, dtype=float),
        params.eta,
        float(params.sign),
        params.alpha,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.delay_tol,
        cfg.dtau_rel,
        cfg.horizon_factor,
        cfg.accel_mode == "exact",
        out,
    )
    if st != OK:
        exc, msg = _STATUS_EXC[st]
        raise exc(msg, level=int(el))
    return out


def run_trajectory(n, x0, params, cfg, stop):
    """Planar trajectory via the compiled path; mirrors the general path."""
    y0 = _planarize(x0)
    ts, ys, ks, nk, st, el, reason, t_end, h_last = _run(
        int(n),
        y0,
        params.eta,
        float(params.sign),
        params.alpha,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.delay_tol,
        cfg.dtau_rel,
        cfg.horizon_factor,
        cfg.accel_mode == "exact",
        stop.t_limit,
        stop.v_threshold,
        stop.min_separation,
        10_000_000,
    )
    ts = ts[:nk].copy()
    ys = _embed(ys[:nk], x0.dim)
    ks = _embed(ks[:nk], x0.dim)
    if ts.shape[0] > 1 and ts[1] < ts[0]:
        ts = ts[::-1].copy()
        ys = ys[::-1].copy()
        ks = ks[::-1].copy()
    segment = TrajectorySegment(
        field_id=f"level-{n}",
        t_start=0.0,
        t_end=float(t_end),
        ts=ts,
        ys=ys,
        ks=ks,
        termination=_REASONS[reason] if st == OK else "stall",
        field=None,
        last_step=float(h_last),
    )
    if st != OK:
        exc, msg = _STATUS_EXC[st]
        if exc is IntegrationStallError:
            raise exc(msg, segment=segment, level=int(el))
        raise exc(msg, level=int(el))
    return segment
