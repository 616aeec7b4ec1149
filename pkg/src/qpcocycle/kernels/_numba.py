"""Numba implementations of the hot loops.

Every function here has a twin with the same signature and contract in
``_numpy.py``.  Cocycles arrive unpacked as
``(code, pkind, coupling, energy, t, vcoef, mcoef)``; see ``qpcocycle.core``.
"""

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, error_model="numpy")

TWO_PI = 2.0 * math.pi
# renormalise products once entries leave [2^-64, 2^64]
_BIG = 2.0**64
_SMALL = 2.0**-64
_LN2 = math.log(2.0)


@njit(inline="always", **_JIT)
def _trig(x, coef):
    v = coef[0]
    m = (coef.size - 1) // 2
    for k in range(1, m + 1):
        ang = TWO_PI * k * x
        v += coef[2 * k - 1] * math.cos(ang) + coef[2 * k] * math.sin(ang)
    return v


@njit(inline="always", **_JIT)
def _potential(x, pkind, coupling, vcoef):
    if pkind == 0:
        return 0.0
    if pkind == 1:
        return coupling * math.cos(TWO_PI * x)
    if pkind == 2:
        s = math.sin(math.pi * x)
        return 1.0 / (1.0 + coupling * coupling * s * s)
    return _trig(x, vcoef)


@njit(inline="always", **_JIT)
def _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef):
    if code == 0:
        a = _potential(x, pkind, coupling, vcoef) - energy
        b = -1.0
        c = 1.0
        d = 0.0
    else:
        a = _trig(x, mcoef[0])
        b = _trig(x, mcoef[1])
        c = _trig(x, mcoef[2])
        d = _trig(x, mcoef[3])
    # right multiplication by the shear [[1, 0], [t, 1]]
    return a + t * b, b, c + t * d, d


@njit(inline="always", **_JIT)
def _orbit_point(theta, k, w_hi, w_lo):
    # k * w_hi is exact for |k| < 2**27, and so is its fractional part
    y = k * w_hi
    x = (y - math.floor(y)) + k * w_lo + theta
    return x - math.floor(x)


@njit(**_JIT)
def entries(xs, code, pkind, coupling, energy, t, vcoef, mcoef):
    out = np.empty((xs.size, 4))
    for i in range(xs.size):
        a, b, c, d = _entries(xs[i], code, pkind, coupling, energy, t, vcoef, mcoef)
        out[i, 0] = a
        out[i, 1] = b
        out[i, 2] = c
        out[i, 3] = d
    return out


@njit(**_JIT)
def _push_forward(theta, n, seed, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    r = seed
    viol = False
    check_from = n - n // 2
    start = n
    if math.isinf(r):
        x = _orbit_point(theta, -n, w_hi, w_lo)
        a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
        r = a / c if c != 0.0 else np.inf
        start = n - 1
    for j in range(start, 0, -1):
        x = _orbit_point(theta, -j, w_hi, w_lo)
        a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
        r = (a * r + b) / (c * r + d)
        if j <= check_from and not (r > 0.0 and r < np.inf):
            viol = True
    if n == 1 and not (r > 0.0 and r < np.inf):
        viol = True
    return r, viol


@njit(**_JIT)
def _push_backward(theta, n, seed, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    # inverse matrix up to the determinant, which the Mobius action ignores
    r = seed
    viol = False
    check_from = n - n // 2
    start = n
    if math.isinf(r):
        x = _orbit_point(theta, n - 1, w_hi, w_lo)
        a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
        r = -d / c if c != 0.0 else np.inf
        start = n - 1
    for j in range(start, 0, -1):
        x = _orbit_point(theta, j - 1, w_hi, w_lo)
        a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
        r = (d * r - b) / (a - c * r)
        if j <= check_from and not (r > 0.0 and r < np.inf):
            viol = True
    if n == 1 and not (r > 0.0 and r < np.inf):
        viol = True
    return r, viol


@njit(**_JIT)
def _push_one(theta, n, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    if forward:
        return _push_forward(theta, n, seed, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)
    return _push_backward(theta, n, seed, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)


@njit(**_JIT)
def push_slopes(thetas, n, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    r = np.empty(thetas.size)
    viol = np.zeros(thetas.size, dtype=np.bool_)
    for i in range(thetas.size):
        r[i], viol[i] = _push_one(
            thetas[i], n, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo
        )
    return r, viol


@njit(**_JIT)
def converge_slopes(thetas, n0, cap, tol, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    """Doubling loop per point; flag 0 converged, 1 hit the cap, 2 left the cone."""
    m = thetas.size
    out_r = np.empty(m)
    out_res = np.empty(m)
    out_n = np.empty(m, dtype=np.int64)
    out_flag = np.empty(m, dtype=np.int64)
    out_ratio = np.zeros(m)
    for i in range(m):
        theta = thetas[i]
        n = n0
        r1, v1 = _push_one(theta, n, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)
        res_prev = np.inf
        while True:
            r2, v2 = _push_one(theta, 2 * n, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)
            if v1 or v2:
                res = np.inf
                flag = 2
                break
            res = abs(r1 - r2)
            if res <= tol * max(1.0, abs(r2)):
                flag = 0
                break
            if 4 * n > cap:
                flag = 1
                break
            res_prev = res
            n *= 2
            r1 = r2
            v1 = v2
        out_r[i] = r2
        out_res[i] = res
        out_n[i] = 2 * n
        out_flag[i] = flag
        if res_prev < np.inf and res_prev > 0.0:
            out_ratio[i] = res / res_prev
    return out_r, out_res, out_n, out_flag, out_ratio


@njit(**_JIT)
def scaled_product(thetas, n, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    """A(theta+(n-1)w)...A(theta) as (entries, log-scale); true product = entries * exp(log)."""
    p = thetas.size
    out = np.empty((p, 4))
    logs = np.zeros(p)
    for i in range(p):
        m11 = 1.0
        m12 = 0.0
        m21 = 0.0
        m22 = 1.0
        lg = 0.0
        for k in range(n):
            x = _orbit_point(thetas[i], k, w_hi, w_lo)
            a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
            n11 = a * m11 + b * m21
            n12 = a * m12 + b * m22
            n21 = c * m11 + d * m21
            n22 = c * m12 + d * m22
            s = max(max(abs(n11), abs(n12)), max(abs(n21), abs(n22)))
            if s > _BIG or (s < _SMALL and s > 0.0):
                _, e = math.frexp(s)
                sc = math.ldexp(1.0, -e)
                n11 *= sc
                n12 *= sc
                n21 *= sc
                n22 *= sc
                lg += e * _LN2
            m11 = n11
            m12 = n12
            m21 = n21
            m22 = n22
        out[i, 0] = m11
        out[i, 1] = m12
        out[i, 2] = m21
        out[i, 3] = m22
        logs[i] = lg
    return out, logs


@njit(**_JIT)
def log_stretch(theta0s, n, burn_in, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    """Average log-stretch of a renormalised vector over n steps after burn_in."""
    p = theta0s.size
    out = np.empty(p)
    for i in range(p):
        v1 = math.cos(1.0)
        v2 = math.sin(1.0)
        acc = 0.0
        for k in range(burn_in + n):
            x = _orbit_point(theta0s[i], k, w_hi, w_lo)
            a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
            u1 = a * v1 + b * v2
            u2 = c * v1 + d * v2
            nrm = math.hypot(u1, u2)
            v1 = u1 / nrm
            v2 = u2 / nrm
            if k >= burn_in:
                acc += math.log(nrm)
        out[i] = acc / n
    return out
