"""Pure-numpy fallback kernels, vectorised across torus points.

Same signatures and return conventions as ``_numba.py``.  The slope pushes loop
over time steps in Python, so they are slower; long matrix products use a
pairwise tree reduction over blocks of steps instead of a scalar loop.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi
_LN2 = math.log(2.0)
_BLOCK = 1 << 15


def _trig(x, coef):
    v = np.full_like(x, coef[0])
    m = (coef.size - 1) // 2
    for k in range(1, m + 1):
        ang = TWO_PI * k * x
        v = v + coef[2 * k - 1] * np.cos(ang) + coef[2 * k] * np.sin(ang)
    return v


def _potential(x, pkind, coupling, vcoef):
    if pkind == 0:
        return np.zeros_like(x)
    if pkind == 1:
        return coupling * np.cos(TWO_PI * x)
    if pkind == 2:
        s = np.sin(np.pi * x)
        return 1.0 / (1.0 + coupling * coupling * s * s)
    return _trig(x, vcoef)


def _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef):
    if code == 0:
        a = _potential(x, pkind, coupling, vcoef) - energy
        b = np.full_like(x, -1.0)
        c = np.ones_like(x)
        d = np.zeros_like(x)
    else:
        a, b, c, d = (_trig(x, mcoef[e]) for e in range(4))
    return a + t * b, b, c + t * d, d


def _orbit_points(thetas, k, w_hi, w_lo):
    y = k * w_hi
    x = (y - math.floor(y)) + k * w_lo + thetas
    return x - np.floor(x)


def _orbit_grid(theta0s, ks, w_hi, w_lo):
    ks = np.asarray(ks, dtype=np.float64)
    y = ks * w_hi
    x = (y - np.floor(y))[None, :] + (ks * w_lo)[None, :] + theta0s[:, None]
    return x - np.floor(x)


def entries(xs, code, pkind, coupling, energy, t, vcoef, mcoef):
    return np.stack(_entries(np.asarray(xs, dtype=np.float64), code, pkind, coupling, energy, t, vcoef, mcoef), axis=-1)


def push_slopes(thetas, n, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    thetas = np.asarray(thetas, dtype=np.float64)
    r = np.full(thetas.shape, float(seed))
    viol = np.zeros(thetas.shape, dtype=bool)
    check_from = n - n // 2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for j in range(n, 0, -1):
            if forward:
                x = _orbit_points(thetas, -j, w_hi, w_lo)
                a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
                p, q, s, u = a, b, c, d
            else:
                x = _orbit_points(thetas, j - 1, w_hi, w_lo)
                a, b, c, d = _entries(x, code, pkind, coupling, energy, t, vcoef, mcoef)
                p, q, s, u = d, -b, -c, a
            at_inf = np.isinf(r)
            rr = np.where(at_inf, 0.0, r)
            num = np.where(at_inf, p, p * rr + q)
            den = np.where(at_inf, s, s * rr + u)
            r = np.where(den == 0.0, np.inf, num / np.where(den == 0.0, 1.0, den))
            if j <= check_from:
                viol |= ~((r > 0.0) & (r < np.inf))
    return r, viol


def converge_slopes(thetas, n0, cap, tol, seed, forward, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    thetas = np.asarray(thetas, dtype=np.float64)
    m = thetas.size
    out_r = np.empty(m)
    out_res = np.empty(m)
    out_n = np.empty(m, dtype=np.int64)
    out_flag = np.empty(m, dtype=np.int64)
    out_ratio = np.zeros(m)
    res_prev = np.full(m, np.inf)

    args = (code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)
    active = np.arange(m)
    n = n0
    r1, v1 = push_slopes(thetas, n, seed, forward, *args)
    while active.size:
        r2, v2 = push_slopes(thetas[active], 2 * n, seed, forward, *args)
        bad = v1 | v2
        res = np.where(bad, np.inf, np.abs(r1 - r2))
        ok = ~bad & (res <= tol * np.maximum(1.0, np.abs(r2)))
        last = 4 * n > cap
        done = bad | ok | last
        idx = active[done]
        out_r[idx] = r2[done]
        out_res[idx] = res[done]
        out_n[idx] = 2 * n
        out_flag[idx] = np.where(bad[done], 2, np.where(ok[done], 0, 1))
        rp = res_prev[idx]
        good = np.isfinite(rp) & (rp > 0.0)
        out_ratio[idx] = np.where(good, res[done] / np.where(good, rp, 1.0), 0.0)
        keep = ~done
        res_prev[active[keep]] = res[keep]
        active = active[keep]
        r1, v1 = r2[keep], v2[keep]
        n *= 2
    return out_r, out_res, out_n, out_flag, out_ratio


def _normalise(mats, logs):
    s = np.max(np.abs(mats), axis=-1)
    _, e = np.frexp(np.where(s > 0.0, s, 1.0))
    mats = mats * np.ldexp(1.0, -e)[..., None]
    return mats, logs + e * _LN2


def _compose(later, earlier):
    a, b, c, d = (later[..., i] for i in range(4))
    p, q, r, s = (earlier[..., i] for i in range(4))
    return np.stack((a * p + b * r, a * q + b * s, c * p + d * r, c * q + d * s), axis=-1)


def _tree_product(mats, logs):
    """Reduce (P, m, 4) time-ordered matrices to their ordered product (P, 4)."""
    while mats.shape[1] > 1:
        if mats.shape[1] % 2:
            eye = np.zeros((mats.shape[0], 1, 4))
            eye[..., 0] = eye[..., 3] = 1.0
            mats = np.concatenate((mats, eye), axis=1)
            logs = np.concatenate((logs, np.zeros((logs.shape[0], 1))), axis=1)
        prod = _compose(mats[:, 1::2], mats[:, 0::2])
        mats, logs = _normalise(prod, logs[:, 0::2] + logs[:, 1::2])
    return mats[:, 0], logs[:, 0]


def _ranged_product(theta0s, start, stop, args):
    code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo = args
    p = theta0s.size
    total = np.zeros((p, 4))
    total[:, 0] = total[:, 3] = 1.0
    total_log = np.zeros(p)
    for lo in range(start, stop, _BLOCK):
        hi = min(stop, lo + _BLOCK)
        x = _orbit_grid(theta0s, np.arange(lo, hi), w_hi, w_lo)
        mats = np.stack(_entries(x, code, pkind, coupling, energy, t, vcoef, mcoef), axis=-1)
        mats, logs = _normalise(mats, np.zeros(x.shape))
        block, block_log = _tree_product(mats, logs)
        total, total_log = _normalise(_compose(block, total), total_log + block_log)
    return total, total_log


def scaled_product(thetas, n, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    thetas = np.asarray(thetas, dtype=np.float64)
    args = (code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)
    return _ranged_product(thetas, 0, n, args)


def log_stretch(theta0s, n, burn_in, code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo):
    theta0s = np.asarray(theta0s, dtype=np.float64)
    args = (code, pkind, coupling, energy, t, vcoef, mcoef, w_hi, w_lo)
    v = np.empty((theta0s.size, 2))
    v[:, 0] = math.cos(1.0)
    v[:, 1] = math.sin(1.0)
    if burn_in:
        m, _ = _ranged_product(theta0s, 0, burn_in, args)
        v = np.stack((m[:, 0] * v[:, 0] + m[:, 1] * v[:, 1], m[:, 2] * v[:, 0] + m[:, 3] * v[:, 1]), axis=-1)
        v /= np.hypot(v[:, 0], v[:, 1])[:, None]
    m, lg = _ranged_product(theta0s, burn_in, burn_in + n, args)
    u1 = m[:, 0] * v[:, 0] + m[:, 1] * v[:, 1]
    u2 = m[:, 2] * v[:, 0] + m[:, 3] * v[:, 1]
    return (np.log(np.hypot(u1, u2)) + lg) / n
