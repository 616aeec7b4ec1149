"""Lyapunov exponent by norm growth and by the unstable stretch, and its t-derivative.

The derivative comes from an integral over the torus of the invariant
slopes.  Conjugating A_t by B(theta) = [[r_u, r_s], [1, 1]] / sqrt(d), whose
columns are the unstable and stable directions, diagonalises the cocycle;
for a constant generator w = [[w1, w2], [w3, -w1]] one gets

    dL/dt = integral of  w1 q1 + w2 q2 + w3 q3,
    q1 = alpha delta + beta gamma,  q2 = gamma delta,  q3 = -alpha beta,

with (alpha, beta, gamma, delta) = (r_u, r_s, 1, 1) / sqrt(d).  For the lower
shear this is  -integral of r_u r_s / d.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .bundles import DEFAULT_GRID, DEFAULT_TOL, compute_bundles, difference_field, slopes_at
from .core import torus
from .errors import DomainError, WindowViolation
from .quadrature import adaptive_simpson, periodic_trapezoid

NORM_STEPS = 1_000_000
BURN_IN = 1_000
PHASES = 8
QUAD_RTOL = 1e-10
BASE_CELLS = 256
# cells whose integrand is within this factor of the peak get the variation test
PEAK_FACTOR = 100.0
MAX_VARIATION = 0.01
CELL_FLOOR = 1e-9
STANDARD_SHEAR = (0.0, 0.0, 1.0)
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    method: str
    error_estimate: float
    t: float
    n_steps: int = 0
    grid_size: int = 0


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    method: str
    error_estimate: float
    t: float
    quadrature_cells: int = 0
    step: float = 0.0


def estimate_record(le: LyapunovEstimate, dl: DerivativeEstimate | None = None):
    """Flat JSON-ready record {t, L, L_method, dLdt, dLdt_method, err_L, err_dLdt}."""
    return {
        "t": le.t,
        "L": le.value,
        "L_method": le.method,
        "dLdt": None if dl is None else dl.value,
        "dLdt_method": None if dl is None else dl.method,
        "err_L": le.error_estimate,
        "err_dLdt": None if dl is None else dl.error_estimate,
    }


def estimate_json(le, dl=None):
    return json.dumps(estimate_record(le, dl), sort_keys=True)


def le_norm_growth(family, n=NORM_STEPS, burn_in=BURN_IN, theta0=0.0, phases=PHASES):
    """Birkhoff average of log-stretches of a renormalised vector.

    Runs ``phases`` orbits started at theta0 + k/phases and reports their
    mean; the error is the standard error across phases plus a worst-case
    summation floor n * eps * max(1, L).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    starts = torus(theta0 + np.arange(phases) / phases)
    vals = kernels.log_stretch(starts, int(n), int(burn_in), family.kernel_args(), family.omega)
    value = float(np.mean(vals))
    spread = float(np.std(vals, ddof=1) / math.sqrt(phases)) if phases > 1 else 0.0
    err = spread + n * _EPS * max(1.0, abs(value))
    return LyapunovEstimate(value, "norm_growth", err, family.t, n_steps=int(n))


def unstable_stretch(family, thetas, r_u):
    """lambda_1(theta) = a21 r_u + a22, the factor in A (r_u, 1) = lambda_1 (r_u(theta+omega), 1)."""
    e = family.entries(thetas)
    lam = e[:, 2] * r_u + e[:, 3]
    if np.any(lam == 0.0):
        i = int(np.argmax(lam == 0.0))
        raise DomainError(f"unstable stretch vanishes at theta={thetas[i]:.6f}")
    return lam, e


def le_from_bundle(family, bundles):
    """Trapezoid integral of log|lambda_1| over the (possibly refined) bundle mesh.

    The error estimate is the change against the every-other-point mesh plus
    the slope residual pushed through d log|lambda_1| / d r_u.
    """
    th, r_u = bundles.thetas, bundles.r_u
    lam, e = unstable_stretch(family, th, r_u)
    y = np.log(np.abs(lam))
    value = periodic_trapezoid(th, y)
    coarse = periodic_trapezoid(th[::2], y[::2]) if th.size >= 4 else value
    slope_err = bundles.cauchy_u * float(np.max(np.abs(e[:, 2] / lam)))
    err = abs(value - coarse) + slope_err + 4 * _EPS * max(1.0, abs(value))
    return LyapunovEstimate(value, "bundle_integral", err, family.t, grid_size=int(th.size))


def _conjugation(r_u, r_s):
    root = np.sqrt(r_u - r_s)
    return r_u / root, r_s / root, 1.0 / root, 1.0 / root


def derivative_density(r_u, r_s, w=STANDARD_SHEAR):
    """Pointwise w1 q1 + w2 q2 + w3 q3 from the conjugating frame."""
    w1, w2, w3 = w
    alpha, beta, gamma, delta = _conjugation(r_u, r_s)
    if (w1, w2) == (0.0, 0.0):
        return w3 * (-alpha * beta)
    q1 = alpha * delta + beta * gamma
    q2 = gamma * delta
    q3 = -alpha * beta
    return w1 * q1 + w2 * q2 + w3 * q3


def _breakpoints(theta_c, d_min, base_cells):
    lo = theta_c - 0.5
    pts = [lo + np.arange(base_cells + 1) / base_cells]
    root = math.sqrt(max(d_min, 0.0))
    if root > 0.0:
        k = np.arange(-2, 64)
        steps = root * 2.0 ** k
        steps = steps[steps < 0.5]
        pts += [theta_c - steps, theta_c + steps, [theta_c]]
    out = np.unique(np.concatenate(pts))
    return out[(out >= lo) & (out <= lo + 1.0)]


def derivative_lemma31(family, bundles, field=None, w=STANDARD_SHEAR, *, rtol=QUAD_RTOL, base_cells=BASE_CELLS,
                       min_width=CELL_FLOOR, max_levels=50):
    """dL/dt from the conjugation integral by adaptive Simpson over one period.

    The period is centred at theta_c so the peak of 1/d sits inside.  Cells
    where the integrand is within ``PEAK_FACTOR`` of its value at theta_c are
    split until it varies by less than 1% across them.  Slopes at quadrature
    nodes are recomputed directly, not interpolated.
    """
    if field is None:
        field = difference_field(bundles, warn=False)
    tol, cap = bundles.tol, bundles.cap * 16

    def integrand(x):
        r_u, r_s = slopes_at(family, torus(x), tol=tol, cap=cap)
        return derivative_density(r_u, r_s, w)

    peak = abs(float(integrand(np.array([field.theta_c]))[0]))

    def force_split(a, b, fa, fm, fb):
        hi = np.maximum(np.maximum(np.abs(fa), np.abs(fb)), np.abs(fm))
        lo = np.minimum(np.minimum(np.abs(fa), np.abs(fb)), np.abs(fm))
        near = hi * PEAK_FACTOR >= peak
        return near & (hi - lo > MAX_VARIATION * hi)

    bp = _breakpoints(field.theta_c, field.d_min, base_cells)
    res = adaptive_simpson(integrand, bp, rtol=rtol, min_width=min_width, max_levels=max_levels,
                           force_split=force_split)
    # slope residual at the peak: relative error about 2 * cauchy * C / d_min there
    cauchy = max(bundles.cauchy_u, bundles.cauchy_s)
    prop = abs(res.value) * 2.0 * cauchy * bundles.cone_constant / max(field.d_min, 1e-300)
    err = res.error + prop + 16 * _EPS * max(1.0, abs(res.value))
    return DerivativeEstimate(res.value, "lemma31", err, family.t, quadrature_cells=res.cells)


def default_step(t, t0=None):
    """max(1e-6, gap/100) with gap = t0 - t, capped at gap/4; 1e-5 when no edge is known."""
    if t0 is None:
        return 1e-5
    gap = t0 - t
    if gap <= 0:
        raise WindowViolation(f"t={t!r} is not below the edge estimate {t0!r}")
    return min(max(1e-6, gap / 100.0), gap / 4.0)


def derivative_fd(family, h=None, *, t0=None, N=DEFAULT_GRID, tol=DEFAULT_TOL, mesh=None, cap=None, retries=1):
    """Central difference (L(t+h) - L(t-h)) / 2h with L from le_from_bundle.

    Both sides share one mesh: ``mesh`` if given, else the refined mesh of
    the bundles at t + h (the side closer to the edge).  The edge estimate
    is ``t0`` or the upper end of ``family.validity_window``.
    """
    if t0 is None and family.validity_window is not None:
        t0 = family.validity_window[1]
    t = family.t
    if h is None:
        h = default_step(t, t0)
    if h <= 0:
        raise ValueError("h must be positive")
    if t0 is not None and t + h >= t0:
        raise WindowViolation(f"t + h = {t + h!r} reaches the edge estimate {t0!r}")
    kw = {"tol": tol, "retries": retries}
    if cap is not None:
        kw["cap"] = cap
    if mesh is None:
        plus = compute_bundles(family.at(t + h), N, check_invariance=False, **kw)
        mesh = plus.thetas
    else:
        plus = compute_bundles(family.at(t + h), thetas=mesh, check_invariance=False, **kw)
    minus = compute_bundles(family.at(t - h), thetas=mesh, check_invariance=False, **kw)
    lp = le_from_bundle(plus.family, plus)
    lm = le_from_bundle(minus.family, minus)
    value = (lp.value - lm.value) / (2.0 * h)
    err = (lp.error_estimate + lm.error_estimate) / (2.0 * h)
    if t0 is not None:
        # h^2 L''' / 6 for a square-root profile is |D| h^2 / (8 gap^2); doubled for higher orders
        err += abs(value) * h * h / (4.0 * (t0 - t) ** 2)
    return DerivativeEstimate(value, "finite_difference", err, t, step=h)


def estimate_dict(est):
    return asdict(est)
