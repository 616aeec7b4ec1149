"""Invariant slope fields by projective power iteration.

A line through the origin is stored by its slope r, meaning the direction
(r, 1); ``math.inf`` stands for the horizontal direction (1, 0).  The
unstable slope at theta is the forward push of a seed from theta - n*omega,
the stable slope the backward pull of a seed from theta + n*omega.  Seeds
default to +inf (unstable) and 0 (stable): for cocycles with an invariant
positive cone these sit on the outer side of the true slopes, so the orbits
stay in (0, inf) and converge monotonically.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .core import Mat2, ParameterFamily, torus
from .errors import ConeViolation, MultipleMinimaWarning, NonConvergence

DEFAULT_TOL = 1e-10
DEFAULT_CAP = 200_000
DEFAULT_GRID = 4096
N_START = 32
INVARIANCE_SAMPLES = 256
REFINE_MAX_POINTS = 2048
GOLDEN_PROBES = 60
GOLDEN_WIDTH = 1e-12

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def mobius_apply(m: Mat2, r: float) -> float:
    """Image of the slope r under m: (a11 r + a12) / (a21 r + a22)."""
    if math.isinf(r):
        num, den = m.a11, m.a21
    else:
        num, den = m.a11 * r + m.a12, m.a21 * r + m.a22
    if den == 0.0:
        return math.inf
    out = num / den
    return math.inf if math.isinf(out) else out


class DirectionResult(NamedTuple):
    slope: float
    residual: float


def _direction(family, theta, n, r_seed, tol, cap, forward):
    cargs = family.kernel_args()
    th = np.array([torus(theta)])
    if n is None:
        r, res, _, flag, _ = kernels.converge_slopes(th, N_START, cap, tol, r_seed, forward, cargs, family.omega)
        if flag[0] == 2:
            raise ConeViolation("slope iteration left (0, inf)", residual=math.inf, theta=theta)
        if flag[0] == 1:
            raise NonConvergence(f"Cauchy residual {res[0]:.3e} above tol at cap {cap}", residual=res[0], theta=theta)
        return DirectionResult(float(r[0]), float(res[0]))
    if n < 1:
        raise ValueError("n must be >= 1")
    r1, v1 = kernels.push_slopes(th, n, r_seed, forward, cargs, family.omega)
    r2, v2 = kernels.push_slopes(th, 2 * n, r_seed, forward, cargs, family.omega)
    if v1[0] or v2[0]:
        raise ConeViolation("slope iteration left (0, inf)", residual=math.inf, theta=theta)
    res = abs(float(r1[0]) - float(r2[0]))
    if res > tol * max(1.0, abs(float(r2[0]))):
        raise NonConvergence(f"Cauchy residual {res:.3e} above tol {tol:.1e} at n={n}", residual=res, theta=theta)
    return DirectionResult(float(r1[0]), res)


def unstable_direction(family, theta, n=None, r_seed=math.inf, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """Push ``r_seed`` from theta - n*omega forward to theta.

    With ``n=None`` the orbit length doubles from 32 until the Cauchy residual
    |r(n) - r(2n)| drops below ``tol`` (relative to max(1, |r|)) or ``cap`` is hit,
    and the converged value is returned.  With an explicit ``n`` the value
    r(n) is returned with its residual against r(2n).
    """
    return _direction(family, theta, n, r_seed, tol, cap, True)


def stable_direction(family, theta, n=None, r_seed=0.0, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """Pull ``r_seed`` from theta + n*omega back to theta with the inverse cocycle."""
    return _direction(family, theta, n, r_seed, tol, cap, False)


@dataclass(frozen=True)
class SlopeSolve:
    r: np.ndarray
    cauchy: np.ndarray
    n_used: np.ndarray
    flag: np.ndarray
    ratio: np.ndarray


def solve_slopes(family, thetas, forward, *, seed=None, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """Converge slopes at every theta; flags are not raised here."""
    if seed is None:
        seed = math.inf if forward else 0.0
    out = kernels.converge_slopes(torus(np.asarray(thetas, dtype=np.float64)), N_START, cap, tol, seed, forward,
                                  family.kernel_args(), family.omega)
    return SlopeSolve(*out)


def _raise_on_flags(sol, thetas, label, cap):
    bad = np.flatnonzero(sol.flag == 2)
    if bad.size:
        i = bad[0]
        raise ConeViolation(f"{label} slope left (0, inf) at theta={thetas[i]:.6f} "
                            f"({bad.size} of {thetas.size} points)", residual=math.inf, theta=float(thetas[i]))
    slow = np.flatnonzero(sol.flag == 1)
    if slow.size:
        i = slow[np.argmax(sol.cauchy[slow])]
        raise NonConvergence(f"{label} slope not converged at theta={thetas[i]:.6f}: residual "
                             f"{sol.cauchy[i]:.3e} at cap {cap} ({slow.size} of {thetas.size} points)",
                             residual=float(sol.cauchy[i]), theta=float(thetas[i]))


def slopes_at(family, thetas, *, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """Converged (r_u, r_s) at arbitrary points; raises on failure."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    su = solve_slopes(family, thetas, True, tol=tol, cap=cap)
    _raise_on_flags(su, thetas, "unstable", cap)
    ss = solve_slopes(family, thetas, False, tol=tol, cap=cap)
    _raise_on_flags(ss, thetas, "stable", cap)
    return su.r, ss.r


@dataclass(frozen=True)
class BundlePair:
    """Unstable/stable slopes on a sorted mesh of [0, 1).

    The mesh is a uniform grid of ``n_uniform`` points, plus local points
    around the minimum of r_u - r_s when refinement is on.
    ``residual_u``/``residual_s`` are invariance residuals measured against
    direct iteration at theta + omega on a subsample; ``cauchy_*`` are the
    convergence residuals.
    """

    family: ParameterFamily
    thetas: np.ndarray
    n_uniform: int
    r_u: np.ndarray
    r_s: np.ndarray
    residual_u: float
    residual_s: float
    cauchy_u: float
    cauchy_s: float
    iterations_used: int
    cone_constant: float
    decay_rate: float
    tol: float = DEFAULT_TOL
    cap: int = DEFAULT_CAP
    refinement_width: float = 0.0

    @property
    def d(self):
        return self.r_u - self.r_s

    @property
    def uniform_mask(self):
        return np.isclose(self.thetas * self.n_uniform, np.round(self.thetas * self.n_uniform), rtol=0, atol=1e-9)

    def to_csv(self, path):
        write_bundle_csv(path, self.thetas, self.r_u, self.r_s)


def write_bundle_csv(path, thetas, r_u, r_s):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "r_u", "r_s", "d"])
        for th, u, s in zip(thetas, r_u, r_s):
            w.writerow([f"{th:.17g}", f"{u:.17g}", f"{s:.17g}", f"{u - s:.17g}"])


def read_bundle_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {"theta": data[:, 0], "r_u": data[:, 1], "r_s": data[:, 2], "d": data[:, 3]}


def _invariance_residuals(family, thetas, r_u, r_s, tol, cap):
    """sup |A(theta) r_u(theta) - r_u(theta+omega)| and the stable analogue, on a subsample."""
    step = max(1, thetas.size // INVARIANCE_SAMPLES)
    th = thetas[::step]
    ru, rs = r_u[::step], r_s[::step]
    shifted = torus(th + family.omega)
    ru_next, rs_next = slopes_at(family, shifted, tol=tol, cap=cap)
    e = family.entries(th)
    a, b, c, d = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
    push_u = (a * ru + b) / (c * ru + d)
    # inverse action: r_s(theta) = (d r - b) / (-c r + a) with r = r_s(theta + omega)
    pull_s = (d * rs_next - b) / (-c * rs_next + a)
    return float(np.max(np.abs(push_u - ru_next))), float(np.max(np.abs(pull_s - rs)))


def _refinement_points(theta_c, d_min, n_uniform, max_points=REFINE_MAX_POINTS):
    root = math.sqrt(max(d_min, 0.0))
    half = min(1.0 / 16.0, 4.0 * root)
    spacing = min(1e-6, root / 50.0)
    spacing = max(spacing, 2.0 * half / max_points)
    if spacing >= 1.0 / n_uniform:
        return np.empty(0), 0.0
    k = int(half / spacing)
    pts = torus(theta_c + spacing * np.arange(-k, k + 1))
    # keep clear of the uniform nodes so the mesh stays strictly increasing
    frac = pts * n_uniform - np.round(pts * n_uniform)
    return pts[np.abs(frac) > 1e-6], half


def compute_bundles(family, N=DEFAULT_GRID, *, tol=DEFAULT_TOL, cap=DEFAULT_CAP, refine=True, retries=0,
                    thetas=None, check_invariance=True, refine_points=REFINE_MAX_POINTS):
    """Fill a grid with converged unstable/stable slopes.

    ``thetas`` overrides the mesh entirely (used to recompute bundles on an
    existing mesh).  ``retries`` re-runs points that hit the cap (not those
    that left the cone) with a 4x larger cap.  ``refine_points`` bounds the
    number of local points added around the grid argmin of d.
    """
    if thetas is None:
        if N < 2:
            raise ValueError("grid size must be >= 2")
        mesh = np.arange(N, dtype=np.float64) / N
    else:
        mesh = np.sort(torus(np.asarray(thetas, dtype=np.float64)))

    def solve(points, forward):
        c = cap
        sol = solve_slopes(family, points, forward, tol=tol, cap=c)
        for _ in range(retries):
            slow = np.flatnonzero(sol.flag == 1)
            if not slow.size:
                break
            c *= 4
            again = solve_slopes(family, points[slow], forward, tol=tol, cap=c)
            for name in ("r", "cauchy", "n_used", "flag", "ratio"):
                getattr(sol, name)[slow] = getattr(again, name)
        _raise_on_flags(sol, points, "unstable" if forward else "stable", c)
        return sol

    su = solve(mesh, True)
    ss = solve(mesh, False)
    r_u, r_s = su.r, ss.r
    n_used = [su.n_used, ss.n_used]
    ratios = [su.ratio, ss.ratio]
    cauchy_u, cauchy_s = float(np.max(su.cauchy)), float(np.max(ss.cauchy))

    width = 0.0
    d = r_u - r_s
    # a flat field has no dip to resolve
    if refine and thetas is None and np.ptp(d) > 1e-8 * np.min(np.abs(d)):
        i = int(np.argmin(d))
        extra, width = _refinement_points(mesh[i], float(d[i]), N, refine_points)
        if extra.size:
            eu, es = solve(extra, True), solve(extra, False)
            mesh = np.concatenate((mesh, extra))
            order = np.argsort(mesh, kind="stable")
            mesh = mesh[order]
            r_u = np.concatenate((r_u, eu.r))[order]
            r_s = np.concatenate((r_s, es.r))[order]
            n_used += [eu.n_used, es.n_used]
            ratios += [eu.ratio, es.ratio]
            cauchy_u = max(cauchy_u, float(np.max(eu.cauchy)))
            cauchy_s = max(cauchy_s, float(np.max(es.cauchy)))

    if np.any(r_u <= r_s):
        i = int(np.argmax(r_u <= r_s))
        raise ConeViolation(f"ordering r_u > r_s fails at theta={mesh[i]:.6f}", theta=float(mesh[i]))
    cone = float(max(r_u.max(), r_s.max(), 1.0 / r_u.min(), 1.0 / r_s.min()))

    if check_invariance:
        res_u, res_s = _invariance_residuals(family, mesh, r_u, r_s, tol, cap * 4**retries)
    else:
        res_u = res_s = float("nan")

    return BundlePair(
        family=family,
        thetas=mesh,
        n_uniform=N if thetas is None else mesh.size,
        r_u=r_u,
        r_s=r_s,
        residual_u=res_u,
        residual_s=res_s,
        cauchy_u=cauchy_u,
        cauchy_s=cauchy_s,
        iterations_used=int(max(int(a.max()) for a in n_used)),
        cone_constant=cone,
        decay_rate=float(max(float(a.max()) for a in ratios)),
        tol=tol,
        cap=cap,
        refinement_width=width,
    )


@dataclass(frozen=True)
class DifferenceField:
    """d = r_u - r_s on a mesh, with its refined minimiser and a pointwise evaluator."""

    thetas: np.ndarray
    d: np.ndarray
    theta_c: float
    d_min: float
    omega: float
    refinement_width: float = 0.0
    multiple_minima: bool = False
    evaluator: Callable | None = field(default=None, compare=False, repr=False)

    def evaluate(self, thetas):
        if self.evaluator is None:
            raise ValueError("this DifferenceField has no pointwise evaluator")
        return self.evaluator(torus(np.atleast_1d(np.asarray(thetas, dtype=np.float64))))


def difference_evaluator(family, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    def evaluate(thetas):
        r_u, r_s = slopes_at(family, thetas, tol=tol, cap=cap)
        return r_u - r_s

    return evaluate


def golden_section_min(f, lo, hi, max_probes=GOLDEN_PROBES, width=GOLDEN_WIDTH):
    """Minimise a unimodal f on [lo, hi]; returns (x_best, f_best, probes)."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    e = a + _INVPHI * (b - a)
    fc, fe = f(c), f(e)
    probes = 2
    best = (c, fc) if fc <= fe else (e, fe)
    while (b - a) > width and probes < max_probes:
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _INVPHI * (b - a)
            fe = f(e)
        probes += 1
        for x, v in ((c, fc), (e, fe)):
            if v < best[1]:
                best = (x, v)
    return best[0], best[1], probes


def _separated_minima(thetas, d, i_min, d_min, spacing):
    left, right = np.roll(d, 1), np.roll(d, -1)
    local = np.flatnonzero((d <= left) & (d <= right) & (d <= 1.05 * d_min))
    dist = np.abs(thetas[local] - thetas[i_min])
    dist = np.minimum(dist, 1.0 - dist)
    return local[dist > 3.0 * spacing]


def difference_field(bundles: BundlePair, *, warn=True):
    """Locate theta_c by grid argmin plus golden-section refinement on the pointwise d."""
    family = bundles.family
    thetas, d = bundles.thetas, bundles.d
    evaluator = difference_evaluator(family, bundles.tol, bundles.cap * 16)
    i = int(np.argmin(d))
    grid_min = float(d[i])
    m = thetas.size
    lo = thetas[(i - 1) % m] - (1.0 if i == 0 else 0.0)
    hi = thetas[(i + 1) % m] + (1.0 if i == m - 1 else 0.0)

    def f(x):
        return float(evaluator(np.array([torus(x)]))[0])

    x_best, f_best, _ = golden_section_min(f, lo, hi)
    if f_best < grid_min:
        theta_c, d_min = torus(x_best), f_best
    else:
        theta_c, d_min = float(thetas[i]), grid_min

    uni = bundles.uniform_mask
    ut, ud = thetas[uni], d[uni]
    j = int(np.argmin(ud))
    others = _separated_minima(ut, ud, j, float(ud[j]), 1.0 / max(bundles.n_uniform, 1))
    multiple = bool(others.size)
    if multiple and warn:
        warnings.warn(
            f"{others.size} separated local minima of d within 5% of d_min={d_min:.3e}; "
            "uniqueness of the minimiser is suspect",
            MultipleMinimaWarning,
            stacklevel=2,
        )
    return DifferenceField(
        thetas=thetas,
        d=d,
        theta_c=float(theta_c),
        d_min=float(d_min),
        omega=family.omega,
        refinement_width=bundles.refinement_width,
        multiple_minima=multiple,
        evaluator=evaluator,
    )


def growth_ratio(field: DifferenceField, theta, i, j):
    """D_{i,j}(theta) = d(theta + j omega) / d(theta + i omega), for i <= j."""
    if i > j:
        raise ValueError("growth_ratio needs i <= j")
    theta = np.asarray(theta, dtype=np.float64)
    if i == j:
        return np.ones_like(theta) if theta.ndim else 1.0
    pts = np.atleast_1d(theta)
    num = field.evaluate(pts + j * field.omega)
    den = field.evaluate(pts + i * field.omega)
    out = num / den
    return out if theta.ndim else float(out[0])


def step_ratio(family, theta, *, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """D_{0,1}(theta) from the stretches alone: 1 / (lambda_u lambda_s) for det = 1.

    Uses d(theta+omega) = det(A) d(theta) / ((c r_u + d)(c r_s + d)), an
    algebraic route independent of evaluating d at theta + omega.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    r_u, r_s = slopes_at(family, th, tol=tol, cap=cap)
    e = family.entries(th)
    det = e[:, 0] * e[:, 3] - e[:, 1] * e[:, 2]
    out = det / ((e[:, 2] * r_u + e[:, 3]) * (e[:, 2] * r_s + e[:, 3]))
    return out if np.ndim(theta) else float(out[0])
