"""Parameter sweeps toward the edge, power-law fits, and the assumption verifier."""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundles import DEFAULT_GRID, DEFAULT_TOL, DifferenceField, compute_bundles, difference_field
from .core import torus
from .errors import DegenerateFit, MultipleMinimaWarning, QPCocycleError
from .lyapunov import QUAD_RTOL, default_step, derivative_fd, derivative_lemma31, le_from_bundle

SWEEP_COLUMNS = ("t", "gap", "d_min", "theta_c", "L", "dLdt_lemma", "dLdt_fd", "err_L", "err_dLdt", "status")
DEFAULT_G0 = 1e-2
DEFAULT_RATIO = 2.0
DEFAULT_COUNT = 14


def default_gaps(g0=DEFAULT_G0, ratio=DEFAULT_RATIO, count=DEFAULT_COUNT):
    """g0 * ratio**-k for k = 0..count-1 (descending)."""
    return [g0 * ratio ** (-k) for k in range(count)]


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    t: float
    gap: float
    d_min: float = math.nan
    theta_c: float = math.nan
    L: float = math.nan
    dLdt_lemma: float = math.nan
    dLdt_fd: float = math.nan
    err_L: float = math.nan
    err_dLdt: float = math.nan
    status: str = "ok"
    err_dLdt_fd: float = math.nan
    fd_step: float = math.nan
    multiple_minima: bool = False

    @property
    def ok(self):
        return self.status == "ok"

    def row(self):
        return [getattr(self, c) for c in SWEEP_COLUMNS]


def sweep_point(family, t0, gap, *, N=DEFAULT_GRID, tol=DEFAULT_TOL, quad_rtol=QUAD_RTOL, fd=True, retries=1):
    """All sweep quantities at t = t0 - gap; numerical failures go into ``status``."""
    t = t0 - gap
    fam = family.at(t)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MultipleMinimaWarning)
            b = compute_bundles(fam, N, tol=tol, retries=retries, check_invariance=False)
            fld = difference_field(b, warn=True)
        le = le_from_bundle(fam, b)
        dl = derivative_lemma31(fam, b, fld, rtol=quad_rtol)
        if fd:
            h = default_step(t, t0)
            dfd = derivative_fd(fam, h, t0=t0, tol=tol, mesh=b.thetas, retries=retries)
            fd_val, fd_err = dfd.value, dfd.error_estimate
        else:
            h, fd_val, fd_err = math.nan, math.nan, math.nan
    except QPCocycleError as exc:
        return SweepRecord(t, gap, status=f"error: {type(exc).__name__}: {exc}")
    return SweepRecord(t, gap, fld.d_min, fld.theta_c, le.value, dl.value, fd_val, le.error_estimate,
                       dl.error_estimate, "ok", fd_err, h, fld.multiple_minima)


def _sweep_task(args):
    family, t0, gap, kw = args
    return sweep_point(family, t0, gap, **kw)


def run_sweep(family, t0, gaps=None, *, N=DEFAULT_GRID, tol=DEFAULT_TOL, quad_rtol=QUAD_RTOL, fd=True, jobs=1,
              progress=None):
    """One record per gap (descending), evaluated at t0 - gap.

    ``family`` is a ParameterFamily; its t is ignored.  With ``jobs > 1``
    the points run in a process pool; results keep the order of ``gaps``.
    """
    gaps = default_gaps() if gaps is None else [float(g) for g in gaps]
    if any(g <= 0 for g in gaps):
        raise ValueError("gaps must be positive")
    if any(a <= b for a, b in zip(gaps, gaps[1:])):
        raise ValueError("gaps must be strictly decreasing")
    kw = dict(N=N, tol=tol, quad_rtol=quad_rtol, fd=fd)
    tasks = [(family, float(t0), g, kw) for g in gaps]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_sweep_task, tasks))
    else:
        records = []
        for task in tasks:
            records.append(_sweep_task(task))
            if progress is not None:
                progress(records[-1])
    return records


def write_sweep_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in records:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r.row()])


def read_sweep_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vals = {k: (row[k] if k == "status" else float(row[k])) for k in SWEEP_COLUMNS}
            out.append(SweepRecord(**vals))
    return out


def records_to_json(records):
    return [{k: (v if not (isinstance(v, float) and not math.isfinite(v)) else None) for k, v in asdict(r).items()}
            for r in records]


def records_from_json(items):
    return [SweepRecord(**{k: (math.nan if v is None else v) for k, v in it.items()}) for it in items]


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float
    range: tuple
    n_points: int
    exponent_stderr: float = math.nan


def fit_power_law(xs, ys):
    """Least-squares line through (log x, log y): y ~ prefactor * x**exponent."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("xs and ys must have the same length")
    if x.size < 5:
        raise DegenerateFit(f"need at least 5 points, got {x.size}")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFit("power-law fit needs finite positive data")
    lx, ly = np.log(x), np.log(y)
    if np.log10(x.max() / x.min()) < 1.0:
        raise DegenerateFit(f"xs span {x.max() / x.min():.3g}x, less than one decade")
    (slope, intercept), cov = np.polyfit(lx, ly, 1, cov=True)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    stderr = float(math.sqrt(max(cov[0, 0], 0.0))) if np.isfinite(cov[0, 0]) else math.nan
    return PowerLawFit(float(slope), float(math.exp(intercept)), float(min(max(r2, 0.0), 1.0)),
                       (float(x.min()), float(x.max())), int(x.size), stderr)


def _valid(records):
    return [r for r in records if r.ok]


def extrapolate_edge_L(records, n_smallest=6):
    """L at the edge from a least-squares fit L = L0 + b sqrt(g) + c g on the smallest gaps."""
    good = sorted(_valid(records), key=lambda r: r.gap)[:n_smallest]
    if len(good) < 3:
        raise DegenerateFit("need at least 3 valid records to extrapolate L at the edge")
    g = np.array([r.gap for r in good])
    L = np.array([r.L for r in good])
    A = np.stack((np.ones_like(g), np.sqrt(g), g), axis=1)
    coef, *_ = np.linalg.lstsq(A, L, rcond=None)
    return float(coef[0])


def holder_check(records, L_at_edge=None):
    """Power-law fit of |L(t) - L_at_edge| against the gap (extrapolated edge value if None)."""
    good = _valid(records)
    if L_at_edge is None:
        L_at_edge = extrapolate_edge_L(good)
    return fit_power_law([r.gap for r in good], [abs(r.L - L_at_edge) for r in good])


def distance_fit(records):
    good = _valid(records)
    return fit_power_law([r.gap for r in good], [r.d_min for r in good])


def theorem_bound_check(records):
    """(K1, K2, K2/K1) for c_k = |dL/dt| sqrt(gap) over valid records."""
    good = _valid(records)
    if len(good) < 5:
        raise DegenerateFit(f"need at least 5 valid records, got {len(good)}")
    c = np.array([abs(r.dLdt_lemma) * math.sqrt(r.gap) for r in good])
    k1, k2 = float(c.min()), float(c.max())
    return k1, k2, (k2 / k1 if k1 > 0 else math.inf)


def integration_consistency(records):
    """Relative mismatch of L(t_k+1) - L(t_k) against the trapezoid of the two derivatives."""
    good = sorted(_valid(records), key=lambda r: r.t)
    out = []
    for a, b in zip(good, good[1:]):
        dl = b.L - a.L
        trap = 0.5 * (b.t - a.t) * (a.dLdt_lemma + b.dLdt_lemma)
        out.append(abs(dl - trap) / abs(dl) if dl else math.inf)
    return out


# ---------------------------------------------------------------------------
# assumption verifier
# ---------------------------------------------------------------------------

QUAD_RESIDUAL = 0.10
WINDOW_POINTS = 32
SIGMA_SAMPLES = 33
SIGMA_CAP = 2000
OUTSIDE_SAMPLES = 2000
OUTSIDE_PASS = 0.99


@dataclass(frozen=True)
class AssumptionViolation:
    clause: str
    message: str
    theta: float = math.nan
    k: int = -1


@dataclass(frozen=True)
class AssumptionReport:
    theta_c: float
    d_min: float
    growth_rate_a: float
    quad_constant_C1: float
    quad_residual: float
    interval_length: float
    interval_length_ratio: float
    outside_floor_fraction: float
    outside_floor_ok: bool
    stopping_times: dict
    S_plus_max: float
    S_minus_max: float
    S_bound: float
    violations: list = field(default_factory=list)
    multiple_minima: bool = False

    def clause_ok(self, clause):
        return not any(v.clause == clause for v in self.violations)

    def to_dict(self):
        d = asdict(self)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, default=_nan_safe, **kw)


def _nan_safe(v):
    if isinstance(v, float):
        return None
    return str(v)


def synthetic_field(d_fn, theta_c, d_min, omega):
    """DifferenceField around a closed-form d (used for self-tests of the verifier)."""
    def evaluate(th):
        return np.asarray(d_fn(torus(np.asarray(th, dtype=np.float64))), dtype=np.float64)

    grid = np.arange(1024) / 1024
    return DifferenceField(grid, evaluate(grid), float(theta_c), float(d_min), float(omega), evaluator=evaluate)


def _wrap(x):
    return (x + 0.5) % 1.0 - 0.5


def quadratic_window(field, *, window_max=0.25, ratio=math.sqrt(2.0), residual=QUAD_RESIDUAL, points=WINDOW_POINTS,
                     min_window=1e-7):
    """Largest symmetric window around theta_c on which (d - d_min) / s^2 stays within ``residual`` of its fit.

    Returns (half_width, C1, fit_curvature, max_relative_residual); half_width
    is 0 and C1 inf when no window qualifies.
    """
    hw = window_max
    tc, dm = field.theta_c, field.d_min
    frac = np.arange(1, points + 1) / points
    while hw >= min_window:
        s = np.concatenate((-hw * frac[::-1], hw * frac))
        dd = field.evaluate(tc + s) - dm
        rho = dd / (s * s)
        k = float(np.sum(dd * s * s) / np.sum(s**4))
        if k > 0 and np.all(np.isfinite(rho)):
            res = float(np.max(np.abs(rho - k)) / k)
            if res < residual:
                c1 = max(float(rho.max()), 1.0 / float(rho.min())) if rho.min() > 0 else math.inf
                return hw, c1, k, res
        hw /= ratio
    return 0.0, math.inf, math.nan, math.inf


def _stopping_times(field, thetas, sign, threshold, cap=SIGMA_CAP, block=64):
    """First k >= 1 with d(theta + sign k omega) > threshold; cap+1 where none was found."""
    out = np.full(thetas.size, cap + 1, dtype=np.int64)
    todo = np.arange(thetas.size)
    k0 = 1
    while todo.size and k0 <= cap:
        ks = np.arange(k0, min(k0 + block, cap + 1))
        pts = thetas[todo, None] + sign * ks[None, :] * field.omega
        d = field.evaluate(pts.ravel()).reshape(pts.shape)
        hit = d > threshold
        found = hit.any(axis=1)
        out[todo[found]] = ks[np.argmax(hit[found], axis=1)]
        todo = todo[~found]
        k0 = ks[-1] + 1
    return out


def verify_assumptions(field: DifferenceField, *, window_max=0.25, sigma_samples=SIGMA_SAMPLES, sigma_cap=SIGMA_CAP,
                       outside_samples=OUTSIDE_SAMPLES, residual=QUAD_RESIDUAL):
    """Numerical reading of the critical-interval assumptions at one parameter.

    * I and C1: the largest window around theta_c where the quadratic
      two-sided bound holds with relative fit residual below ``residual``;
      C1 = max(max ratio, 1 / min ratio) of (d - d_min) / (theta - theta_c)^2.
    * C2 = |I| / (2 sqrt(d_min)).
    * sigma+/-(theta): first k >= 1 with d(theta +/- k omega) > sqrt(d_min).
    * a: the largest rate with D_{0,j} >= e^{a j} (j = 1..sigma+) and
      D_{-k,0} <= e^{-a k} (k = 1..sigma-) over the samples.
    * S+/-: the partial sums over the stopping window, against 1 / (1 - e^{-a}).
    * floor: d >= sqrt(d_min) on uniform samples outside the critical set.
    """
    tc, dm = field.theta_c, field.d_min
    violations = []
    root = math.sqrt(dm)

    hw, c1, _, qres = quadratic_window(field, window_max=window_max, residual=residual)
    if hw == 0.0 or not math.isfinite(c1):
        violations.append(AssumptionViolation("A2(c)", "no window around theta_c with a two-sided quadratic bound",
                                              tc))
    length = 2.0 * hw
    c2 = length / (2.0 * root) if root > 0 else math.inf
    if not c2 > 0:
        violations.append(AssumptionViolation("A2(d)", "critical interval has zero length", tc))

    # orbit samples over I (theta_c alone when I is empty)
    samples = torus(tc + (np.linspace(-hw, hw, sigma_samples) if hw > 0 else np.array([0.0])))
    sig_p = _stopping_times(field, samples, +1, root, sigma_cap)
    sig_m = _stopping_times(field, samples, -1, root, sigma_cap)
    for sig, label in ((sig_p, "+"), (sig_m, "-")):
        if np.any(sig > sigma_cap):
            i = int(np.argmax(sig > sigma_cap))
            violations.append(AssumptionViolation("A2(a)", f"sigma{label} not reached within {sigma_cap} steps",
                                                  float(samples[i]), sigma_cap))
    sig_p = np.minimum(sig_p, sigma_cap)
    sig_m = np.minimum(sig_m, sigma_cap)

    d0 = field.evaluate(samples)
    rates = []
    s_plus = np.zeros(samples.size)
    s_minus = np.zeros(samples.size)
    worst = (math.inf, math.nan, -1)
    for i, th in enumerate(samples):
        jp = np.arange(1, sig_p[i] + 1)
        fwd = field.evaluate(th + jp * field.omega) / d0[i]      # D_{0,j}
        km = np.arange(1, sig_m[i] + 1)
        bwd = d0[i] / field.evaluate(th - km * field.omega)       # D_{-k,0}
        r = np.concatenate((np.log(fwd) / jp, -np.log(bwd) / km))
        j = int(np.argmin(r))
        if r[j] < worst[0]:
            worst = (float(r[j]), float(th), int(j + 1 if j < jp.size else j - jp.size + 1))
        rates.append(float(r.min()))
        s_plus[i] = 1.0 + float(np.sum(1.0 / fwd[:-1]))
        s_minus[i] = 1.0 + float(np.sum(bwd[:-1]))
    a = float(min(rates))
    if not a > 0:
        violations.append(AssumptionViolation("A2(a)", f"no positive growth rate (worst rate {a:.3e})",
                                              worst[1], worst[2]))
    bound = 1.0 / (1.0 - math.exp(-a)) if a > 0 else math.inf
    sp, sm = float(s_plus.max()), float(s_minus.max())
    if a > 0 and max(sp, sm) > bound + 1e-6:
        violations.append(AssumptionViolation("S-bound", f"max S = {max(sp, sm):.6g} exceeds {bound:.6g}"))

    # floor outside the critical set C = I u C+ u C-
    xs = (np.arange(outside_samples) + 0.5) / outside_samples
    kmax = int(max(sig_p.max(), sig_m.max()))
    inside = np.zeros(xs.size, dtype=bool)
    for k in range(-kmax, kmax + 1):
        ok_k = (sig_p >= k) if k >= 0 else (sig_m >= -k)
        if hw > 0 and np.any(ok_k):
            inside |= np.abs(_wrap(xs - k * field.omega - tc)) <= hw
    outside = xs[~inside]
    frac_ok = float(np.mean(field.evaluate(outside) >= root)) if outside.size else 1.0
    floor_ok = frac_ok >= OUTSIDE_PASS
    if not floor_ok:
        violations.append(AssumptionViolation("A2(e)", f"d >= sqrt(d_min) on only {frac_ok:.1%} of outside samples"))

    stopping = {
        "sigma_plus_min": int(sig_p.min()), "sigma_plus_max": int(sig_p.max()),
        "sigma_plus_mean": float(sig_p.mean()), "sigma_minus_min": int(sig_m.min()),
        "sigma_minus_max": int(sig_m.max()), "sigma_minus_mean": float(sig_m.mean()),
        "samples": int(samples.size),
    }
    return AssumptionReport(tc, dm, a, c1, qres, length, c2, frac_ok, floor_ok, stopping, sp, sm, bound,
                            violations, field.multiple_minima)


def verify_at(family, *, N=DEFAULT_GRID, tol=DEFAULT_TOL, **kw):
    """Bundles, difference field and assumption report at the family's current t."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MultipleMinimaWarning)
        b = compute_bundles(family, N, tol=tol, retries=1, check_invariance=False)
        fld = difference_field(b, warn=True)
    return verify_assumptions(fld, **kw)
