"""UH certificates and bisection for the loss-of-hyperbolicity parameter."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundles import DEFAULT_CAP, DEFAULT_TOL, compute_bundles
from .core import ParameterFamily
from .errors import BadBracket, NonConvergence, QPCocycleError
from .lyapunov import le_from_bundle

D_FLOOR = 1e-12
RESIDUAL_TOL = 1e-8
EDGE_GRID = 256
PROBE_POINTS = 8
RETRIES = 2
# local points around the argmin so the log-stretch integral resolves the dip
CERT_REFINE = 64


@dataclass(frozen=True)
class UHCertificate:
    t: float
    is_uh: bool
    d_min: float
    cone_constant: float
    invariance_residual: float
    iterations: int
    reason: str = ""
    lyapunov: float = float("nan")


def _failed(t, reason, iterations=0):
    return UHCertificate(float(t), False, float("nan"), float("inf"), float("inf"), int(iterations), reason)


def certify_uh(family, N=EDGE_GRID, *, tol=DEFAULT_TOL, cap=DEFAULT_CAP, retries=RETRIES, d_floor=D_FLOOR,
               residual_tol=RESIDUAL_TOL, probe=PROBE_POINTS, refine_points=CERT_REFINE):
    """Try to certify uniform hyperbolicity of ``family`` at its current t.

    A short probe on ``probe`` points runs first, so most non-UH
    parameters are rejected without filling the whole grid.  d_min is the
    minimum of r_u - r_s over the mesh, which is the grid plus
    ``refine_points`` local points around its argmin (no golden-section step).
    """
    t = family.t
    try:
        if 0 < probe < N:
            compute_bundles(family, probe, tol=tol, cap=cap, retries=retries, refine=False, check_invariance=False)
        b = compute_bundles(family, N, tol=tol, cap=cap, retries=retries, refine=refine_points > 0,
                            refine_points=max(refine_points, 2))
    except NonConvergence as exc:
        kind = type(exc).__name__
        return _failed(t, f"{kind}: {exc}")
    d_min = float(np.min(b.d))
    residual = max(b.residual_u, b.residual_s)
    try:
        lyap = le_from_bundle(family, b).value
    except QPCocycleError as exc:
        return _failed(t, f"{type(exc).__name__}: {exc}", b.iterations_used)
    reason = ""
    if not d_min > d_floor:
        reason = f"d_min {d_min:.3e} at or below floor {d_floor:.1e}"
    elif not residual < residual_tol:
        reason = f"invariance residual {residual:.3e} not below {residual_tol:.1e}"
    elif not math.isfinite(b.cone_constant):
        reason = "cone constant not finite"
    elif not lyap > 0.0:
        reason = f"integrated log-stretch {lyap:.3e} not positive"
    return UHCertificate(float(t), not reason, d_min, b.cone_constant, residual, b.iterations_used, reason, lyap)


@dataclass(frozen=True)
class EdgeEstimate:
    t0: float
    bracket: tuple
    width: float
    certificates: list = field(default_factory=list)
    tol: float = 0.0

    def to_dict(self):
        out = asdict(self)
        out["bracket"] = list(self.bracket)
        return out

    def to_json(self, **kw):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, data):
        certs = [UHCertificate(**c) for c in data.get("certificates", [])]
        return cls(float(data["t0"]), tuple(data["bracket"]), float(data["width"]), certs, float(data.get("tol", 0.0)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _builder(family_or_builder):
    if isinstance(family_or_builder, ParameterFamily):
        return family_or_builder.at
    return family_or_builder


def schrodinger_bracket(potential):
    """(t_lo, t_hi) for a Schrodinger family with t = energy.

    Below min V - 2 there is no spectrum, so min V - 3 is safely UH.  The
    bottom of the spectrum lies at or below mean V - 2 (test against a slowly
    modulated alternating vector), so mean V - 2 + 1e-3 is normally inside
    the spectrum; a spectral gap right there would give BadBracket.
    """
    return potential.minimum()[1] - 3.0, potential.mean() - 2.0 + 1e-3


def suggested_edge_grid(potential, minimum=16):
    """Grid size that resolves ``potential`` well enough for the log-stretch sign test.

    Constant potentials give constant slope fields, so ``minimum`` points
    suffice.  The peaked potential has a dip of width about 1/(pi coupling)
    and needs roughly eight points across it; trig polynomials get 32 points
    per harmonic.
    """
    kind = potential.kind
    if kind == "zero" or (kind == "trig" and len(potential.coefficients) == 1):
        return int(minimum)
    if kind == "peaked":
        need = 8.0 * max(potential.coupling, 1.0)
    elif kind == "cosine":
        need = 32.0
    else:
        need = 32.0 * ((len(potential.coefficients) - 1) // 2)
    return max(EDGE_GRID, int(minimum), 1 << math.ceil(math.log2(need)))


def find_edge(family_or_builder, t_lo, t_hi, tol=1e-8, *, N=EDGE_GRID, bundle_tol=DEFAULT_TOL, log=None,
              **certify_kw):
    """Bisect [t_lo, t_hi] down to width ``tol`` between UH and non-UH certificates.

    ``family_or_builder`` is a ParameterFamily or any callable t -> family.
    Extra keywords go to ``certify_uh``.
    """
    build = _builder(family_or_builder)
    certify_kw["tol"] = bundle_tol
    if not t_lo < t_hi:
        raise BadBracket(f"need t_lo < t_hi, got {t_lo!r}, {t_hi!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo_cert = certify_uh(build(t_lo), N, **certify_kw)
    if not lo_cert.is_uh:
        raise BadBracket(f"lower end t={t_lo!r} is not certified UH ({lo_cert.reason})")
    hi_cert = certify_uh(build(t_hi), N, **certify_kw)
    if hi_cert.is_uh:
        raise BadBracket(f"upper end t={t_hi!r} is certified UH; the edge is not inside the bracket")
    certs = [lo_cert, hi_cert]
    lo, hi = float(t_lo), float(t_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        cert = certify_uh(build(mid), N, **certify_kw)
        certs.append(cert)
        if log is not None:
            log(f"t={mid:.15g} uh={cert.is_uh} width={hi - lo:.3e}")
        if cert.is_uh:
            lo = mid
        else:
            hi = mid
    return EdgeEstimate(0.5 * (lo + hi), (lo, hi), hi - lo, certs, float(tol))
