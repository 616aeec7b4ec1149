"""Batched adaptive Simpson quadrature and periodic trapezoid sums.

The integrand is evaluated a whole refinement level at a time, since every
evaluation of a slope-field integrand is a kernel call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureNotConverged


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    cells: int
    evaluations: int


def adaptive_simpson(f, breakpoints, *, rtol=1e-10, atol=1e-14, min_width=1e-9, max_levels=50, force_split=None):
    """Integrate a vectorised ``f`` over [breakpoints[0], breakpoints[-1]].

    A cell is accepted when its Simpson/two-halves discrepancy is below its
    share (by width) of the global tolerance.  ``force_split(a, b, fa, fm, fb)``
    may return a boolean mask of cells to split regardless; splitting always
    stops at ``min_width``.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=np.float64))
    a, b = bp[:-1], bp[1:]
    length = bp[-1] - bp[0]
    m = 0.5 * (a + b)
    nodes = np.concatenate((bp, m))
    vals = f(nodes)
    evals = nodes.size
    fbp, fm = vals[: bp.size], vals[bp.size:]
    fa, fb = fbp[:-1], fbp[1:]
    s = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = rtol * abs(float(np.sum(s))) + atol

    total = 0.0
    err_total = 0.0
    cells = 0
    for _ in range(max_levels):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        new = f(np.concatenate((lm, rm)))
        evals += 2 * a.size
        flm, frm = new[: a.size], new[a.size:]
        s_left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        s_right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        s2 = s_left + s_right
        err = np.abs(s2 - s) / 15.0
        width = b - a
        ok = err <= tol * width / length
        if force_split is not None:
            ok &= ~np.asarray(force_split(a, b, fa, fm, fb), dtype=bool)
        ok |= width <= min_width
        total += float(np.sum(s2[ok] + (s2[ok] - s[ok]) / 15.0))
        err_total += float(np.sum(err[ok]))
        cells += int(np.count_nonzero(ok))
        keep = ~ok
        if not np.any(keep):
            return QuadResult(total, err_total, cells, evals)
        a_k, m_k, b_k = a[keep], m[keep], b[keep]
        a = np.concatenate((a_k, m_k))
        b = np.concatenate((m_k, b_k))
        m = 0.5 * (a + b)
        fa = np.concatenate((fa[keep], fm[keep]))
        fb = np.concatenate((fm[keep], fb[keep]))
        fm = np.concatenate((flm[keep], frm[keep]))
        s = np.concatenate((s_left[keep], s_right[keep]))
    raise QuadratureNotConverged(
        f"{a.size} cells still above tolerance after {max_levels} levels (estimate {total + float(np.sum(s)):.6e})"
    )


def periodic_trapezoid(x, y):
    """Trapezoid sum of a 1-periodic function sampled at sorted x in [0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = np.diff(np.append(x, x[0] + 1.0))
    return float(np.sum(0.5 * (y + np.roll(y, -1)) * dx))
