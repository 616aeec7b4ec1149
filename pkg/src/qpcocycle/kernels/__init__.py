"""Dispatch layer for the numerical kernels.

The active implementation is chosen once at import (see ``qpcocycle._backend``);
``backend(name)`` returns either implementation explicitly so the two can be
compared side by side.
"""

import math

import numpy as np

from .._backend import BACKEND_NAME, USE_NUMBA, kernel_counter
from . import _numpy

if USE_NUMBA:
    from . import _numba

    _active = _numba
else:  # pragma: no cover - exercised with QPCOCYCLE_DISABLE_NUMBA=1
    _numba = None
    _active = _numpy

__all__ = [
    "BACKEND_NAME",
    "backend",
    "split_frequency",
    "entries",
    "push_slopes",
    "converge_slopes",
    "scaled_product",
    "log_stretch",
]


def backend(name=None):
    """Return the kernel module for ``name`` ('numba' or 'numpy'); default is the active one."""
    if name is None:
        return _active
    if name == "numpy":
        return _numpy
    if name == "numba":
        if _numba is None:
            from . import _numba as mod  # noqa: F811

            return mod
        return _numba
    raise ValueError(f"unknown backend {name!r}")


def split_frequency(omega):
    """Split omega into a 26-bit head and a tail so k*head is exact for |k| < 2**27."""
    hi = math.floor(omega * 2.0**26) / 2.0**26
    return hi, omega - hi


def _impl(impl):
    kernel_counter.bump()
    return backend(impl)


def entries(xs, cargs, impl=None):
    return _impl(impl).entries(np.ascontiguousarray(xs, dtype=np.float64), *cargs)


def push_slopes(thetas, n, seed, forward, cargs, omega, impl=None):
    w_hi, w_lo = split_frequency(omega)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    return _impl(impl).push_slopes(thetas, int(n), float(seed), bool(forward), *cargs, w_hi, w_lo)


def converge_slopes(thetas, n0, cap, tol, seed, forward, cargs, omega, impl=None):
    w_hi, w_lo = split_frequency(omega)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    return _impl(impl).converge_slopes(
        thetas, int(n0), int(cap), float(tol), float(seed), bool(forward), *cargs, w_hi, w_lo
    )


def scaled_product(thetas, n, cargs, omega, impl=None):
    w_hi, w_lo = split_frequency(omega)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    return _impl(impl).scaled_product(thetas, int(n), *cargs, w_hi, w_lo)


def log_stretch(theta0s, n, burn_in, cargs, omega, impl=None):
    w_hi, w_lo = split_frequency(omega)
    theta0s = np.ascontiguousarray(theta0s, dtype=np.float64)
    return _impl(impl).log_stretch(theta0s, int(n), int(burn_in), *cargs, w_hi, w_lo)
