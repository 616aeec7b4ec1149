"""Frequencies, 2x2 matrices, quasi-periodic cocycles and the shear family.

A cocycle acts on the torus times the plane by ``(theta, v) -> (theta + omega,
A(theta) v)``.  The one-parameter family used throughout is
``A_t(theta) = A(theta) (I + t w)`` with the nilpotent shear ``w`` whose only
non-zero entry is the lower-left 1.  For Schrodinger cocycles with rows
``(V - E, -1), (1, 0)`` this shifts the energy: ``A_E (I + s w) = A_{E+s}``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import kernels

__all__ = [
    "Frequency",
    "Mat2",
    "Potential",
    "CocycleMap",
    "ParameterFamily",
    "torus",
    "shear_exp",
    "schrodinger_cocycle",
    "schrodinger_family",
    "constant_family",
    "iterate_product",
    "iterate_product_scaled",
]

_POTENTIAL_KINDS = {"zero": 0, "cosine": 1, "peaked": 2, "trig": 3}


def torus(x):
    """Reduce a point (or array) into [0, 1)."""
    if np.ndim(x):
        x = np.asarray(x, dtype=np.float64)
        return x - np.floor(x)
    x = float(x)
    y = x - math.floor(x)
    return 0.0 if y >= 1.0 else y


# ---------------------------------------------------------------------------
# Frequencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frequency:
    """An irrational rotation number given by a (long) continued fraction.

    ``value`` is the double nearest to the full expansion; ``convergents``
    holds the ``(p_k, q_k)`` pairs, used to pick orbit lengths and to check
    Diophantine bounds.
    """

    value: float
    coefficients: tuple
    convergents: tuple
    diophantine_kappa: float | None = None
    diophantine_tau: float | None = None

    @classmethod
    def from_continued_fraction(cls, coefficients, kappa=None, tau=None):
        coefficients = tuple(int(a) for a in coefficients)
        if len(coefficients) < 2:
            raise ValueError("continued fraction needs a0 and at least one partial quotient")
        if coefficients[0] != 0:
            raise ValueError("frequency must lie in (0, 1): a0 must be 0")
        if any(a < 1 for a in coefficients[1:]):
            raise ValueError("partial quotients must be positive integers")
        if coefficients[-1] == 1 and len(coefficients) == 2:
            raise ValueError("[0;1] is the rational 1")
        convergents = []
        p_prev, p = 1, coefficients[0]
        q_prev, q = 0, 1
        convergents.append((p, q))
        for a in coefficients[1:]:
            p_prev, p = p, a * p + p_prev
            q_prev, q = q, a * q + q_prev
            convergents.append((p, q))
        exact = Fraction(p, q)
        freq = cls(
            value=float(exact),
            coefficients=coefficients,
            convergents=tuple(convergents),
            diophantine_kappa=kappa,
            diophantine_tau=tau,
        )
        if kappa is not None:
            if tau is None or tau < 1 or kappa <= 0:
                raise ValueError("Diophantine constants need kappa > 0 and tau >= 1")
            if not freq.check_diophantine(kappa, tau):
                raise ValueError(f"|q w - p| >= {kappa}/q^{tau} fails on a tabulated convergent")
        return freq

    @classmethod
    def golden_mean(cls, depth=60):
        """(sqrt(5) - 1)/2 = [0; 1, 1, 1, ...]; 60 terms is exact to double precision."""
        return cls.from_continued_fraction((0,) + (1,) * depth, kappa=0.38, tau=1.0)

    @classmethod
    def parse(cls, text, repeat=1):
        """Parse ``"[0; a1, a2, ...]"``; the block after ';' is repeated ``repeat`` times."""
        m = re.fullmatch(r"\s*\[\s*(\d+)\s*;\s*([\d\s,]+?)\s*\]\s*", text)
        if not m:
            raise ValueError(f"cannot parse continued fraction {text!r}")
        block = [int(tok) for tok in m.group(2).replace(",", " ").split()]
        if not block or repeat < 1:
            raise ValueError("empty continued fraction block")
        return cls.from_continued_fraction([int(m.group(1))] + block * int(repeat))

    def to_string(self):
        return "[0;" + ",".join(str(a) for a in self.coefficients[1:]) + "]"

    def _exact(self):
        p, q = self.convergents[-1]
        return Fraction(p, q)

    def convergent_errors(self):
        """|q_k w - p_k| for every convergent but the last (which is w itself)."""
        w = self._exact()
        return [abs(q * w - p) for p, q in self.convergents[:-1]]

    def check_diophantine(self, kappa, tau):
        w = self._exact()
        for p, q in self.convergents[:-1]:
            if q == 0:
                continue
            if float(abs(q * w - p)) < kappa / q**tau:
                return False
        return True

    def orbit_length(self, n_min):
        """Smallest convergent denominator >= n_min (n_min itself if none is tabulated)."""
        for _, q in self.convergents:
            if q >= n_min:
                return int(q)
        return int(n_min)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mat2:
    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64).reshape(-1)
        return cls(*(float(v) for v in arr))

    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def trace(self):
        return self.a11 + self.a22

    def as_array(self):
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def inverse(self):
        det = self.det()
        return Mat2(self.a22 / det, -self.a12 / det, -self.a21 / det, self.a11 / det)

    def scaled(self, s):
        return Mat2(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)

    def __matmul__(self, other):
        return Mat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def __iter__(self):
        return iter((self.a11, self.a12, self.a21, self.a22))


def shear_exp(t):
    """exp(t w) = I + t w, the unipotent lower-triangular matrix."""
    return Mat2(1.0, 0.0, float(t), 1.0)


# ---------------------------------------------------------------------------
# Potentials and cocycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Potential:
    """1-periodic potential from a closed catalog.

    ``cosine`` is ``coupling * cos(2 pi theta)``; ``peaked`` is
    ``1 / (1 + coupling**2 sin(pi theta)**2)``; ``trig`` is
    ``a0 + sum_k a_k cos(2 pi k theta) + b_k sin(2 pi k theta)`` with
    coefficients ``(a0, a1, b1, a2, b2, ...)``.
    """

    kind: str
    coupling: float = 0.0
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in _POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")
        if self.kind == "trig" and (len(self.coefficients) % 2 != 1):
            raise ValueError("trig coefficients must be (a0, a1, b1, ..., aD, bD)")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def cosine(cls, coupling):
        return cls("cosine", float(coupling))

    @classmethod
    def peaked(cls, coupling):
        return cls("peaked", float(coupling))

    @classmethod
    def trig(cls, coefficients):
        return cls("trig", 0.0, tuple(float(c) for c in coefficients))

    @classmethod
    def constant(cls, c):
        return cls.trig((c,))

    @property
    def code(self):
        return _POTENTIAL_KINDS[self.kind]

    def vcoef(self):
        if self.kind == "trig":
            return np.array(self.coefficients, dtype=np.float64)
        return np.zeros(1)

    def __call__(self, theta):
        x = np.asarray(theta, dtype=np.float64)
        if self.kind == "zero":
            out = np.zeros_like(x)
        elif self.kind == "cosine":
            out = self.coupling * np.cos(2 * np.pi * x)
        elif self.kind == "peaked":
            out = 1.0 / (1.0 + self.coupling**2 * np.sin(np.pi * x) ** 2)
        else:
            c = self.coefficients
            out = np.full_like(x, c[0])
            for k in range(1, (len(c) - 1) // 2 + 1):
                out = out + c[2 * k - 1] * np.cos(2 * np.pi * k * x) + c[2 * k] * np.sin(2 * np.pi * k * x)
        return out if out.ndim else float(out)

    def minimum(self):
        """(theta_min, V_min); closed form for the named kinds, dense sampling for trig."""
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind == "cosine":
            return 0.5, -self.coupling
        if self.kind == "peaked":
            return 0.5, 1.0 / (1.0 + self.coupling**2)
        xs = np.arange(1 << 16) / (1 << 16)
        vals = self(xs)
        i = int(np.argmin(vals))
        return float(xs[i]), float(vals[i])

    def mean(self):
        if self.kind in ("zero", "cosine"):
            return 0.0
        if self.kind == "peaked":
            return 1.0 / math.sqrt(1.0 + self.coupling**2)
        return float(self.coefficients[0])

    def describe(self):
        if self.kind == "trig":
            return {"kind": "trig", "coefficients": list(self.coefficients)}
        return {"kind": self.kind, "coupling": self.coupling}


@dataclass(frozen=True)
class CocycleMap:
    """theta -> A(theta) from the closed catalog: Schrodinger, or trig-polynomial entries.

    Constant matrices are degree-0 trig polynomials.  ``matrix_coefficients``
    is a 4-tuple (a11, a12, a21, a22) of coefficient tuples in the same
    layout as ``Potential.trig``.
    """

    frequency: Frequency
    kind: str = "schrodinger"
    potential: Potential | None = None
    energy: float = 0.0
    matrix_coefficients: tuple | None = None

    def __post_init__(self):
        if self.kind == "schrodinger":
            if self.potential is None:
                raise ValueError("Schrodinger cocycle needs a potential")
        elif self.kind == "matrix":
            mc = self.matrix_coefficients
            if mc is None or len(mc) != 4 or len({len(c) for c in mc}) != 1 or len(mc[0]) % 2 != 1:
                raise ValueError("matrix_coefficients must be four equal-length odd tuples")
            xs = np.arange(64) / 64 + 0.5 / 64
            det = self._det_samples(xs)
            if np.max(np.abs(det - 1.0)) > 1e-12:
                raise ValueError("cocycle matrices must lie in SL(2,R) (|det - 1| < 1e-12)")
        else:
            raise ValueError(f"unknown cocycle kind {self.kind!r}")

    @classmethod
    def constant(cls, m, frequency):
        m = m if isinstance(m, Mat2) else Mat2.from_array(m)
        return cls(frequency, "matrix", matrix_coefficients=tuple((float(v),) for v in m))

    @classmethod
    def trig_matrix(cls, coefficients, frequency):
        return cls(frequency, "matrix", matrix_coefficients=tuple(tuple(float(v) for v in c) for c in coefficients))

    def _det_samples(self, xs):
        e = self.entries(xs)
        return e[:, 0] * e[:, 3] - e[:, 1] * e[:, 2]

    def kernel_args(self, t=0.0):
        if self.kind == "schrodinger":
            pot = self.potential
            return (0, pot.code, float(pot.coupling), float(self.energy), float(t), pot.vcoef(), np.zeros((4, 1)))
        mcoef = np.array(self.matrix_coefficients, dtype=np.float64)
        return (1, 0, 0.0, 0.0, float(t), np.zeros(1), mcoef)

    def entries(self, thetas, t=0.0):
        """(m, 4) array of (a11, a12, a21, a22) of A(theta) (I + t w)."""
        return kernels.backend("numpy").entries(np.asarray(thetas, dtype=np.float64).reshape(-1), *self.kernel_args(t))

    def evaluate(self, theta):
        return Mat2.from_array(self.entries([theta])[0])

    __call__ = evaluate

    def sheared(self, t):
        """The cocycle theta -> A(theta) (I + t w) as a new map (exact)."""
        if self.kind == "schrodinger":
            return replace(self, energy=self.energy + t)
        a11, a12, a21, a22 = (np.array(c) for c in self.matrix_coefficients)
        coeffs = (a11 + t * a12, a12, a21 + t * a22, a22)
        return replace(self, matrix_coefficients=tuple(tuple(float(v) for v in c) for c in coeffs))

    def describe(self):
        if self.kind == "schrodinger":
            return {"kind": "schrodinger", "potential": self.potential.describe(), "energy": self.energy}
        return {"kind": "matrix", "coefficients": [list(c) for c in self.matrix_coefficients]}


def schrodinger_cocycle(potential, energy, frequency):
    """theta -> rows (V(theta) - E, -1), (1, 0)."""
    return CocycleMap(frequency, "schrodinger", potential, float(energy))


@dataclass(frozen=True)
class ParameterFamily:
    """A_t(theta) = A(theta) exp(t w) with w the lower-left nilpotent shear."""

    base: CocycleMap
    t: float = 0.0
    validity_window: tuple | None = None
    shear_generator: Mat2 = field(default=Mat2(0.0, 0.0, 1.0, 0.0), init=False, repr=False)

    @property
    def frequency(self):
        return self.base.frequency

    @property
    def omega(self):
        return self.base.frequency.value

    def at(self, t):
        return replace(self, t=float(t))

    def shifted(self, s):
        return self.at(self.t + s)

    def rebased(self):
        """Same cocycle with the shear absorbed into the base and t = 0."""
        return ParameterFamily(self.base.sheared(self.t), 0.0, self.validity_window)

    def kernel_args(self):
        return self.base.kernel_args(self.t)

    def entries(self, thetas):
        return self.base.entries(thetas, self.t)

    def evaluate(self, theta):
        return self.base.evaluate(theta) @ shear_exp(self.t)

    __call__ = evaluate

    def describe(self):
        return {"base": self.base.describe(), "t": self.t, "omega": self.omega}


def schrodinger_family(potential, frequency, energy=0.0):
    """Family whose parameter t is the energy itself (base cocycle at E = 0)."""
    return ParameterFamily(schrodinger_cocycle(potential, 0.0, frequency), float(energy))


def constant_family(m, frequency, t=0.0):
    return ParameterFamily(CocycleMap.constant(m, frequency), float(t))


def iterate_product_scaled(family, theta, n):
    """(M, log_scale) with A_t^n(theta) = exp(log_scale) * M, safe from overflow."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return Mat2.identity(), 0.0
    mats, logs = kernels.scaled_product(np.array([torus(theta)]), n, family.kernel_args(), family.omega)
    return Mat2.from_array(mats[0]), float(logs[0])


def iterate_product(family, theta, n):
    """The ordered product A_t(theta + (n-1) w) ... A_t(theta); n = 0 gives I."""
    m, lg = iterate_product_scaled(family, theta, n)
    return m.scaled(math.exp(lg)) if lg else m
