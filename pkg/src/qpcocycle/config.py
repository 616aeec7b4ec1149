"""Experiment configuration: INI file with [family], [numerics], [sweep], [output]."""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .core import Frequency, Potential, schrodinger_family
from .errors import ConfigError

_KINDS = ("zero", "cosine", "peaked", "trig")


@dataclass(frozen=True)
class FamilySpec:
    potential: str = "zero"
    coupling: float = 0.0
    coefficients: tuple = ()
    frequency: str = "[0;1]"
    frequency_repeat: int = 60
    energy: float = -3.0


@dataclass(frozen=True)
class NumericsSpec:
    grid: int = 4096
    bundle_tol: float = 1e-10
    cap: int = 200_000
    quad_tol: float = 1e-10
    edge_tol: float = 1e-9
    edge_grid: int = 256
    edge_lo: float | None = None
    edge_hi: float | None = None
    norm_steps: int = 1_000_000
    burn_in: int = 1_000


@dataclass(frozen=True)
class SweepSpec:
    g0: float = 1e-2
    ratio: float = 2.0
    count: int = 14
    t0: float | None = None
    fd: bool = True
    verify_gap: float | None = None


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    cache: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    family: FamilySpec = field(default_factory=FamilySpec)
    numerics: NumericsSpec = field(default_factory=NumericsSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    # -- construction -----------------------------------------------------
    def frequency(self):
        return Frequency.parse(self.family.frequency, self.family.frequency_repeat)

    def potential(self):
        f = self.family
        if f.potential == "trig":
            return Potential.trig(f.coefficients)
        if f.potential == "zero":
            return Potential.zero()
        return Potential(f.potential, f.coupling)

    def parameter_family(self, t=None):
        return schrodinger_family(self.potential(), self.frequency(), self.family.energy if t is None else t)

    def gaps(self):
        s = self.sweep
        return [s.g0 * s.ratio ** (-k) for k in range(s.count)]

    # -- hashing ------------------------------------------------------------
    def content(self, *sections):
        """Canonical dict of the named sections (all computational ones by default)."""
        names = sections or ("family", "numerics", "sweep")
        return {n: asdict(getattr(self, n)) for n in names}

    def digest(self, *sections, extra=None):
        payload = {"config": self.content(*sections), "extra": extra}
        text = json.dumps(payload, sort_keys=True, default=list, allow_nan=True)
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    # -- serialisation ------------------------------------------------------
    def to_ini(self):
        cp = configparser.ConfigParser()
        for sec in fields(self):
            spec = getattr(self, sec.name)
            cp[sec.name] = {}
            for f in fields(spec):
                v = getattr(spec, f.name)
                if v is None:
                    continue
                if isinstance(v, tuple):
                    v = ", ".join(repr(float(c)) for c in v)
                elif isinstance(v, float):
                    v = repr(v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                cp[sec.name][f.name] = str(v)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("file", f"unparseable config: {exc}") from exc
        known = {f.name: f.type for f in fields(cls)}
        for sec in cp.sections():
            if sec not in known:
                raise ConfigError(sec, f"unknown section [{sec}]")
        parts = {}
        for sec_field in fields(cls):
            spec_cls = {"family": FamilySpec, "numerics": NumericsSpec, "sweep": SweepSpec,
                        "output": OutputSpec}[sec_field.name]
            values = {}
            if cp.has_section(sec_field.name):
                sect = cp[sec_field.name]
                valid = {f.name: f for f in fields(spec_cls)}
                for key in sect:
                    if key not in valid:
                        raise ConfigError(f"{sec_field.name}.{key}", "unknown key")
                    values[key] = _parse(f"{sec_field.name}.{key}", sect[key], getattr(spec_cls(), key), valid[key])
            parts[sec_field.name] = spec_cls(**values)
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("file", f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text)

    # -- validation ---------------------------------------------------------
    def validate(self):
        f, n, s = self.family, self.numerics, self.sweep
        if f.potential not in _KINDS:
            raise ConfigError("family.potential", f"must be one of {', '.join(_KINDS)}")
        if not (math.isfinite(f.coupling) and f.coupling >= 0):
            raise ConfigError("family.coupling", "must be a finite number >= 0")
        if f.potential == "trig" and (len(f.coefficients) % 2 != 1 or not f.coefficients):
            raise ConfigError("family.coefficients", "trig potential needs an odd number of coefficients")
        if f.frequency_repeat < 1:
            raise ConfigError("family.frequency_repeat", "must be >= 1")
        try:
            om = self.frequency()
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("family.frequency", f"not a continued fraction: {exc}") from exc
        if not 0.0 < om.value < 1.0:
            raise ConfigError("family.frequency", "value must lie in (0, 1)")
        if not math.isfinite(f.energy):
            raise ConfigError("family.energy", "must be finite")
        if n.grid < 2:
            raise ConfigError("numerics.grid", "must be >= 2")
        if n.edge_grid < 2:
            raise ConfigError("numerics.edge_grid", "must be >= 2")
        for key in ("bundle_tol", "quad_tol", "edge_tol"):
            v = getattr(n, key)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"numerics.{key}", "must be positive")
        if n.cap < 64:
            raise ConfigError("numerics.cap", "must be >= 64")
        if n.norm_steps < 1:
            raise ConfigError("numerics.norm_steps", "must be >= 1")
        if n.burn_in < 0:
            raise ConfigError("numerics.burn_in", "must be >= 0")
        if (n.edge_lo is None) != (n.edge_hi is None):
            raise ConfigError("numerics.edge_lo", "edge_lo and edge_hi must be given together")
        if n.edge_lo is not None and not n.edge_lo < n.edge_hi:
            raise ConfigError("numerics.edge_lo", "must be below numerics.edge_hi")
        if not (math.isfinite(s.g0) and s.g0 > 0):
            raise ConfigError("sweep.g0", "must be positive")
        if not (math.isfinite(s.ratio) and s.ratio > 1):
            raise ConfigError("sweep.ratio", "must be > 1")
        if s.count < 5:
            raise ConfigError("sweep.count", "must be >= 5")
        if s.verify_gap is not None and not s.verify_gap > 0:
            raise ConfigError("sweep.verify_gap", "must be positive")
        if not self.output.directory:
            raise ConfigError("output.directory", "must not be empty")


def _parse(key, raw, default, f):
    raw = raw.strip()
    typ = str(f.type)
    try:
        if "tuple" in typ:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if "bool" in typ:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if "None" in typ and raw.lower() in ("", "none"):
            return None
        if "int" in typ:
            v = float(raw)
            if v != int(v):
                raise ValueError(f"not an integer: {raw!r}")
            return int(v)
        if "float" in typ:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from exc
