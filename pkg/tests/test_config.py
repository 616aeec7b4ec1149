from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpcocycle import ConfigError
from qpcocycle.config import ExperimentConfig, FamilySpec, NumericsSpec, OutputSpec, SweepSpec

pos = st.floats(1e-14, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def configs(draw):
    kind = draw(st.sampled_from(["zero", "cosine", "peaked", "trig"]))
    coeffs = tuple(draw(st.lists(st.floats(-3, 3), min_size=1, max_size=2)))
    coeffs = (coeffs[0],) + tuple(c for c in coeffs[1:]) * 2 if kind == "trig" else ()
    fam = FamilySpec(kind, draw(st.floats(0, 200)), coeffs, draw(st.sampled_from(["[0;1]", "[0;2]", "[0;1,2]"])),
                     draw(st.integers(20, 60)), draw(st.floats(-10, 10)))
    lo = draw(st.none() | st.floats(-5, -1))
    num = NumericsSpec(draw(st.integers(2, 8192)), draw(pos), draw(st.integers(64, 10**7)), draw(pos), draw(pos),
                       draw(st.integers(2, 4096)), lo, None if lo is None else lo + draw(st.floats(0.1, 3)),
                       draw(st.integers(1, 10**7)), draw(st.integers(0, 10**4)))
    t0 = draw(st.none() | st.floats(-5, 0))
    sw = SweepSpec(draw(st.floats(1e-8, 1.0)), draw(st.floats(1.01, 10)), draw(st.integers(5, 40)), t0,
                   draw(st.booleans()), draw(st.none() | st.floats(1e-8, 1e-1)))
    out = OutputSpec(draw(st.sampled_from(["out", "results/run 1", "/tmp/x"])), draw(st.booleans()))
    return ExperimentConfig(fam, num, sw, out)


@given(configs())
def test_round_trip(cfg):
    cfg.validate()
    back = ExperimentConfig.from_ini(cfg.to_ini())
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_defaults_are_valid():
    cfg = ExperimentConfig()
    cfg.validate()
    assert cfg.frequency().value == pytest.approx(0.6180339887498949, abs=1e-16)
    assert len(cfg.gaps()) == 14 and cfg.gaps()[0] == 1e-2


def test_digest_tracks_numbers_not_output():
    a = ExperimentConfig()
    b = replace(a, output=OutputSpec("elsewhere", False))
    c = replace(a, numerics=replace(a.numerics, grid=2048))
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


BAD = [
    ("family", "potential", "gaussian"),
    ("family", "coupling", "-1"),
    ("family", "frequency", "[0;0]"),
    ("family", "frequency_repeat", "0"),
    ("family", "energy", "nan"),
    ("numerics", "grid", "1"),
    ("numerics", "edge_grid", "1"),
    ("numerics", "bundle_tol", "0"),
    ("numerics", "quad_tol", "-1e-3"),
    ("numerics", "edge_tol", "inf"),
    ("numerics", "cap", "10"),
    ("numerics", "norm_steps", "0"),
    ("numerics", "burn_in", "-1"),
    ("numerics", "edge_lo", "-3"),
    ("sweep", "g0", "0"),
    ("sweep", "ratio", "1"),
    ("sweep", "count", "4"),
    ("sweep", "verify_gap", "-1"),
    ("output", "directory", ""),
    ("numerics", "grid", "12.5"),
    ("sweep", "fd", "maybe"),
]


@pytest.mark.parametrize("section,key,value", BAD)
def test_validation_names_field(section, key, value):
    text = f"[{section}]\n{key} = {value}\n"
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_ini(text)
    assert info.value.key.startswith(f"{section}.")
    assert key in str(info.value)


def test_trig_needs_odd_coefficients():
    with pytest.raises(ConfigError, match="family.coefficients"):
        ExperimentConfig.from_ini("[family]\npotential = trig\ncoefficients = 1, 2\n")


def test_edge_bounds_ordered():
    with pytest.raises(ConfigError, match="numerics.edge_lo"):
        ExperimentConfig.from_ini("[numerics]\nedge_lo = -1\nedge_hi = -2\n")


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="family.colour"):
        ExperimentConfig.from_ini("[family]\ncolour = red\n")
    with pytest.raises(ConfigError, match="extras"):
        ExperimentConfig.from_ini("[extras]\nx = 1\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini("not an ini file")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "absent.ini")
