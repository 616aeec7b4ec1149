import json
import math

import numpy as np
import pytest

from qpcocycle import (
    BadBracket,
    EdgeEstimate,
    Frequency,
    Potential,
    certify_uh,
    find_edge,
    schrodinger_bracket,
    schrodinger_family,
    suggested_edge_grid,
)


@pytest.fixture(scope="module")
def free(golden):
    return schrodinger_family(Potential.zero(), golden)


@pytest.fixture(scope="module")
def free_edge(free):
    return find_edge(free, -3.0, 0.0, 1e-8, N=16)


class TestCertificate:
    def test_hyperbolic_free(self, free):
        c = certify_uh(free.at(-3.0), 16)
        assert c.is_uh and c.reason == ""
        assert c.d_min == pytest.approx(math.sqrt(5), rel=1e-12)
        assert c.lyapunov == pytest.approx(math.log((3 + math.sqrt(5)) / 2), rel=1e-12)

    def test_elliptic_free(self, free):
        c = certify_uh(free.at(0.0), 16)
        assert not c.is_uh and c.reason.split(":")[0] in ("NonConvergence", "ConeViolation")

    def test_parabolic_free(self, free):
        c = certify_uh(free.at(-2.0), 16)
        assert not c.is_uh and c.reason

    def test_invariants_of_positive_certificates(self, golden):
        fam = schrodinger_family(Potential.peaked(30.0), golden)
        for E in (-2.5, -2.1, -1.99):
            c = certify_uh(fam.at(E), 256)
            assert c.is_uh
            assert c.d_min > 1e-12 and c.invariance_residual < 1e-8 and math.isfinite(c.cone_constant)

    def test_monotone_distance_below_spectrum(self, golden):
        fam = schrodinger_family(Potential.peaked(30.0), golden)
        d = [certify_uh(fam.at(E), 256).d_min for E in (-2.6, -2.3, -2.1, -2.0, -1.985)]
        assert np.all(np.diff(d) < 0)


class TestFindEdge:
    def test_free_edge(self, free_edge):
        assert abs(free_edge.t0 + 2.0) <= 1e-8
        assert free_edge.width <= 1e-8

    def test_constant_shift(self, golden):
        for c in (0.7, -1.25):
            pot = Potential.constant(c)
            est = find_edge(schrodinger_family(pot, golden), *schrodinger_bracket(pot), 1e-8, N=16)
            assert abs(est.t0 - (c - 2.0)) <= 1e-8

    def test_bracket_validity(self, free_edge):
        lo, hi = free_edge.bracket
        certs = {c.t: c for c in free_edge.certificates}
        assert certs[lo].is_uh and not certs[hi].is_uh
        # every step kept one certified end on each side
        for c in free_edge.certificates:
            assert c.is_uh == (c.t <= lo)

    def test_stability_under_tol_halving(self, free):
        a = find_edge(free, -3.0, 0.0, 1e-6, N=16)
        b = find_edge(free, -3.0, 0.0, 5e-7, N=16)
        assert abs(a.t0 - b.t0) <= 1e-6

    def test_bad_brackets(self, free):
        with pytest.raises(BadBracket):
            find_edge(free, -1.0, 0.0, 1e-6, N=16)
        with pytest.raises(BadBracket):
            find_edge(free, -4.0, -3.0, 1e-6, N=16)
        with pytest.raises(BadBracket):
            find_edge(free, 0.0, -3.0, 1e-6, N=16)

    def test_builder_callable(self, free):
        est = find_edge(free.at, -3.0, 0.0, 1e-4, N=16)
        assert abs(est.t0 + 2.0) <= 1e-4

    def test_json_round_trip(self, free_edge):
        data = json.loads(free_edge.to_json())
        back = EdgeEstimate.from_dict(data)
        assert back.t0 == free_edge.t0 and back.bracket == free_edge.bracket
        assert [c.is_uh for c in back.certificates] == [c.is_uh for c in free_edge.certificates]


def test_suggested_grid():
    assert suggested_edge_grid(Potential.zero()) == 16
    assert suggested_edge_grid(Potential.constant(0.3)) == 16
    assert suggested_edge_grid(Potential.peaked(30)) == 256
    assert suggested_edge_grid(Potential.peaked(120)) == 1024
    assert suggested_edge_grid(Potential.cosine(3.0)) == 256


def test_automatic_bracket():
    lo, hi = schrodinger_bracket(Potential.peaked(30))
    assert lo == pytest.approx(1 / 901 - 3)
    assert hi == pytest.approx(1 / math.sqrt(901) - 2 + 1e-3)


@pytest.mark.slow
def test_peaked_edge_reproducible_across_grids(golden):
    fam = schrodinger_family(Potential.peaked(30.0), golden)
    tol = 1e-6
    a = find_edge(fam, -1.9790, -1.9780, tol, N=2048)
    b = find_edge(fam, -1.9790, -1.9780, tol, N=4096)
    assert abs(a.t0 - b.t0) <= 10 * tol
