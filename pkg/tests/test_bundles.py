import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import R_S_FREE, R_U_FREE
from qpcocycle import (
    ConeViolation,
    Frequency,
    Mat2,
    MultipleMinimaWarning,
    NonConvergence,
    Potential,
    compute_bundles,
    difference_field,
    growth_ratio,
    mobius_apply,
    schrodinger_family,
    stable_direction,
    step_ratio,
    unstable_direction,
)
from qpcocycle.bundles import read_bundle_csv, slopes_at, solve_slopes
from qpcocycle.core import torus


@pytest.fixture(scope="module")
def free_bundles(free_family):
    return compute_bundles(free_family, 256)


@pytest.fixture(scope="module")
def peaked_bundles(peaked_family):
    return compute_bundles(peaked_family, 1024)


@pytest.fixture(scope="module")
def cosine_near_edge(golden):
    # coupling-3 cosine, about 1e-3 below its lowest edge (near -3.38623); single dip
    fam = schrodinger_family(Potential.cosine(3.0), golden, -3.38723)
    return compute_bundles(fam, 2048)


@pytest.fixture(scope="module")
def near_edge(golden):
    # about 1e-3 below the lowest edge of the peaked family at coupling 30
    fam = schrodinger_family(Potential.peaked(30.0), golden, -1.98)
    return compute_bundles(fam, 2048)


class TestMobius:
    def test_infinity_and_pole(self):
        m = Mat2(3.0, -1.0, 1.0, 0.0)
        assert mobius_apply(m, math.inf) == 3.0
        assert mobius_apply(m, 0.0) == math.inf

    @given(st.floats(2.05, 50.0), st.floats(0.1, 10.0))
    def test_eigen_slopes_are_fixed(self, tr, k):
        # hyperbolic conjugate of diag(l, 1/l) with slopes r_u = k, r_s = -1/k ... use a generic SL(2) matrix
        lam = (tr + math.sqrt(tr * tr - 4)) / 2
        P = np.array([[k, 1.0], [1.0, 2.0 / k + 1.0]])
        M = P @ np.diag([lam, 1 / lam]) @ np.linalg.inv(P)
        m = Mat2.from_array(M)
        ru, rs = P[0, 0] / P[1, 0], P[0, 1] / P[1, 1]
        assert mobius_apply(m, ru) == pytest.approx(ru, rel=1e-9)
        assert mobius_apply(m, rs) == pytest.approx(rs, rel=1e-9)

    @given(st.floats(-100, 100))
    def test_composition(self, r):
        a, b = Mat2(3.0, -1.0, 1.0, 0.0), Mat2(2.0, 1.0, 1.0, 1.0)
        inner = mobius_apply(b, r)
        if not math.isfinite(inner):
            return
        lhs, rhs = mobius_apply(a @ b, r), mobius_apply(a, inner)
        if math.isfinite(lhs) and abs(lhs) < 1e8:
            assert lhs == pytest.approx(rhs, rel=1e-7, abs=1e-7)


class TestDirections:
    def test_free_unstable_and_stable(self, free_family):
        assert unstable_direction(free_family, 0.3).slope == pytest.approx(R_U_FREE, rel=1e-12)
        assert stable_direction(free_family, 0.3).slope == pytest.approx(R_S_FREE, rel=1e-12)

    def test_fixed_n_reports_residual(self, free_family):
        res = unstable_direction(free_family, 0.3, n=40)
        assert res.residual < 1e-12

    def test_elliptic_does_not_converge(self, golden):
        with pytest.raises(NonConvergence):
            unstable_direction(schrodinger_family(Potential.zero(), golden, 0.0), 0.1, cap=4096)

    @given(st.floats(0, 1, exclude_max=True), st.floats(0.3, 50.0), st.floats(0.01, 0.3))
    def test_seed_independence(self, th, seed_u, seed_s):
        fam = schrodinger_family(Potential.peaked(30.0), Frequency.golden_mean(), -2.2)
        a = unstable_direction(fam, th).slope
        b = unstable_direction(fam, th, r_seed=seed_u).slope
        c = stable_direction(fam, th).slope
        d = stable_direction(fam, th, r_seed=seed_s).slope
        assert abs(a - b) < 1e-10
        assert abs(c - d) < 1e-10


class TestComputeBundles:
    def test_free_constant_slopes(self, free_bundles):
        assert np.allclose(free_bundles.r_u, R_U_FREE, rtol=1e-12)
        assert np.allclose(free_bundles.r_s, R_S_FREE, rtol=1e-12)
        assert free_bundles.cone_constant == pytest.approx(R_U_FREE, rel=1e-12)

    def test_free_near_edge_uniform_gap(self, golden):
        b = compute_bundles(schrodinger_family(Potential.zero(), golden, -2.01), 128)
        assert np.allclose(b.d, math.sqrt(0.0401), rtol=1e-8)

    def test_free_symmetry(self, golden):
        b = compute_bundles(schrodinger_family(Potential.zero(), golden, -2.3), 512)
        assert np.ptp(b.d) < 1e-10

    def test_inside_spectrum_raises(self, golden):
        with pytest.raises(NonConvergence):
            compute_bundles(schrodinger_family(Potential.zero(), golden, 0.0), 32, cap=4096)

    def test_grid_size_validated(self, free_family):
        with pytest.raises(ValueError):
            compute_bundles(free_family, 1)

    def test_invariance_residual(self, peaked_bundles, near_edge):
        for b in (peaked_bundles, near_edge):
            assert b.residual_u < 1e-8 and b.residual_s < 1e-8

    def test_decay_rate_below_one(self, peaked_bundles, near_edge):
        assert 0 <= peaked_bundles.decay_rate < 1
        assert 0 <= near_edge.decay_rate < 1

    def test_order_and_cone(self, peaked_bundles, near_edge):
        for b in (peaked_bundles, near_edge):
            C = b.cone_constant
            assert np.all(b.r_s < b.r_u)
            assert np.all(b.r_s >= 1 / C) and np.all(b.r_u <= C)

    def test_refinement_adds_points_near_dip(self, near_edge):
        assert near_edge.thetas.size > near_edge.n_uniform
        assert np.all(np.diff(near_edge.thetas) > 0)
        extra = near_edge.thetas[~near_edge.uniform_mask]
        i = int(np.argmin(near_edge.d))
        # centred on the uniform-grid argmin, which is within one cell of the mesh argmin
        slack = 1.0 / near_edge.n_uniform
        assert np.max(np.abs(extra - near_edge.thetas[i])) <= near_edge.refinement_width + slack

    def test_mesh_override(self, peaked_family, peaked_bundles):
        mesh = peaked_bundles.thetas[::7]
        b = compute_bundles(peaked_family, thetas=mesh)
        assert np.allclose(b.r_u, peaked_bundles.r_u[::7], rtol=1e-10)

    def test_csv_round_trip(self, tmp_path, peaked_bundles):
        path = tmp_path / "b.csv"
        peaked_bundles.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "theta,r_u,r_s,d"
        data = read_bundle_csv(path)
        assert np.array_equal(data["r_u"], peaked_bundles.r_u)
        assert np.array_equal(data["theta"], peaked_bundles.thetas)

    def test_cone_violation_is_nonconvergence(self):
        assert issubclass(ConeViolation, NonConvergence)

    def test_solve_flags_elliptic(self, golden):
        sol = solve_slopes(schrodinger_family(Potential.zero(), golden, 0.5), np.arange(8) / 8, True, cap=1024)
        assert np.all(sol.flag != 0)


class TestDifferenceField:
    def test_constant_field_flags_multiple_minima(self, free_bundles):
        with pytest.warns(MultipleMinimaWarning):
            f = difference_field(free_bundles)
        assert f.multiple_minima
        assert f.d_min == pytest.approx(math.sqrt(5), rel=1e-12)

    def test_refined_minimum_not_above_grid(self, near_edge, cosine_near_edge):
        for b in (near_edge, cosine_near_edge):
            f = difference_field(b, warn=False)
            assert f.d_min <= np.min(b.d)

    def test_single_dip_not_flagged(self, cosine_near_edge):
        with warnings.catch_warnings():
            warnings.simplefilter("error", MultipleMinimaWarning)
            f = difference_field(cosine_near_edge)
        assert not f.multiple_minima

    def test_peaked_near_edge_has_rival_dips(self, near_edge):
        # coupling 30 is not large enough for a single dominant dip at this distance from the edge
        assert difference_field(near_edge, warn=False).multiple_minima

    def test_peaked_dip_is_quadratic(self, near_edge):
        f = difference_field(near_edge, warn=False)
        h = np.array([1e-4, 2e-4, 4e-4])
        rise = f.evaluate(f.theta_c + h) - f.d_min
        # quadratic bottom: doubling the offset quadruples the rise
        assert rise[1] / rise[0] == pytest.approx(4, rel=0.05)
        assert rise[2] / rise[1] == pytest.approx(4, rel=0.05)

    def test_evaluator_matches_mesh(self, near_edge):
        f = difference_field(near_edge, warn=False)
        idx = np.arange(0, near_edge.thetas.size, 97)
        assert np.allclose(f.evaluate(near_edge.thetas[idx]), near_edge.d[idx], rtol=1e-8)


class TestGrowthRatio:
    @pytest.fixture(scope="class")
    @classmethod
    def field(cls, cosine_near_edge):
        return difference_field(cosine_near_edge, warn=False)

    def test_equal_indices(self, field):
        assert growth_ratio(field, 0.3, 4, 4) == 1.0

    def test_order_checked(self, field):
        with pytest.raises(ValueError):
            growth_ratio(field, 0.3, 2, 1)

    def test_constant_field_ratio_one(self, free_bundles):
        f = difference_field(free_bundles, warn=False)
        assert growth_ratio(f, 0.2, 0, 9) == pytest.approx(1.0, rel=1e-12)

    @given(st.floats(0, 1, exclude_max=True), st.integers(-20, 20), st.integers(0, 20), st.integers(0, 20))
    def test_telescoping(self, field, th, i, dj, dk):
        j, k = i + dj, i + dj + dk
        whole = growth_ratio(field, th, i, k)
        split = growth_ratio(field, th, i, j) * growth_ratio(field, th, j, k)
        assert whole == pytest.approx(split, rel=1e-10)

    @given(st.floats(0, 1, exclude_max=True), st.integers(1, 30))
    def test_direct_ratio_equals_step_products(self, field, th, k):
        fam = schrodinger_family(Potential.cosine(3.0), Frequency.golden_mean(), -3.38723)
        f = field
        pts = torus(th + np.arange(k) * fam.omega)
        product = float(np.prod(step_ratio(fam, pts)))
        assert growth_ratio(f, th, 0, k) == pytest.approx(product, rel=1e-10)


def test_slopes_at_matches_grid(peaked_family, peaked_bundles):
    r_u, r_s = slopes_at(peaked_family, peaked_bundles.thetas[:50])
    assert np.allclose(r_u, peaked_bundles.r_u[:50], rtol=1e-10)
    assert np.allclose(r_s, peaked_bundles.r_s[:50], rtol=1e-10)
