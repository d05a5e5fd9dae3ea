"""Gauge potentials, Wilson loops, crossing location, and curvature."""

import numpy as np
import pytest

from ciscat import (DegenerateCIError, GaugeSingularityError, LoopPath,
                    QuadratureError, UnresolvedCandidateWarning,
                    abelian_field, curvature_check, find_cis, linear_jt,
                    loop_integral, nonabelian_gauge, projected_gauge,
                    scalar_correction, two_ci, u_c, u_d, u_general,
                    wilson_loop, wilson_sign_predicted)


def crossing_pair_gauge(x, y, x0=3.0):
    """Closed form of the two-crossing gauge potential (independent route):
    h = x (x0 - x), g = y gives
    A_x = y (2x - x0) / (2 (y^2 + x^2 (x0-x)^2)),
    A_y = x (x0 - x) / (2 (y^2 + x^2 (x0-x)^2)).
    """
    denom = 2.0 * (y**2 + (x * (x0 - x)) ** 2)
    return y * (2.0 * x - x0) / denom, x * (x0 - x) / denom


class TestLoopPath:
    def test_circle_points_close(self):
        loop = LoopPath.circle((1.0, -2.0), 0.75)
        x, y = loop.points(16)
        assert len(x) == 17
        assert x[0] == pytest.approx(x[-1], abs=1e-15)
        assert y[0] == pytest.approx(y[-1], abs=1e-15)

    def test_open_parametrization_rejected(self):
        with pytest.raises(QuadratureError, match="not closed"):
            LoopPath(lambda t: (np.asarray(t), np.asarray(t) ** 2))

    def test_arc_is_open(self):
        arc = LoopPath.arc((0.0, 0.0), 1.0, -3.0, 3.0)
        assert not arc.closed
        with pytest.raises(QuadratureError, match="closed"):
            loop_integral(lambda x, y: (0.0 * x, 0.0 * y), arc)

    def test_polyline_needs_three_vertices(self):
        with pytest.raises(QuadratureError):
            LoopPath.polyline([(0.0, 0.0), (1.0, 0.0)])

    def test_invalid_circle_radius(self):
        with pytest.raises(QuadratureError):
            LoopPath.circle((0.0, 0.0), 0.0)

    def test_clearance_guard(self):
        loop = LoopPath.circle((0.0, 0.0), 1.0)
        assert loop.clearance([(0.0, 0.0)]) == pytest.approx(1.0, rel=1e-6)
        with pytest.raises(GaugeSingularityError):
            loop.require_clear_of([(1.0, 0.0)])


class TestProjectedGauge:
    def test_crossing_at_origin_unit_point(self):
        a_x, a_y = projected_gauge(lambda x, y: x, lambda x, y: y, 1.0, 0.0)
        assert (a_x, a_y) == pytest.approx((0.0, 0.5), abs=1e-9)

    def test_azimuthal_form(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            x, y = rng.uniform(-3.0, 3.0, 2)
            rho2 = x * x + y * y
            if rho2 < 0.01:
                continue
            a_x, a_y = projected_gauge(lambda x, y: x, lambda x, y: y, x, y)
            assert a_x == pytest.approx(-y / (2.0 * rho2), abs=1e-8)
            assert a_y == pytest.approx(x / (2.0 * rho2), abs=1e-8)
            assert np.hypot(a_x, a_y) == pytest.approx(
                1.0 / (2.0 * np.sqrt(rho2)), rel=1e-7)

    def test_two_crossing_closed_form_at_random_points(self):
        model = two_ci(x0=3.0)
        rng = np.random.default_rng(22)
        checked = 0
        while checked < 100:
            x, y = rng.uniform(-2.0, 5.0, 2)
            if min(np.hypot(x, y), np.hypot(x - 3.0, y)) < 0.2:
                continue
            ex, ey = crossing_pair_gauge(x, y)
            # analytic-gradient route
            a_x, a_y = projected_gauge(model.h, model.c, x, y,
                                       grad_h=model.grad_h,
                                       grad_g=model.grad_g)
            assert a_x == pytest.approx(ex, abs=1e-12)
            assert a_y == pytest.approx(ey, abs=1e-12)
            # finite-difference route agrees independently
            f_x, f_y = projected_gauge(model.h, model.c, x, y)
            assert f_x == pytest.approx(ex, abs=1e-6)
            assert f_y == pytest.approx(ey, abs=1e-6)
            checked += 1

    def test_singular_at_crossing(self):
        with pytest.raises(GaugeSingularityError):
            projected_gauge(lambda x, y: x, lambda x, y: y, 0.0, 0.0)


class TestNonabelianGauge:
    def test_single_valued_frame_matches_closed_form(self):
        rng = np.random.default_rng(23)
        u_func = lambda x, y: u_c(np.arctan2(y, x))
        for _ in range(20):
            x, y = rng.uniform(-4.0, 4.0, 2)
            rho2 = x * x + y * y
            if rho2 < 0.25:
                continue
            gx, gy = -y / rho2, x / rho2  # grad phi
            a_x, a_y = nonabelian_gauge(u_func, x, y)
            assert complex(a_x[0, 0]) == pytest.approx(-0.5 * gx, abs=1e-6)
            assert complex(a_y[0, 0]) == pytest.approx(-0.5 * gy, abs=1e-6)
            assert complex(a_x[1, 1]) == pytest.approx(+0.5 * gx, abs=1e-6)
            assert complex(a_y[1, 1]) == pytest.approx(+0.5 * gy, abs=1e-6)
            off = np.hypot(abs(complex(a_x[0, 1])), abs(complex(a_y[0, 1])))
            assert off == pytest.approx(1.0 / (2.0 * np.sqrt(rho2)),
                                        rel=1e-5)

    def test_twisted_frame_diagonal_vanishes(self):
        rng = np.random.default_rng(24)
        u_func = lambda x, y: u_d(np.arctan2(y, x))
        for _ in range(20):
            x, y = rng.uniform(-4.0, 4.0, 2)
            if x * x + y * y < 0.25:
                continue
            a_x, a_y = nonabelian_gauge(u_func, x, y)
            for m in (a_x, a_y):
                assert abs(complex(m[0, 0])) < 1e-6
                assert abs(complex(m[1, 1])) < 1e-6

    def test_identity_frame_gives_zero(self):
        def u_func(x, y):
            out = np.zeros((2, 2) + np.shape(x), dtype=np.complex128)
            out[0, 0] = 1.0
            out[1, 1] = 1.0
            return out

        a_x, a_y = nonabelian_gauge(u_func, 0.7, -0.3)
        assert np.abs(a_x).max() < 1e-12
        assert np.abs(a_y).max() < 1e-12

    def test_ground_diagonal_matches_projected_gauge(self):
        # i U^dag dU from the general frame, ground-ground entry, equals the
        # closed-form projected potential for the same (h, g)
        def h(x, y):
            return x * (3.0 - x)

        def g(x, y):
            return y

        u_func = lambda x, y: u_general(h(x, y), g(x, y))
        rng = np.random.default_rng(25)
        checked = 0
        while checked < 100:
            x, y = rng.uniform(-2.0, 5.0, 2)
            if min(np.hypot(x, y), np.hypot(x - 3.0, y)) < 0.3:
                continue
            a_x, a_y = nonabelian_gauge(u_func, x, y)
            p_x, p_y = projected_gauge(h, g, x, y)
            assert complex(a_x[1, 1]) == pytest.approx(p_x, abs=1e-6)
            assert complex(a_y[1, 1]) == pytest.approx(p_y, abs=1e-6)
            checked += 1


class TestScalarCorrection:
    def test_single_valued_frame_inverse_square(self):
        u_func = lambda x, y: u_c(np.arctan2(y, x))
        v1 = scalar_correction(u_func, 1.0, 0.0)
        v2 = scalar_correction(u_func, 2.0, 0.0)
        assert v1 / v2 == pytest.approx(4.0, rel=1e-6)
        # closed form: |A_12|^2 summed over components = 1/(4 rho^2)
        assert v1 == pytest.approx(0.25, rel=1e-8)

    def test_twisted_frame_angular_shape(self):
        u_func = lambda x, y: u_d(np.arctan2(y, x))
        rho = 1.7
        v0 = scalar_correction(u_func, rho, 0.0)          # phi = 0
        v90 = scalar_correction(u_func, 0.0, rho)         # phi = pi/2
        assert v90 / v0 == pytest.approx(2.0, rel=1e-6)   # 1 + sin^2(phi)
        phi = 0.7
        v = scalar_correction(u_func, rho * np.cos(phi), rho * np.sin(phi))
        assert v == pytest.approx((1.0 + np.sin(phi) ** 2) / (4.0 * rho**2),
                                  rel=1e-6)

    def test_identity_frame_is_zero(self):
        def u_func(x, y):
            out = np.zeros((2, 2) + np.shape(x), dtype=np.complex128)
            out[0, 0] = 1.0
            out[1, 1] = 1.0
            return out

        assert scalar_correction(u_func, 0.4, 0.9) == pytest.approx(0.0,
                                                                    abs=1e-12)


class TestWilsonLoop:
    def field_for(self, model):
        return abelian_field(model.h, model.c, grad_h=model.grad_h,
                             grad_g=model.grad_g)

    def test_one_crossing_gives_minus_one(self):
        a_func = self.field_for(two_ci(x0=3.0))
        value = wilson_loop(a_func, LoopPath.circle((0.0, 0.0), 1.0))
        assert value.real == pytest.approx(-1.0, abs=1e-6)
        assert value.imag == pytest.approx(0.0, abs=1e-6)

    def test_both_crossings_give_plus_one(self):
        a_func = self.field_for(two_ci(x0=3.0))
        value = wilson_loop(a_func, LoopPath.circle((0.0, 0.0), 5.0))
        assert value.real == pytest.approx(1.0, abs=1e-6)
        assert value.imag == pytest.approx(0.0, abs=1e-6)

    def test_empty_loop_gives_plus_one(self):
        a_func = self.field_for(linear_jt())
        value = wilson_loop(a_func, LoopPath.circle((5.0, 5.0), 1.0))
        assert abs(value - 1.0) < 1e-8

    def test_deformation_invariance(self):
        a_func = self.field_for(two_ci(x0=3.0))
        circle = wilson_loop(a_func, LoopPath.circle((0.0, 0.0), 1.0))
        square = wilson_loop(a_func, LoopPath.polyline(
            [(1.2, -1.2), (1.2, 1.2), (-1.2, 1.2), (-1.2, -1.2)]))
        assert abs(circle - square) < 1e-6

    def test_unit_modulus(self):
        a_func = self.field_for(linear_jt())
        value = wilson_loop(a_func, LoopPath.circle((0.3, -0.2), 2.0))
        assert abs(abs(value) - 1.0) < 1e-12

    def test_nonconvergent_integrand_raises(self):
        calls = {"n": 0}

        def noisy(x, y):
            calls["n"] += 1
            return -y * calls["n"], x * calls["n"]

        with pytest.raises(QuadratureError, match="converge"):
            loop_integral(noisy, LoopPath.circle((0.0, 0.0), 1.0),
                          cap=2**12)


class TestWilsonSignPredicted:
    def test_single_linear_crossing(self):
        model = linear_jt()
        assert wilson_sign_predicted(model.h, model.c, [(0.0, 0.0)],
                                     grad_h=model.grad_h,
                                     grad_g=model.grad_g) == -1

    def test_crossing_pair(self):
        model = two_ci(x0=3.0)
        sign = wilson_sign_predicted(model.h, model.c,
                                     [(0.0, 0.0), (3.0, 0.0)],
                                     grad_h=model.grad_h,
                                     grad_g=model.grad_g)
        assert sign == 1

    def test_empty_enclosure(self):
        model = linear_jt()
        assert wilson_sign_predicted(model.h, model.c, []) == 1

    def test_degenerate_crossing_rejected(self):
        # h = x^2 has vanishing gradient at the crossing: the linearized
        # orientation determinant is zero there
        with pytest.raises(DegenerateCIError):
            wilson_sign_predicted(lambda x, y: x * x, lambda x, y: y,
                                  [(0.0, 0.0)])


class TestFindCIs:
    def test_single_crossing(self):
        model = linear_jt()
        roots = find_cis(model.h, model.c, ((-2.0, 2.0), (-2.0, 2.0)),
                         grad_h=model.grad_h, grad_g=model.grad_g)
        assert len(roots) == 1
        assert roots[0] == pytest.approx((0.0, 0.0), abs=1e-10)

    def test_two_crossings(self):
        model = two_ci(x0=3.0)
        roots = find_cis(model.h, model.c, ((-1.0, 4.0), (-2.0, 2.0)),
                         grad_h=model.grad_h, grad_g=model.grad_g)
        assert len(roots) == 2
        assert roots[0] == pytest.approx((0.0, 0.0), abs=1e-10)
        assert roots[1] == pytest.approx((3.0, 0.0), abs=1e-10)

    def test_no_crossing_in_region(self):
        roots = find_cis(lambda x, y: x, lambda x, y: y - 10.0,
                         ((-2.0, 2.0), (-2.0, 2.0)))
        assert roots == []

    def test_unresolvable_candidate_warns(self):
        # h and g nearly coincide: sign-change cells exist but the Newton
        # Jacobian is near-singular, so refinement cannot land on a root
        def h(x, y):
            return x

        def g(x, y):
            return x - 1e-3 * (1.0 + y * y)

        with pytest.warns(UnresolvedCandidateWarning):
            roots = find_cis(h, g, ((-0.5, 0.5), (-0.5, 0.5)),
                             grid_resolution=16)
        assert roots == []


class TestCurvature:
    def test_two_crossing_field_is_flat_away_from_crossings(self):
        model = two_ci(x0=3.0)
        a_func = abelian_field(model.h, model.c, grad_h=model.grad_h,
                               grad_g=model.grad_g)
        worst = curvature_check(a_func, ((-2.0, 5.0), (-2.0, 2.0)),
                                exclude=[(0.0, 0.0), (3.0, 0.0)],
                                exclusion_radius=0.5)
        assert worst < 1e-6

    def test_constant_field_has_zero_curl(self):
        a_func = lambda x, y: (0.3 * np.ones_like(x), -0.1 * np.ones_like(x))
        assert curvature_check(a_func, ((-1.0, 1.0), (-1.0, 1.0))) < 1e-12

    def test_uniform_curvature_oracle(self):
        a_func = lambda x, y: (-0.5 * y, 0.5 * x)
        worst = curvature_check(a_func, ((-1.0, 1.0), (-1.0, 1.0)))
        assert worst == pytest.approx(1.0, rel=1e-9)
