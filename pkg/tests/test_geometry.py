import math

import numpy as np
import pytest
from pydantic import ValidationError

from core import geometry
from core.errors import DomainError
from models.geometry import CountingState, DilationQuery, ShapeSpec


class TestShellProbability:
    def test_whole_interval_is_shell(self):
        assert geometry.shell_probability_closed_form(1, 1.0) == 1.0

    def test_disk_annulus(self):
        assert geometry.shell_probability_closed_form(2, 0.5) == pytest.approx(0.75, rel=1e-15)

    def test_high_dimension(self):
        expected = 1.0 - 0.99**1000
        assert geometry.shell_probability_closed_form(1000, 0.01) == pytest.approx(expected, rel=1e-12)
        assert geometry.shell_probability_closed_form(1000, 0.01) == pytest.approx(0.999957, abs=1e-6)

    def test_tiny_alpha_keeps_precision(self):
        # 1 - (1 - 1e-12)^10 ~ 1e-11; naive evaluation loses most digits
        p = geometry.shell_probability_closed_form(10, 1e-12)
        assert p == pytest.approx(1e-11, rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5, math.nan])
    def test_rejects_alpha_out_of_range(self, alpha):
        with pytest.raises(DomainError):
            geometry.shell_probability_closed_form(3, alpha)

    @pytest.mark.parametrize("n", [0, -1, 2.5, True])
    def test_rejects_bad_dimension(self, n):
        with pytest.raises(DomainError):
            geometry.shell_probability_closed_form(n, 0.5)

    def test_monotone_in_alpha_and_n(self):
        alphas = [0.001, 0.01, 0.1, 0.5, 0.9]
        for n in (1, 5, 50):
            vals = [geometry.shell_probability_closed_form(n, a) for a in alphas]
            assert all(a < b for a, b in zip(vals, vals[1:]))
        by_n = [geometry.shell_probability_closed_form(n, 0.05) for n in (1, 2, 10, 100)]
        assert all(a < b for a, b in zip(by_n, by_n[1:]))


class TestSurfaceDistance:
    @pytest.mark.parametrize("n,R,expected", [(1, 1.0, 0.5), (3, 2.0, 0.5), (10**6, 1.0, 1.0 / (10**6 + 1))])
    def test_closed_form(self, n, R, expected):
        assert geometry.expected_surface_distance_closed_form(n, R) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("R", [0.0, -1.0, math.inf])
    def test_rejects_bad_radius(self, R):
        with pytest.raises(DomainError):
            geometry.expected_surface_distance_closed_form(3, R)

    def test_decreasing_in_n(self):
        vals = [geometry.expected_surface_distance_closed_form(n, 1.0) for n in (1, 2, 4, 8, 16)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestRelativeShell:
    def test_beta_equal_radius(self):
        assert geometry.relative_shell_probability(5, 1.0, 1.0) == 1.0

    def test_matches_shell_probability(self):
        assert geometry.relative_shell_probability(2, 0.5, 1.0) == pytest.approx(0.75)
        assert geometry.relative_shell_probability(1, 0.25, 1.0) == pytest.approx(0.25)

    @pytest.mark.parametrize("beta", [0.0, -0.5, 1.01])
    def test_rejects_beta(self, beta):
        with pytest.raises(DomainError):
            geometry.relative_shell_probability(3, beta, 1.0)


class TestDilation:
    def test_interval(self):
        res = geometry.dilation_volume_ratio(1, DilationQuery(alpha=1.0))
        assert res.ratio == pytest.approx(2.0)
        assert not res.saturated

    def test_converges_to_e(self):
        res = geometry.dilation_volume_ratio(10**7, DilationQuery(alpha=1.0, mode="inverse_n"))
        assert res.ratio == pytest.approx(math.e, rel=1e-6)

    def test_disk_proportional(self):
        res = geometry.dilation_volume_ratio(2, DilationQuery(alpha=1.0, mode="proportional"))
        assert res.ratio == pytest.approx(4.0)

    def test_dash_alias(self):
        assert DilationQuery(alpha=1.0, mode="inverse-n").mode == "inverse_n"

    def test_proportional_saturates(self):
        res = geometry.dilation_volume_ratio(10**4, DilationQuery(alpha=1.0, mode="proportional"))
        assert res.saturated
        assert res.ratio == math.inf
        assert res.log_ratio == pytest.approx(10**4 * math.log(2.0))

    def test_inverse_n_increasing_and_bounded(self):
        alpha = 2.0
        vals = [geometry.dilation_volume_ratio(n, DilationQuery(alpha=alpha)).ratio for n in (1, 10, 100, 1000)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < math.exp(alpha)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValidationError):
            DilationQuery(alpha=0.0)


class TestShapes:
    def test_radius_of(self):
        assert geometry.radius_of(ShapeSpec.ball(7, 3.0)) == 3.0
        assert geometry.radius_of(ShapeSpec.box([3.0, 4.0])) == pytest.approx(5.0)
        assert geometry.radius_of(ShapeSpec.ellipsoid([1.0, 2.0, 5.0])) == 5.0

    def test_shape_validation(self):
        with pytest.raises(ValidationError):
            ShapeSpec(kind="ball", dim=2)
        with pytest.raises(ValidationError):
            ShapeSpec(kind="box", dim=3, half_widths=(1.0, 1.0))
        with pytest.raises(ValidationError):
            ShapeSpec.box([1.0, -1.0])
        with pytest.raises(ValidationError):
            ShapeSpec(kind="ball", dim=2, radius=1.0, colour="red")

    def test_equal_volume_ball_of_square(self):
        square = ShapeSpec.cube(2, math.sqrt(math.pi) / 2.0)
        ball = geometry.equal_volume_ball(square)
        assert ball.radius == pytest.approx(1.0, rel=1e-12)
        assert geometry.log_volume(ball) == pytest.approx(geometry.log_volume(square), rel=1e-12)

    def test_log_volume_unit_ball(self):
        assert math.exp(geometry.log_volume(ShapeSpec.ball(3, 1.0))) == pytest.approx(4.0 / 3.0 * math.pi)

    def test_kbit_cube(self):
        cube = geometry.kbit_cube(4, bits=8)
        assert cube.half_widths == (127.5,) * 4

    def test_box_exact_oracles(self):
        square = ShapeSpec.cube(2, math.sqrt(math.pi) / 2.0)
        assert geometry.box_expected_surface_distance_exact(square) == pytest.approx(math.sqrt(math.pi) / 6.0, rel=1e-12)
        cube = ShapeSpec.cube(10, 1.0)
        s = 0.1 * math.sqrt(10.0)
        assert geometry.box_shell_probability_exact(cube, 0.1) == pytest.approx(1.0 - (1.0 - s) ** 10, rel=1e-12)

    def test_box_shell_beats_isoperimetric_bound(self):
        cube = ShapeSpec.cube(10, 1.0)
        assert geometry.box_shell_probability_exact(cube, 0.1) >= geometry.isoperimetric_shell_bound(cube, 0.1)


class TestDistanceToSurface:
    def test_ball_interior(self):
        assert geometry.distance_to_surface(ShapeSpec.ball(2, 1.0), [0.6, 0.0]) == pytest.approx(0.4)

    def test_box_interior(self):
        assert geometry.distance_to_surface(ShapeSpec.box([1.0, 1.0]), [0.2, -0.7]) == pytest.approx(0.3)

    def test_outside(self):
        assert geometry.distance_to_surface(ShapeSpec.ball(2, 1.0), [1.5, 0.0]) is None

    def test_boundary_tolerance(self):
        ball = ShapeSpec.ball(2, 1.0)
        assert geometry.distance_to_surface(ball, [1.0 + 5e-10, 0.0]) == 0.0
        assert geometry.distance_to_surface(ball, [1.0 + 1e-6, 0.0]) is None

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            geometry.distance_to_surface(ShapeSpec.ball(3, 1.0), [0.1, 0.2])

    def test_ball_equals_radius_minus_norm(self, rng):
        ball = ShapeSpec.ball(5, 2.0)
        pts = rng.uniform(-0.8, 0.8, size=(200, 5))
        d = geometry.distance_to_surface_batch(ball, pts)
        np.testing.assert_allclose(d, 2.0 - np.linalg.norm(pts, axis=1), rtol=0, atol=1e-15)

    def test_ellipsoid_with_equal_axes_is_ball(self):
        assert geometry.distance_to_surface(ShapeSpec.ellipsoid([1.0, 1.0, 1.0]), [0.3, 0.4, 0.0]) == pytest.approx(0.5, abs=1e-10)

    def test_ellipsoid_centre_and_rim(self):
        ell = ShapeSpec.ellipsoid([2.0, 1.0])
        assert geometry.distance_to_surface(ell, [0.0, 0.0]) == pytest.approx(1.0, abs=1e-10)
        assert geometry.distance_to_surface(ell, [0.5, 0.0]) == pytest.approx(math.sqrt(33.0) / 6.0, abs=1e-10)
        assert geometry.distance_to_surface(ell, [1.5, 0.0]) == pytest.approx(0.5, abs=1e-10)

    def test_ellipsoid_against_dense_boundary(self, rng):
        ell = ShapeSpec.ellipsoid([2.0, 0.5])
        t = np.linspace(0.0, 2.0 * math.pi, 200_001)
        boundary = np.stack([2.0 * np.cos(t), 0.5 * np.sin(t)], axis=1)
        pts = rng.uniform(-1.0, 1.0, size=(20, 2)) * [1.2, 0.3]
        d = geometry.distance_to_surface_batch(ell, pts)
        for p, dist in zip(pts, d):
            brute = np.min(np.linalg.norm(boundary - p, axis=1))
            assert dist == pytest.approx(brute, abs=1e-6)
            assert dist <= brute + 1e-9

    def test_ellipsoid_outside(self):
        assert geometry.distance_to_surface(ShapeSpec.ellipsoid([2.0, 1.0]), [0.0, 1.2]) is None

    def test_membership(self):
        box = ShapeSpec.box([1.0, 2.0])
        inside = geometry.membership(box, np.array([[0.5, 1.5], [1.5, 0.0]]))
        assert inside.tolist() == [True, False]


class TestCounting:
    def test_single_step(self):
        state = CountingState(k=2, t=1)
        after = geometry.advance_counting(state, 1)
        assert after.log_fraction == pytest.approx(-math.log(2.0))
        assert after.n == 4

    def test_fraction_decreases_by_n_log_ratio(self):
        state = CountingState(n=16)
        after = geometry.advance_counting(state)
        k, t = 256**3, 256**3 - 1
        assert state.log_fraction - after.log_fraction == pytest.approx(16 * math.log(k / t), rel=1e-9)
        assert after.log_fraction < state.log_fraction

    def test_composition(self):
        state = CountingState(k=10, t=7)
        thrice = geometry.advance_counting(state, 3)
        once = state
        for _ in range(3):
            once = geometry.advance_counting(once)
        assert thrice == once

    def test_rejects_t_not_below_k(self):
        with pytest.raises(ValidationError):
            CountingState(k=4, t=4)

    def test_invariant_preserved(self):
        state = geometry.advance_counting(CountingState(k=5, t=3), 6)
        assert state.log_c <= state.log_u
