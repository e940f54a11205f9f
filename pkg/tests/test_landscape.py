import math

import numpy as np
import pytest
from pydantic import ValidationError

from core import landscape
from core.errors import DomainError
from models.landscape import MultiPoly, monomial_table
from models.sampling import Seed


def _poly(terms, **kw):
    return MultiPoly.from_terms(terms, **kw)


class TestPolynomials:
    def test_monomial_table_size(self):
        for n, d in [(1, 2), (2, 3), (3, 4), (4, 6)]:
            assert monomial_table(n, d).shape == (math.comb(n + d, d), n)

    def test_kostlan_weight_of_cross_term(self):
        exps = monomial_table(2, 2)
        var = landscape.kostlan_variances(exps, 2)
        row = [i for i, e in enumerate(exps.tolist()) if e == [1, 1]][0]
        assert var[row] == 2.0

    def test_exact_derivatives(self):
        p = _poly({(2, 1): 1.0, (0, 3): 3.0})
        x = np.array([[2.0, 1.0]])
        assert landscape.evaluate(p, x)[0] == pytest.approx(7.0)
        np.testing.assert_allclose(landscape.gradient(p, x)[0], [4.0, 13.0])
        np.testing.assert_allclose(landscape.hessian(p, x)[0], [[2.0, 4.0], [4.0, 18.0]])

    def test_table_shape_enforced(self):
        with pytest.raises(ValidationError):
            MultiPoly(n_vars=2, degree=2, exponents=monomial_table(2, 2), coeffs=np.zeros(3))

    @pytest.mark.parametrize("n,d", [(0, 2), (5, 2), (2, 1), (2, 7)])
    def test_desk_scale_only(self, n, d, seed):
        with pytest.raises(DomainError):
            landscape.sample_random_polynomial(n, d, seed)

    def test_random_quadratic_has_one_critical_point(self):
        for s in range(20):
            p = landscape.sample_random_polynomial(1, 2, Seed(value=s))
            assert landscape.sturm_root_count(p, -1e8, 1e8) == 1

    def test_random_cubic_has_at_most_two(self):
        for s in range(20):
            p = landscape.sample_random_polynomial(1, 3, Seed(value=s))
            assert landscape.sturm_root_count(p, -1e8, 1e8) <= 2

    def test_seeded(self, seed):
        a = landscape.sample_random_polynomial(3, 4, seed)
        b = landscape.sample_random_polynomial(3, 4, seed)
        np.testing.assert_array_equal(a.coeffs, b.coeffs)


class TestCriticalPoints:
    def test_parabola(self, seed):
        res = landscape.find_critical_points(_poly({(2,): 1.0}), starts=100, seed=seed)
        assert len(res.points) == 1
        pt = res.points[0]
        assert pt.location[0] == pytest.approx(0.0, abs=1e-12)
        assert pt.index == 0.0 and pt.is_minimum

    def test_cubic(self, seed):
        res = landscape.find_critical_points(_poly({(3,): 1.0, (1,): -3.0}), starts=200, seed=seed)
        assert [round(p.location[0], 8) for p in res.points] == [-1.0, 1.0]
        low, high = res.points
        assert low.index == 1.0
        assert high.index == 0.0
        assert len(res.minima) == 1

    def test_saddle(self, seed):
        res = landscape.find_critical_points(_poly({(2, 0): 1.0, (0, 2): -1.0}), starts=100, seed=seed)
        assert len(res.points) == 1
        assert res.points[0].index == 0.5
        assert not res.points[0].is_minimum

    def test_degenerate_flagged(self, seed):
        # x^2 in two variables: a line of critical points, Hessian diag(2, 0)
        res = landscape.find_critical_points(_poly({(2, 0): 1.0}), starts=100, seed=seed)
        assert res.points
        assert all(p.degenerate for p in res.points)
        assert res.minima == []

    def test_tolerance_and_dedup(self, seed):
        p = landscape.sample_random_polynomial(2, 5, seed)
        tol = 1e-9
        res = landscape.find_critical_points(p, tol=tol, seed=seed)
        assert res.points
        for pt in res.points:
            assert pt.gradient_norm <= tol
            assert np.linalg.norm(landscape.gradient(p, np.array([pt.location]))[0]) <= tol
        locs = np.array([pt.location for pt in res.points])
        for i in range(len(locs)):
            for j in range(i + 1, len(locs)):
                assert np.linalg.norm(locs[i] - locs[j]) >= 1e-6

    def test_rejects_bad_arguments(self, seed):
        p = _poly({(2,): 1.0})
        with pytest.raises(DomainError):
            landscape.find_critical_points(p, starts=10, seed=seed)
        with pytest.raises(DomainError):
            landscape.find_critical_points(p, starts=100, tol=1e-3, seed=seed)

    def test_matches_sturm_count(self):
        for s in range(100):
            degree = 2 + s % 5
            p = landscape.sample_random_polynomial(1, degree, Seed(value=1000 + s))
            found = landscape.find_critical_points(p, starts=2000, seed=Seed(value=s))
            assert len(found.points) == landscape.sturm_root_count(p, -5.0, 5.0), f"seed {s}, degree {degree}"


class TestCensus:
    def test_cubic_minima_fraction(self, seed):
        res = landscape.census(1, 3, 500, seed)
        assert res.minima_fraction == pytest.approx(0.5, abs=0.05)
        assert res.mean_critical_points <= 2.0
        assert res.bound_C == pytest.approx(2.0 * math.sqrt(2.0))
        assert res.within_bound

    def test_deterministic(self, seed):
        assert landscape.census(2, 3, 50, seed) == landscape.census(2, 3, 50, seed)

    def test_bound_compliance(self, seed):
        for n, d in [(1, 4), (2, 3), (2, 4)]:
            res = landscape.census(n, d, 50, seed)
            assert res.mean_critical_points <= res.bound_C + 2 * res.critical_stderr
            assert res.mean_minima <= res.mean_critical_points

    @pytest.mark.slow
    def test_minima_fraction_trend(self, seed):
        rows = [landscape.census(n, 4, 50, seed) for n in (1, 2, 3, 4)]
        for a, b in zip(rows, rows[1:]):
            slack = 2 * math.hypot(a.minima_fraction_stderr, b.minima_fraction_stderr)
            assert b.minima_fraction <= a.minima_fraction + slack

    def test_too_few_trials(self, seed):
        with pytest.raises(DomainError):
            landscape.census(1, 3, 10, seed)

    def test_minima_shape(self):
        assert landscape.log_minima_shape(1, 3) == pytest.approx(-math.log(3.0) / 4.0 + math.log(2.0))


class TestRelu:
    def test_degree_one(self):
        approx = landscape.relu_poly_approx(1)
        assert approx.sup_error == pytest.approx(0.25, abs=1e-12)
        np.testing.assert_allclose(approx.coefficients, [0.25, 0.5], atol=1e-12)

    def test_degree_two(self):
        assert landscape.relu_poly_approx(2).sup_error == pytest.approx(1.0 / 16.0, rel=1e-6)

    def test_error_decreases(self):
        errors = [landscape.relu_poly_approx(d).sup_error for d in (1, 2, 4, 8)]
        assert all(a > b for a, b in zip(errors, errors[1:]))

    def test_relu_error_is_half_abs_error(self):
        for d in (2, 4, 6):
            approx = landscape.relu_poly_approx(d)
            assert approx.sup_error == pytest.approx(approx.abs_error / 2.0, rel=1e-3)

    def test_power_basis_matches_evaluate(self):
        approx = landscape.relu_poly_approx(6)
        x = np.linspace(-1.0, 1.0, 101)
        np.testing.assert_allclose(np.polynomial.polynomial.polyval(x, approx.coefficients),
                                   approx.evaluate(x), atol=1e-10)

    def test_degree_zero_rejected(self):
        with pytest.raises(DomainError):
            landscape.relu_poly_approx(0)

    def test_max_identity_is_exact(self):
        grid = np.arange(-8, 9) / 4.0
        x, y = np.meshgrid(grid, grid)
        np.testing.assert_array_equal(landscape.max_via_relu(x, y), np.maximum(x, y))

    def test_max_ratio_form(self):
        assert landscape.max_via_relu_ratio(3.0, 1.0) == pytest.approx(3.0)
        assert landscape.max_via_relu_ratio(-2.0, 5.0) == pytest.approx(5.0)
        assert np.isnan(landscape.max_via_relu_ratio(1.0, 1.0))

    def test_max_with_polynomial_relu(self):
        approx = landscape.relu_poly_approx(8)
        x = np.linspace(-1.0, 1.0, 41)
        got = landscape.polynomial_max(x, -x, approx, scale=2.0)
        assert np.max(np.abs(got - np.abs(x))) <= 2.0 * approx.sup_error + 1e-12

    def test_polynomial_max_tightens_with_degree(self, rng):
        x, y = rng.uniform(-0.5, 0.5, 200), rng.uniform(-0.5, 0.5, 200)
        exact = landscape.max_via_relu(x, y)
        errors = [np.max(np.abs(landscape.polynomial_max(x, y, landscape.relu_poly_approx(d)) - exact))
                  for d in (2, 8)]
        assert errors[1] < errors[0]
        with pytest.raises(DomainError):
            landscape.polynomial_max(x, y, landscape.relu_poly_approx(2), scale=0.0)
