"""Scalar primitives: CDF/PDF evaluation, the mechanism delta, roots, quadrature.

Reference values marked "mpmath" were frozen from 50-digit evaluations and
are compared at tolerances the double-precision implementations must meet.
"""

import math

import numpy as np
import pytest

from fedamp.numerics import (
    AccuracyError,
    BracketError,
    DomainError,
    find_root_bracketed,
    gaussian_log_pdf,
    gaussian_mechanism_delta,
    gaussian_pdf,
    integrate_adaptive,
    std_normal_cdf,
)

PHI_AT_1 = 0.8413447460685429  # mpmath
PHI_AT_MINUS_20 = 2.7536241186062337e-89  # mpmath
INV_SQRT_2PI = 0.3989422804014327  # mpmath
TV_UNIT_SHIFT = 0.3829249225480262  # mpmath: delta at eps=0, sigma=1, C=1
DELTA_HALF_EPS = 0.23842170813487663  # mpmath: delta at eps=0.5, sigma=1, C=1
DELTA_SIGMA_100 = 2.9527154135473316e-4  # mpmath: delta at eps=0.015, sigma=100, C=1


class TestStdNormalCdf:
    def test_zero(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_reference_point(self):
        assert std_normal_cdf(1.0) == pytest.approx(PHI_AT_1, rel=1e-15)

    def test_far_tail_relative_accuracy(self):
        assert std_normal_cdf(-20.0) == pytest.approx(PHI_AT_MINUS_20, rel=1e-12)

    def test_symmetry(self):
        for x in np.linspace(-8.0, 8.0, 161):
            total = std_normal_cdf(float(x)) + std_normal_cdf(float(-x))
            assert total == pytest.approx(1.0, abs=1e-15)

    def test_monotone(self):
        grid = np.linspace(-12.0, 12.0, 401)
        values = [std_normal_cdf(float(x)) for x in grid]
        assert all(a <= b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(DomainError):
            std_normal_cdf(bad)


class TestGaussianPdf:
    def test_peak_value(self):
        assert gaussian_pdf(0.0, 0.0, 1.0) == pytest.approx(INV_SQRT_2PI, rel=1e-15)

    def test_scaling(self):
        assert gaussian_pdf(3.0, 3.0, 0.25) == pytest.approx(
            INV_SQRT_2PI / 0.25, rel=1e-15
        )

    def test_symmetry_about_mean(self):
        assert gaussian_pdf(1.7, 1.0, 2.0) == gaussian_pdf(0.3, 1.0, 2.0)

    def test_log_pdf_consistent(self):
        for z in (-4.0, 0.0, 2.5, 11.0):
            log_value = gaussian_log_pdf(z, 1.0, 2.0)
            assert math.exp(log_value) == pytest.approx(
                gaussian_pdf(z, 1.0, 2.0), rel=1e-12
            )

    def test_log_pdf_survives_underflow(self):
        # pdf underflows to exact zero out here; the log form must not.
        assert gaussian_pdf(40.0, 0.0, 1.0) == 0.0
        assert gaussian_log_pdf(40.0, 0.0, 1.0) == pytest.approx(
            -800.0 - math.log(math.sqrt(2 * math.pi)), rel=1e-12
        )

    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.nan])
    def test_bad_sigma_rejected(self, sigma):
        with pytest.raises(DomainError):
            gaussian_pdf(0.0, 0.0, sigma)


class TestGaussianMechanismDelta:
    def test_eps_zero_is_total_variation(self):
        assert gaussian_mechanism_delta(0.0, 1.0, 1.0) == pytest.approx(
            TV_UNIT_SHIFT, rel=1e-14
        )

    def test_reference_point(self):
        assert gaussian_mechanism_delta(0.5, 1.0, 1.0) == pytest.approx(
            DELTA_HALF_EPS, rel=1e-14
        )

    def test_large_sigma_small_eps(self):
        assert gaussian_mechanism_delta(0.015, 100.0, 1.0) == pytest.approx(
            DELTA_SIGMA_100, rel=1e-13
        )

    def test_matches_quadrature(self):
        eps, sigma, c = 0.5, 1.0, 1.0
        alpha = math.exp(eps)

        def integrand(z):
            num = np.exp(-0.5 * ((z - c) / sigma) ** 2)
            den = np.exp(-0.5 * (z / sigma) ** 2)
            return np.maximum(num - alpha * den, 0.0) / (sigma * math.sqrt(2 * math.pi))

        result = integrate_adaptive(integrand, -10.0, 11.0, abs_tol=1e-13)
        assert gaussian_mechanism_delta(eps, sigma, c) == pytest.approx(
            result.value, abs=1e-12
        )

    def test_monotone_in_eps_and_sigma(self):
        eps_grid = np.linspace(0.0, 3.0, 20)
        sigma_grid = np.geomspace(0.2, 20.0, 20)
        for sigma in sigma_grid:
            deltas = [gaussian_mechanism_delta(float(e), float(sigma), 1.0) for e in eps_grid]
            assert all(a >= b for a, b in zip(deltas, deltas[1:]))
        for eps in eps_grid:
            deltas = [gaussian_mechanism_delta(float(eps), float(s), 1.0) for s in sigma_grid]
            assert all(a >= b for a, b in zip(deltas, deltas[1:]))

    def test_bounds(self):
        assert 0.0 <= gaussian_mechanism_delta(12.0, 0.05, 1.0) <= 1.0
        assert gaussian_mechanism_delta(0.0, 0.01, 1.0) <= 1.0

    def test_domain_checks(self):
        with pytest.raises(DomainError):
            gaussian_mechanism_delta(-0.1, 1.0, 1.0)
        with pytest.raises(DomainError):
            gaussian_mechanism_delta(0.5, 0.0, 1.0)
        with pytest.raises(DomainError):
            gaussian_mechanism_delta(0.5, 1.0, -2.0)


class TestFindRootBracketed:
    def test_linear(self):
        result = find_root_bracketed(lambda x: 2.0 * x - 1.0, -4.0, 9.0)
        assert result.root == pytest.approx(0.5, abs=1e-12)
        assert abs(result.residual) <= 1e-12

    def test_cdf_offset(self):
        result = find_root_bracketed(lambda x: std_normal_cdf(x) - 0.5, -3.0, 5.0)
        assert result.root == pytest.approx(0.0, abs=1e-10)

    def test_bracket_contains_root(self):
        result = find_root_bracketed(lambda x: x**3 - 2.0, 0.0, 4.0, tol=1e-13)
        lo, hi = result.bracket
        assert lo <= result.root <= hi
        assert result.root == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-12)

    def test_endpoint_root_short_circuits(self):
        result = find_root_bracketed(lambda x: x, 0.0, 1.0)
        assert result.root == 0.0
        assert result.residual == 0.0

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)

    def test_bad_interval(self):
        with pytest.raises(DomainError):
            find_root_bracketed(lambda x: x, 2.0, 2.0)

    def test_non_finite_value_rejected(self):
        with pytest.raises(DomainError):
            find_root_bracketed(lambda x: math.nan, 0.0, 1.0)


class TestIntegrateAdaptive:
    def test_constant(self):
        result = integrate_adaptive(lambda z: 1.0, 0.0, 1.0)
        assert result.value == pytest.approx(1.0, abs=1e-15)
        assert result.evaluations > 0

    def test_gaussian_normalization(self):
        def pdf(z):
            return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

        result = integrate_adaptive(pdf, -8.0, 8.0, abs_tol=1e-13)
        expected = 1.0 - 2.0 * std_normal_cdf(-8.0)
        assert result.value == pytest.approx(expected, abs=1e-12)
        assert result.error_estimate <= 1e-13

    def test_kink_with_break_point(self):
        result = integrate_adaptive(
            lambda z: np.abs(z - 0.3), 0.0, 1.0, abs_tol=1e-14, break_points=[0.3]
        )
        assert result.value == pytest.approx(0.5 * 0.3**2 + 0.5 * 0.7**2, abs=1e-13)

    def test_break_points_outside_range_ignored(self):
        result = integrate_adaptive(
            lambda z: 1.0, 0.0, 1.0, break_points=[-5.0, 0.5, 7.0]
        )
        assert result.value == pytest.approx(1.0, abs=1e-14)

    def test_accuracy_error_when_budget_too_small(self):
        with pytest.raises(AccuracyError):
            integrate_adaptive(
                lambda z: np.sin(1000.0 * z), 0.0, 1.0, abs_tol=1e-16, max_evals=200
            )

    def test_bad_interval(self):
        with pytest.raises(DomainError):
            integrate_adaptive(lambda z: 1.0, 1.0, 0.0)

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            integrate_adaptive(lambda z: 1.0, 0.0, 1.0, abs_tol=0.0)
