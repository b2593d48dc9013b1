from __future__ import annotations

import math

import numpy as np
import pytest

from tiltprice.errors import InvalidUtilityError, TableRangeError, ValidationError
from tiltprice.utility import (
    UtilitySpec,
    check_membership,
    conjugate_exp,
    eval_utility,
    marginal_utility,
    risk_aversion,
)


def exp_spec(alpha=1.0):
    return UtilitySpec(family="exponential", alpha=alpha)


def perturbed_spec(alpha=1.0, K=0.1):
    return UtilitySpec(family="perturbed-exponential", alpha=alpha, K=K)


def perturbed_raw(alpha, K):
    """The closed form written out independently of the implementation."""
    return lambda x: -math.exp(-alpha * (x + K * math.sin(x))) / (alpha * (1.0 + K))


def tabulated_from(fn, lo=-20.0, hi=10.0, n=3001):
    grid = np.linspace(lo, hi, n)
    return UtilitySpec(family="tabulated", table=(grid, np.asarray([fn(x) for x in grid])))


class TestEvalUtility:
    def test_exponential_at_zero(self):
        assert eval_utility(exp_spec(1.0), 0.0) == -1.0

    def test_exponential_alpha2_at_zero(self):
        assert eval_utility(exp_spec(2.0), 0.0) == -0.5

    def test_perturbed_at_zero(self):
        assert eval_utility(perturbed_spec(), 0.0) == pytest.approx(-1.0 / 1.1, abs=1e-12)

    def test_tabulated_out_of_range(self):
        spec = tabulated_from(perturbed_raw(1.0, 0.1))
        with pytest.raises(TableRangeError):
            eval_utility(spec, 11.0)

    def test_vectorized(self):
        out = eval_utility(exp_spec(1.0), np.array([0.0, 1.0]))
        assert out.shape == (2,)


class TestRiskAversion:
    def test_exponential_constant(self):
        spec = exp_spec(1.5)
        for x in (-30.0, 0.0, 4.2):
            assert risk_aversion(spec, x) == 1.5

    def test_exponential_deep_negative(self):
        assert risk_aversion(exp_spec(2.0), -10.0) == 2.0

    def test_perturbed_at_zero(self):
        # alpha*(1+K) at x = 0 because the sin correction vanishes there
        assert risk_aversion(perturbed_spec(1.0, 0.1), 0.0) == pytest.approx(1.1, abs=1e-12)

    @pytest.mark.parametrize("x", [-7.3, -1.0, 0.0, 0.6, 3.14, 9.9])
    def test_perturbed_matches_central_differences(self, x):
        alpha, K = 1.0, 0.1
        u = perturbed_raw(alpha, K)
        d1 = (u(x + 1e-5) - u(x - 1e-5)) / 2e-5
        # wider step for the second difference: at 1e-5 its cancellation
        # noise (~eps/h^2) already exceeds the 1e-6 comparison tolerance
        h = 1e-4
        d2 = (u(x + h) - 2 * u(x) + u(x - h)) / h**2
        assert risk_aversion(perturbed_spec(alpha, K), x) == pytest.approx(-d2 / d1, rel=1e-6)

    def test_tabulated_tracks_true_rate(self):
        spec = tabulated_from(perturbed_raw(1.0, 0.1), lo=-10, hi=5, n=6001)
        truth = risk_aversion(perturbed_spec(1.0, 0.1), -2.0)
        assert risk_aversion(spec, -2.0) == pytest.approx(truth, rel=1e-3)

    def test_non_concave_table_rejected(self):
        grid = np.linspace(-2.0, 2.0, 50)
        convex = np.exp(grid) - 10.0  # increasing but convex
        spec = UtilitySpec(family="tabulated", table=(grid, convex))
        with pytest.raises(InvalidUtilityError):
            risk_aversion(spec, 0.0)


class TestConjugate:
    def test_examples(self):
        assert conjugate_exp(1.0, 1.0) == -1.0
        assert conjugate_exp(2.0, 1.0) == -0.5
        assert conjugate_exp(1.0, math.e) == pytest.approx(0.0, abs=1e-15)

    def test_continuous_extension_at_zero(self):
        assert conjugate_exp(1.0, 0.0) == 0.0

    def test_negative_domain_error(self):
        with pytest.raises(ValidationError):
            conjugate_exp(1.0, -0.1)

    def test_fenchel_inequality_and_equality(self):
        alpha = 1.3
        xs = np.linspace(-10.0, 10.0, 41)
        ys = np.linspace(1e-3, 10.0, 40)
        u = eval_utility(exp_spec(alpha), xs)
        for y in ys:
            assert np.all(u <= conjugate_exp(alpha, y) + xs * y + 1e-12)
        # equality at y = U'(x), relative to the cancelling magnitudes
        for x in xs:
            y_star = marginal_utility(exp_spec(alpha), x)
            u_val = eval_utility(exp_spec(alpha), x)
            gap = conjugate_exp(alpha, y_star) + x * y_star - u_val
            assert abs(gap) <= 1e-10 * max(1.0, abs(u_val))


class TestSpecValidation:
    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            UtilitySpec(family="quadratic", alpha=1.0)

    def test_alpha_required_positive(self):
        with pytest.raises(ValidationError):
            UtilitySpec(family="exponential", alpha=0.0)

    def test_perturbation_cap(self):
        with pytest.raises(ValidationError):
            perturbed_spec(1.0, 0.25)
        with pytest.raises(ValidationError):
            perturbed_spec(1.0, 0.0)

    def test_table_grid_must_increase(self):
        with pytest.raises(ValidationError):
            UtilitySpec(family="tabulated",
                        table=(np.array([0.0, 0.0, 1.0, 2.0]), np.zeros(4)))


class TestMembership:
    def test_exponential_report(self):
        report = check_membership(exp_spec(1.0), np.linspace(-60, 20, 4001))
        assert report.passed
        assert report.u_prime0 == pytest.approx(1.0, abs=1e-12)
        assert report.ra_min == report.ra_max == 1.0
        assert report.k_u == 1.0
        assert report.decay_point == pytest.approx(1.0, abs=1e-12)
        assert report.decay_slope == pytest.approx(1.0, abs=1e-12)

    def test_perturbed_report(self):
        report = check_membership(perturbed_spec(1.0, 0.1), np.linspace(-1000, 20, 8001))
        assert report.passed
        assert 0.9 <= report.decay_point <= 1.1
        assert 0.8 <= report.ra_min and report.ra_max <= 1.2
        assert report.k_u > 1.0

    def test_convex_table_flags_concavity(self):
        grid = np.linspace(-2.0, 2.0, 200)
        spec = UtilitySpec(family="tabulated", table=(grid, np.exp(grid) - 10.0))
        report = check_membership(spec, grid[1:-1])
        assert not report.concave
        assert not report.passed

    def test_grid_depth_enforced_for_analytic(self):
        with pytest.raises(ValidationError):
            check_membership(exp_spec(1.0), np.linspace(-10, 10, 100))

    def test_decay_estimate_converges_with_depth(self):
        spec = perturbed_spec(1.0, 0.1)
        errs = []
        for k in (2, 3, 4):
            x = -10.0 ** k
            est = -math.log(-eval_utility(spec, x)) / x
            errs.append(abs(est - 1.0))
        assert errs[0] > errs[1] > errs[2]


class TestClassProperties:
    @pytest.mark.parametrize("spec", [exp_spec(0.7), perturbed_spec(1.0, 0.1)])
    def test_increasing_negative_vanishing(self, spec):
        grid = np.linspace(-40.0, 60.0, 2000)
        u = eval_utility(spec, grid)
        assert np.all(np.diff(u) > 0.0)
        assert np.all(u < 0.0)
        tail = eval_utility(spec, np.array([20.0, 40.0, 60.0]))
        assert np.all(np.diff(np.abs(tail)) < 0.0)

    def test_tabulated_membership_of_true_member(self):
        spec = tabulated_from(perturbed_raw(1.0, 0.1), lo=-60.0, hi=10.0, n=14001)
        report = check_membership(spec, np.linspace(-59.9, 9.9, 1001))
        assert report.passed
        assert report.decay_point == pytest.approx(1.0, abs=0.05)
