from __future__ import annotations

import math

import numpy as np
import pytest

from tiltprice.errors import ValidationError
from tiltprice.montecarlo import difference, log_mean_exp, weighted_mean

from oracles import bootstrap_se


class TestWeightedMean:
    def test_constant_values(self):
        est = weighted_mean([3.25] * 5, [0.1, 2.0, 7.0, 0.5, 1.0])
        assert est.value == 3.25
        assert est.std_error == 0.0

    def test_two_point(self):
        assert weighted_mean([0.0, 1.0], [1.0, 1.0]).value == 0.5

    def test_hand_arithmetic(self):
        # (1*1 + 2*2 + 1*3)/4
        assert weighted_mean([1.0, 2.0, 3.0], [1.0, 2.0, 1.0]).value == 2.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            weighted_mean([1.0, 2.0], [1.0])

    def test_nonpositive_weight(self):
        with pytest.raises(ValidationError):
            weighted_mean([1.0, 2.0], [1.0, 0.0])

    def test_too_short(self):
        with pytest.raises(ValidationError):
            weighted_mean([1.0], [1.0])

    @pytest.mark.parametrize("factor", [0.25, 0.5, 2.0, 64.0])
    def test_rescaling_weights_power_of_two_exact(self, factor):
        rng = np.random.default_rng(5)
        v = rng.normal(size=500)
        w = rng.lognormal(size=500)
        a = weighted_mean(v, w)
        b = weighted_mean(v, factor * w)
        assert a.value == b.value
        assert a.std_error == b.std_error

    def test_rescaling_weights_general_constant(self):
        # scaling by a non-power-of-two perturbs each weight at the ulp level
        rng = np.random.default_rng(6)
        v = rng.normal(size=500)
        w = rng.lognormal(size=500)
        a = weighted_mean(v, w).value
        b = weighted_mean(v, 3.7 * w).value
        assert a == pytest.approx(b, rel=1e-13)

    def test_se_scales_with_sqrt_n(self):
        rng = np.random.default_rng(11)
        v = rng.lognormal(size=40_000)
        w = rng.lognormal(size=40_000)
        se_big = weighted_mean(v, w).std_error
        se_small = weighted_mean(v[:10_000], w[:10_000]).std_error
        assert se_small / se_big == pytest.approx(2.0, rel=0.2)

    def test_se_matches_bootstrap(self):
        rng = np.random.default_rng(3)
        v = rng.lognormal(size=100_000)
        w = rng.lognormal(sigma=0.5, size=100_000)
        est = weighted_mean(v, w)
        boot = bootstrap_se(v, w, n_boot=300, seed=17)
        assert est.std_error == pytest.approx(boot, rel=0.2)


class TestLogMeanExp:
    def test_all_zero(self):
        assert log_mean_exp([0.0, 0.0], [1.0, 1.0]).value == 0.0

    def test_log2(self):
        est = log_mean_exp([0.0, math.log(3.0)], [1.0, 1.0])
        assert est.value == pytest.approx(math.log(2.0), abs=1e-14)

    def test_huge_exponents_no_overflow(self):
        assert log_mean_exp([1000.0, 1000.0]).value == 1000.0

    def test_empty(self):
        with pytest.raises(ValidationError):
            log_mean_exp([])

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        e = rng.normal(size=1000)
        w = rng.lognormal(size=1000)
        base = log_mean_exp(e, w).value
        for c in (-700.0, -3.5, 0.1, 250.0):
            shifted = log_mean_exp(e + c, w).value
            assert shifted == pytest.approx(base + c, abs=1e-12)

    def test_weights_must_be_positive(self):
        with pytest.raises(ValidationError):
            log_mean_exp([0.0, 1.0], [1.0, -1.0])


class TestDifference:
    def test_joint_se_beats_independent_on_shared_sample(self):
        # two nearly identical estimators on the same draws: the difference
        # is almost deterministic, which only the influence-based SE can see
        rng = np.random.default_rng(8)
        e = rng.normal(size=50_000)
        a = log_mean_exp(e)
        b = log_mean_exp(1.001 * e)
        est = difference(a, b)
        assert est.value == pytest.approx(a.value - b.value)
        assert est.std_error < 0.05 * math.hypot(a.std_error, b.std_error)

    def test_fallback_without_influence(self):
        from tiltprice.montecarlo import Estimate

        a = Estimate(1.0, 0.3, 100)
        b = Estimate(0.25, 0.4, 100)
        est = difference(a, b)
        assert est.value == 0.75
        assert est.std_error == pytest.approx(0.5)

    def test_influence_reproduces_std_error(self):
        rng = np.random.default_rng(9)
        v = rng.normal(size=2000)
        w = rng.lognormal(size=2000)
        est = weighted_mean(v, w)
        se = np.std(est.influence, ddof=1) / math.sqrt(est.n)
        assert est.std_error == pytest.approx(se)
