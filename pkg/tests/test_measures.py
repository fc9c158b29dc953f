import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from oulab.budget import Budget
from oulab.errors import DegenerateCovarianceError, DimensionMismatchError
from oulab.measures import (
    GaussianMeasure,
    cameron_martin_contains,
    density,
    fh_classify,
    hellinger_affinity,
    pushforward,
    sample,
    tv_distance,
)


def gm(mean, cov):
    return GaussianMeasure(np.asarray(mean, dtype=float),
                           np.asarray(cov, dtype=float))


STD1 = gm([0.0], [[1.0]])


class TestBasics:
    def test_density_normalizes(self):
        xs = np.linspace(-10, 10, 20001)
        vals = density(STD1, xs[:, None])
        assert abs(np.trapezoid(vals, xs) - 1.0) < 1e-10

    def test_density_degenerate_rejected(self):
        with pytest.raises(DegenerateCovarianceError):
            density(gm([0, 0], np.diag([1.0, 0.0])), np.zeros(2))

    def test_sample_covariance(self):
        m = gm([1.0, -2.0], np.diag([1.0, 4.0]))
        X = sample(m, np.random.default_rng(0), 100_000)
        S = np.cov(X.T)
        assert np.linalg.norm(S - m.cov, 2) < 0.05 * np.linalg.norm(m.cov, 2)

    def test_pushforward(self):
        m = gm([1.0, 0.0], np.eye(2))
        T = np.array([[2.0, 0.0]])
        out = pushforward(m, T)
        assert out.mean[0] == 2.0
        assert out.cov[0, 0] == 4.0

    def test_pushforward_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            pushforward(STD1, np.ones((2, 3)))


class TestFeldmanHajek:
    def test_nondegenerate_always_equivalent(self):
        assert fh_classify(gm([0, 0], np.eye(2)),
                           gm([5, -3], 7 * np.eye(2))) == "equivalent"

    def test_rank_mismatch_singular(self):
        assert fh_classify(gm([0, 0], np.eye(2)),
                           gm([0, 0], np.diag([1.0, 0.0]))) == "singular"

    def test_mean_shift_off_support_singular(self):
        m1 = gm([0, 0], np.diag([1.0, 0.0]))
        m2 = gm([0, 1.0], np.diag([1.0, 0.0]))
        assert fh_classify(m1, m2) == "singular"

    def test_shift_along_support_equivalent(self):
        m1 = gm([0, 0], np.diag([1.0, 0.0]))
        m2 = gm([3.0, 0], np.diag([2.0, 0.0]))
        assert fh_classify(m1, m2) == "equivalent"


class TestCameronMartin:
    def test_full_rank_norm(self):
        res = cameron_martin_contains(gm([0, 0], np.diag([4.0, 1.0])),
                                      np.array([2.0, 0.0]))
        assert res.contained and abs(res.norm - 1.0) < 1e-12

    def test_off_range_rejected(self):
        res = cameron_martin_contains(gm([0, 0], np.diag([1.0, 0.0])),
                                      np.array([0.0, 1.0]))
        assert not res.contained and res.norm is None


class TestHellinger:
    def test_unit_shift_closed_form(self):
        # same unit covariance, mean shift 1: rho = exp(-1/8)
        rho = hellinger_affinity(STD1, gm([1.0], [[1.0]]))
        assert abs(rho - math.exp(-1.0 / 8.0)) < 1e-12

    def test_identical_measures(self):
        m = gm([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
        assert abs(hellinger_affinity(m, m) - 1.0) < 1e-12

    def test_singular_pair_zero(self):
        assert hellinger_affinity(gm([0, 0], np.eye(2)),
                                  gm([0, 0], np.diag([1.0, 0.0]))) == 0.0


class TestTVClosedForms:
    def test_equal_means_equal_covs(self):
        m = gm([0.5], [[2.0]])
        assert tv_distance(m, m).value == 0.0

    def test_equal_cov_formula(self):
        # TV = 2 (2 Phi(delta/2) - 1) with delta the whitened mean shift
        m1 = gm([0.0, 0.0], np.eye(2))
        m2 = gm([1.0, 1.0], np.eye(2))
        expected = 2.0 * (2.0 * norm.cdf(math.sqrt(2.0) / 2.0) - 1.0)
        est = tv_distance(m1, m2)
        assert est.method == "equal-cov"
        assert abs(est.value - expected) < 1e-12

    def test_isotropic_radial_half(self):
        # N(0, 2 pi I_2) vs N(0, 4 pi I_2) has TV exactly 1/2
        m1 = gm([0, 0], 2 * math.pi * np.eye(2))
        m2 = gm([0, 0], 4 * math.pi * np.eye(2))
        est = tv_distance(m1, m2)
        assert est.method == "isotropic-radial"
        assert abs(est.value - 0.5) < 1e-12

    def test_singular_pair_is_two(self):
        est = tv_distance(gm([0, 0], np.eye(2)),
                          gm([0, 0], np.diag([1.0, 0.0])))
        assert est.value == 2.0
        assert est.std_error == 0.0

    def test_1d_distinct_variances(self):
        m1 = gm([0.0], [[1.0]])
        m2 = gm([0.5], [[3.0]])
        closed = tv_distance(m1, m2)
        assert closed.method == "closed-form-1d"
        mc = tv_distance(m1, m2, rng=np.random.default_rng(0),
                         method="monte-carlo",
                         budget=Budget(max_evals=200_000,
                                       target_std_error=2e-3))
        assert abs(mc.value - closed.value) <= 3.0 * mc.std_error


class TestTVCrossMethod:
    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_quadrature_matches_monte_carlo_2d(self, seed):
        rng = np.random.default_rng(seed)
        L1 = rng.standard_normal((2, 2))
        L2 = rng.standard_normal((2, 2))
        m1 = gm(rng.standard_normal(2), L1 @ L1.T + 0.3 * np.eye(2))
        m2 = gm(rng.standard_normal(2), L2 @ L2.T + 0.3 * np.eye(2))
        quad = tv_distance(m1, m2, method="quadrature")
        mc = tv_distance(m1, m2, rng=rng, method="monte-carlo",
                         budget=Budget(max_evals=200_000,
                                       target_std_error=2e-3))
        assert abs(quad.value - mc.value) <= 3.0 * mc.std_error + 1e-6

    def test_hellinger_bracket(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            L1 = rng.standard_normal((2, 2))
            L2 = rng.standard_normal((2, 2))
            m1 = gm(rng.standard_normal(2), L1 @ L1.T + 0.2 * np.eye(2))
            m2 = gm(rng.standard_normal(2), L2 @ L2.T + 0.2 * np.eye(2))
            rho = hellinger_affinity(m1, m2)
            tv = tv_distance(m1, m2, method="quadrature").value
            assert 2.0 * (1.0 - rho) <= tv + 1e-9
            assert tv <= 2.0 * math.sqrt(1.0 - rho * rho) + 1e-9


class TestTVMetricAxioms:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=20, deadline=None)
    def test_axioms_1d(self, seed):
        rng = np.random.default_rng(seed)
        ms = [gm([rng.uniform(-2, 2)], [[rng.uniform(0.2, 3.0)]])
              for _ in range(3)]
        d = lambda a, b: tv_distance(a, b).value
        # identity, symmetry, triangle, range
        for m in ms:
            assert d(m, m) == 0.0
        d01, d10 = d(ms[0], ms[1]), d(ms[1], ms[0])
        assert abs(d01 - d10) < 1e-10
        assert d(ms[0], ms[2]) <= d01 + d(ms[1], ms[2]) + 1e-10
        assert 0.0 <= d01 <= 2.0

    def test_fh_tv_consistency(self):
        # singular implies TV = 2; equivalent implies TV < 2
        rng = np.random.default_rng(31)
        for _ in range(5):
            L = rng.standard_normal((2, 2))
            m1 = gm(rng.standard_normal(2), L @ L.T + 0.2 * np.eye(2))
            m2 = gm(rng.standard_normal(2),
                    np.diag([rng.uniform(0.5, 2.0), 0.0]))
            assert fh_classify(m1, m2) == "singular"
            assert tv_distance(m1, m2).value == 2.0
            assert fh_classify(m1, m1) == "equivalent"
            assert tv_distance(m1, pushforward(m1, np.eye(2))).value < 2.0
