import math

import numpy as np
import pytest

from oulab.budget import Budget
from oulab.engine import (
    OUSystem,
    apply_generator,
    conjugated_generator_check,
    drift_apply,
    euler_maruyama_paths,
    gauss_hermite_nodes,
    invariant_measure,
    limit_class_check,
    ou_apply,
    ou_field,
    simulate_paths,
    smooth_delta,
    strong_feller_check,
    transition_law,
)
from oulab.errors import CapabilityError, DomainError
from oulab.fields import (
    cosine_field,
    gaussian_bump,
    linear_field,
    quadratic_field,
)
from oulab.linalg import van_loan_qt
from oulab.measures import GaussianMeasure

ROTATION = OUSystem(np.array([[0.0, -1.0], [1.0, 0.0]]), np.eye(2))
STABLE1 = OUSystem(np.array([[-1.0]]), np.array([[1.0]]))
STABLE2 = OUSystem(np.array([[-1.0, 0.4], [-0.3, -2.0]]),
                   np.array([[1.0, 0.0], [0.2, 0.8]]))


def char_identity(sys, t, v, x):
    # E cos<S x + Y, v> = cos<S x, v> exp(-v' Q_t v / 2)
    S = sys.flow(t)
    Qt = van_loan_qt(sys.A, sys.noise_cov, t)
    return math.cos(float(S @ x @ v)) * math.exp(-0.5 * float(v @ Qt @ v))


class TestLaws:
    def test_rotation_transition(self):
        law = transition_law(ROTATION, 1.3, np.array([1.0, 0.0]))
        assert np.allclose(law.cov, 1.3 * np.eye(2), atol=1e-12)
        assert abs(np.linalg.norm(law.mean) - 1.0) < 1e-12

    def test_invariant_measure_scalar(self):
        assert abs(invariant_measure(STABLE1).cov[0, 0] - 0.5) < 1e-12

    def test_simulate_matches_covariance(self):
        X = simulate_paths(STABLE2, 1.0, np.zeros(2),
                           np.random.default_rng(0), 100_000)
        Qt = van_loan_qt(STABLE2.A, STABLE2.noise_cov, 1.0)
        assert np.linalg.norm(np.cov(X.T) - Qt, 2) < 0.05 * np.linalg.norm(Qt, 2)

    def test_euler_maruyama_cross_check(self):
        rng = np.random.default_rng(1)
        X = euler_maruyama_paths(STABLE1, 1.0, np.array([2.0]), rng, 50_000)
        exact_mean = 2.0 * math.exp(-1.0)
        assert abs(X.mean() - exact_mean) < 0.02


class TestQuadrature:
    def test_dimension_cap(self):
        with pytest.raises(CapabilityError):
            gauss_hermite_nodes(np.eye(5))

    def test_weights_are_probabilities(self):
        _, W = gauss_hermite_nodes(np.diag([1.0, 3.0]))
        assert abs(W.sum() - 1.0) < 1e-12

    def test_degenerate_support(self):
        pts, W = gauss_hermite_nodes(np.diag([1.0, 0.0]))
        assert np.abs(pts[:, 1]).max() < 1e-12


class TestOuApply:
    @pytest.mark.parametrize("sys_", [ROTATION, STABLE2])
    def test_characteristic_identity_quadrature(self, sys_):
        v = np.array([0.3, -0.7])
        x = np.array([1.0, 2.0])
        f = cosine_field(v)
        est = ou_apply(sys_, 0.9, f, x)
        assert abs(est.value - char_identity(sys_, 0.9, v, x)) < 1e-10

    def test_monte_carlo_agrees(self):
        v = np.array([0.3, -0.7])
        x = np.array([1.0, 2.0])
        f = cosine_field(v)
        est = ou_apply(STABLE2, 0.9, f, x, method="monte-carlo",
                       rng=np.random.default_rng(2),
                       budget=Budget(max_evals=200_000,
                                     target_std_error=1e-3))
        assert abs(est.value - char_identity(STABLE2, 0.9, v, x)) \
            <= 3.0 * est.std_error

    def test_drift_apply_is_composition(self):
        f = quadratic_field(np.eye(2))
        g = drift_apply(ROTATION, math.pi, f)
        x = np.array([1.0, 2.0])
        assert abs(g(x) - f(-x)) < 1e-12

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            ou_apply(STABLE1, -1.0, cosine_field([1.0]), np.zeros(1))


class TestSemigroupLaws:
    def test_chapman_kolmogorov(self):
        # P(t+s) f = P(t) P(s) f via nested quadrature on probe points
        f = cosine_field(np.array([0.5, -0.2]))
        t, s = 0.6, 0.3
        inner = ou_field(STABLE2, s, f)
        for x in (np.zeros(2), np.array([1.0, -1.0]), np.array([-2.0, 0.5])):
            lhs = ou_apply(STABLE2, t + s, f, x).value
            rhs = ou_apply(STABLE2, t, inner, x).value
            assert abs(lhs - rhs) < 1e-8

    def test_invariance_of_invariant_measure(self):
        # int P(t) f dmu_inf = int f dmu_inf for polynomials and cosine
        mu = invariant_measure(STABLE2)
        pts, W = gauss_hermite_nodes(mu.cov)
        fields = [
            linear_field(np.array([1.0, -2.0])),
            quadratic_field(np.array([[1.0, 0.3], [0.3, 2.0]])),
            cosine_field(np.array([0.7, 0.4])),
        ]
        # degree-4 polynomial
        fields.append(type(fields[0])(
            fn=lambda x: np.squeeze(
                (np.atleast_2d(x) ** 2).sum(axis=-1) ** 2)[()]))
        for f in fields:
            direct = np.dot(W, np.asarray(f.fn(pts)))
            pf = ou_field(STABLE2, 0.8, f)
            through = np.dot(W, np.asarray(pf.fn(pts)))
            assert abs(direct - through) <= 1e-5


class TestGenerator:
    def test_quadratic_closed_form(self):
        # L(x^2) = q + 2 a x^2 for the scalar system
        f = quadratic_field(np.array([[1.0]]))
        val = apply_generator(STABLE1, f, np.array([2.0]))
        assert abs(val - (1.0 - 2.0 * 4.0)) < 1e-10

    def test_fd_fallback_matches_oracles(self):
        from oulab.fields import ScalarField

        f = cosine_field(np.array([0.4, -0.9]))
        bare = ScalarField(fn=f.fn)
        x = np.array([0.3, 1.1])
        assert abs(apply_generator(STABLE2, f, x)
                   - apply_generator(STABLE2, bare, x)) < 1e-5

    @pytest.mark.parametrize("seed", [41, 42, 43, 44, 45])
    def test_conjugation_identity(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((2, 2))
        A = M - (np.linalg.eigvals(M).real.max() + 1.0) * np.eye(2)
        B = np.eye(2) + 0.2 * rng.standard_normal((2, 2))
        sys_ = OUSystem(A, B)
        f = gaussian_bump(rng.standard_normal(2), width=1.2)
        probes = rng.standard_normal((6, 2))
        assert conjugated_generator_check(sys_, f, probes) <= 1e-5


class TestSmoothingAndLimits:
    def test_smooth_delta_bound(self):
        # || R(t) f_d - f_d ||_inf <= 2 t / delta, checked at probes
        f = cosine_field(np.array([1.0, 0.0]))
        delta = 0.5
        fd = smooth_delta(ROTATION, f, delta, semigroup="R")
        t = 0.05
        shifted = drift_apply(ROTATION, t, fd)
        for x in np.random.default_rng(3).standard_normal((10, 2)):
            assert abs(shifted(x) - fd(x)) <= 2.0 * t / delta + 1e-9

    def test_limit_class_defects_shrink(self):
        f = cosine_field(np.array([1.0, -0.5]))
        out = limit_class_check(ROTATION, 0.7, f, n_values=(1, 4, 16),
                                rng=np.random.default_rng(4))
        defects = [d for _, d, _ in out]
        bounds = [b for _, _, b in out]
        assert defects[0] > defects[-1]
        assert all(d <= b + 1e-9 for d, b in zip(defects, bounds))


class TestStrongFeller:
    def test_full_noise_yes(self):
        verdict, _ = strong_feller_check(STABLE2, 0.5)
        assert verdict

    def test_hypoelliptic_yes(self):
        sys_ = OUSystem(np.array([[0.0, 0.0], [1.0, 0.0]]),
                        np.array([[1.0], [0.0]]))
        verdict, _ = strong_feller_check(sys_, 0.5)
        assert verdict

    def test_no_noise_no(self):
        sys_ = OUSystem(np.array([[-1.0, 0.0], [0.0, -1.0]]),
                        np.zeros((2, 2)))
        verdict, margin = strong_feller_check(sys_, 0.5)
        assert not verdict and margin > 0.1
