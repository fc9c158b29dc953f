import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oulab.errors import (
    DimensionMismatchError,
    DomainError,
    RangeCapError,
    StabilityError,
    SymmetryError,
)
from oulab.linalg import (
    expm,
    hurwitz_eigenvalues,
    lyapunov_solve,
    onenorm_estimate,
    onenorm_exact,
    psd_sqrt,
    require_psd,
    require_symmetric,
    van_loan_qt,
)

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def qt_oracle(A, Q, t):
    # independent covariance-integral oracle by adaptive quadrature
    integrand = lambda s: expm(A, s) @ Q @ expm(A, s).T
    val, _ = integrate.quad_vec(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-13)
    return val


class TestExpm:
    def test_half_turn(self):
        assert np.allclose(expm(ROT, math.pi), -np.eye(2), atol=1e-12)

    def test_negative_time_inverse(self):
        A = np.array([[-1.0, 2.0], [0.0, -3.0]])
        assert np.allclose(expm(A, 0.7) @ expm(A, -0.7), np.eye(2), atol=1e-12)

    def test_norm_cap(self):
        with pytest.raises(RangeCapError):
            expm(np.eye(2) * 1e30, 1e30)

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionMismatchError):
            expm(np.ones((2, 3)))


class TestValidation:
    def test_symmetry_rejected(self):
        with pytest.raises(SymmetryError):
            require_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_symmetrizes_roundoff(self):
        X = np.array([[1.0, 0.5 + 1e-15], [0.5, 1.0]])
        out = require_symmetric(X)
        assert np.allclose(out, out.T)

    def test_psd_rejects_negative(self):
        with pytest.raises(SymmetryError):
            require_psd(np.diag([1.0, -1.0]))

    def test_psd_accepts_tiny_negative(self):
        require_psd(np.diag([1.0, -1e-12]))


class TestHurwitz:
    def test_stable_ok(self):
        w = hurwitz_eigenvalues(-np.eye(2))
        assert np.allclose(sorted(w.real), [-1, -1])

    def test_offender_named(self):
        A = np.diag([-1.0, 0.5])
        with pytest.raises(StabilityError) as err:
            hurwitz_eigenvalues(A)
        assert "0.5" in str(err.value)

    def test_rotation_rejected(self):
        with pytest.raises(StabilityError):
            hurwitz_eigenvalues(ROT)


class TestLyapunov:
    def test_scalar(self):
        X = lyapunov_solve(np.array([[-1.0]]), np.array([[1.0]]))
        assert abs(X[0, 0] - 0.5) < 1e-12

    def test_residual_zero(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((4, 4))
        A = M - (np.linalg.eigvals(M).real.max() + 1.0) * np.eye(4)
        C = np.eye(4)
        X = lyapunov_solve(A, C)
        assert np.linalg.norm(A @ X + X @ A.T + C) < 1e-10

    def test_requires_hurwitz(self):
        with pytest.raises(StabilityError):
            lyapunov_solve(np.eye(2), np.eye(2))


class TestVanLoan:
    def test_rotation_identity_noise(self):
        # isometric flow + identity noise integrates to t * I
        for t in (0.1, 1.0, 2.0 * math.pi):
            Qt = van_loan_qt(ROT, np.eye(2), t)
            assert np.abs(Qt - t * np.eye(2)).max() < 1e-10

    def test_scalar_closed_form(self):
        Qt = van_loan_qt(np.array([[-1.0]]), np.array([[1.0]]), 1.0)
        assert abs(Qt[0, 0] - (1 - math.exp(-2)) / 2) < 1e-12

    def test_against_quadrature_oracle(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((3, 3))
        B = rng.standard_normal((3, 3))
        Q = B @ B.T
        for t in (0.3, 1.7):
            assert np.abs(van_loan_qt(A, Q, t) - qt_oracle(A, Q, t)).max() < 1e-9

    def test_lyapunov_limit(self):
        rng = np.random.default_rng(2)
        M = rng.standard_normal((3, 3))
        decay = np.linalg.eigvals(M).real.max() + 0.5
        A = M - decay * np.eye(3)
        Q = np.eye(3)
        Qinf = lyapunov_solve(A, Q)
        rate = abs(np.linalg.eigvals(A).real.max())
        t_mix = 40.0 / rate
        errs = [np.linalg.norm(van_loan_qt(A, Q, t) - Qinf)
                for t in (t_mix / 4, t_mix / 2, t_mix)]
        assert errs[0] >= errs[1] >= errs[2]
        assert errs[2] <= 1e-8

    def test_psd_monotone_in_t(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((3, 3)) - 2 * np.eye(3)
        Q = np.eye(3)
        prev = np.zeros((3, 3))
        for t in (0.2, 0.5, 1.0, 3.0):
            Qt = van_loan_qt(A, Q, t)
            assert np.linalg.eigvalsh(Qt - prev).min() >= -1e-10
            prev = Qt

    def test_zero_time(self):
        assert np.all(van_loan_qt(ROT, np.eye(2), 0.0) == 0)

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            van_loan_qt(ROT, np.eye(2), -1.0)


class TestPsdSqrt:
    def test_roundtrip(self):
        rng = np.random.default_rng(4)
        M = rng.standard_normal((5, 5))
        X = M @ M.T
        C = psd_sqrt(X)
        assert np.allclose(C @ C, X, atol=1e-10)
        assert np.allclose(C, C.T)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_roundtrip_property(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((3, 3))
        X = M @ M.T
        C = psd_sqrt(X)
        assert np.abs(C @ C - X).max() < 1e-9 * max(1.0, np.abs(X).max())


class TestOnenorm:
    def test_exact_column_sum(self):
        M = np.array([[1.0, -7.0], [2.0, 0.0]])
        assert onenorm_exact(M) == 7.0

    def test_estimator_exact_on_diagonal(self):
        D = np.diag([1.0, -7.0, 2.0])
        est = onenorm_estimate(lambda x: D @ x, lambda x: D.T @ x, 3)
        assert est == 7.0

    def test_estimator_lower_bound_and_close(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            M = rng.standard_normal((20, 20))
            exact = onenorm_exact(M)
            est = onenorm_estimate(lambda x: M @ x, lambda x: M.T @ x, 20,
                                   rng=rng)
            assert est <= exact + 1e-12
            assert est >= 0.5 * exact

    def test_complex_operator(self):
        rng = np.random.default_rng(6)
        M = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        exact = onenorm_exact(M)
        est = onenorm_estimate(lambda x: M @ x,
                               lambda x: M.conj().T @ x, 8, rng=rng)
        assert est <= exact + 1e-12
        assert est >= 0.5 * exact
