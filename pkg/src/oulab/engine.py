"""The Ornstein-Uhlenbeck system and its semigroups.

Transition laws, invariant measure, exact path sampling of the mild
solution, evaluation of the OU semigroup and the drift semigroup on
scalar fields, generator application, the conjugated-generator identity,
time-average smoothing, the scaling-isometry limit-class check, and the
strong Feller test.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate

from .budget import DEFAULT_BUDGET
from .errors import (
    CapabilityError,
    DegenerateCovarianceError,
    DimensionMismatchError,
    DomainError,
)
from .fields import ScalarField, fd_gradient, fd_hessian
from .linalg import expm, hurwitz_eigenvalues, lyapunov_solve, psd_sqrt, van_loan_qt
from .measures import GaussianMeasure, sample as gm_sample

GH_NODES = 32
QUADRATURE_MAX_DIM = 4


@dataclass(frozen=True)
class OUSystem:
    """The pair (A, B): linear drift and noise map of dU = AU dt + B dW."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatchError(
                f"B has {B.shape[0]} rows, expected {A.shape[0]}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def noise_cov(self):
        """Q = B B^T."""
        return self.B @ self.B.T

    def flow(self, t):
        """S(t) = e^{tA}."""
        return expm(self.A, t)


def transition_law(sys, t, x):
    """The law of U(t, x): N(S(t) x, Q_t)."""
    t = float(t)
    if t < 0:
        raise DomainError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    return GaussianMeasure(sys.flow(t) @ x, van_loan_qt(sys.A, sys.noise_cov, t))


def invariant_measure(sys):
    """N(0, Q_inf) with Q_inf the Lyapunov solution; requires Hurwitz A."""
    Qinf = lyapunov_solve(sys.A, sys.noise_cov)
    return GaussianMeasure(np.zeros(sys.dim), Qinf)


def simulate_paths(sys, t, x, rng, n):
    """n i.i.d. samples of the mild solution endpoint U(t, x).

    Sampling is exact (a single Gaussian draw from N(S(t)x, Q_t)); the
    SDE is linear, so no time discretization is introduced.
    """
    law = transition_law(sys, t, x)
    return gm_sample(law, rng, n)


def euler_maruyama_paths(sys, t, x, rng, n, steps=512):
    """Euler-Maruyama endpoints; cross-check only, carries O(dt) bias."""
    if steps < 1:
        raise DomainError("steps must be positive")
    dt = float(t) / steps
    m = sys.B.shape[1]
    X = np.tile(np.asarray(x, dtype=float), (n, 1))
    for _ in range(steps):
        dW = rng.standard_normal((n, m)) * math.sqrt(dt)
        X = X + X @ sys.A.T * dt + dW @ sys.B.T
    return X


def drift_apply(sys, t, f):
    """R(t)f = f(S(t) .), composed lazily."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    S = sys.flow(t)

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        vals = f.fn(xb @ S.T)
        return vals if np.ndim(x) > 1 else np.squeeze(vals)[()]

    grad = None
    hess = None
    if f.grad is not None:
        grad = lambda x: S.T @ np.asarray(f.grad(S @ np.asarray(x, dtype=float)))
    if f.hess is not None:
        hess = lambda x: S.T @ np.asarray(f.hess(S @ np.asarray(x, dtype=float))) @ S
    modulus = None
    if f.modulus is not None:
        op = float(np.linalg.norm(S, 2))
        modulus = lambda r: f.modulus(op * r)
    return ScalarField(fn=fn, grad=grad, hess=hess, modulus=modulus)


def _support_factor(cov):
    """Rank-revealing factor: columns span the support, C C^T = cov."""
    w, V = np.linalg.eigh(cov)
    thresh = 1e-10 * max(1.0, float(w.max(initial=0.0)))
    keep = w > thresh
    return V[:, keep] * np.sqrt(w[keep])


def gauss_hermite_nodes(cov, nodes=GH_NODES):
    """Points and probability weights integrating f against N(0, cov).

    The covariance may be degenerate; integration runs over the support
    subspace only.  Returns (points (M, d), weights (M,)).
    """
    C = _support_factor(cov)
    k = C.shape[1]
    if k == 0:
        return np.zeros((1, cov.shape[0])), np.ones(1)
    if k > QUADRATURE_MAX_DIM:
        raise CapabilityError(
            f"tensor quadrature limited to {QUADRATURE_MAX_DIM} effective "
            f"dimensions (got {k}); use the monte-carlo method"
        )
    g, w = hermgauss(nodes)
    grids = np.meshgrid(*([g] * k), indexing="ij")
    Z = np.stack([G.ravel() for G in grids], axis=-1)  # (nodes^k, k)
    Wgrids = np.meshgrid(*([w] * k), indexing="ij")
    W = np.prod(np.stack([G.ravel() for G in Wgrids], axis=-1), axis=-1)
    pts = math.sqrt(2.0) * Z @ C.T
    return pts, W / math.pi ** (k / 2.0)


@dataclass(frozen=True)
class Estimate:
    value: complex
    std_error: float
    method: str
    converged: bool = True


def ou_apply(sys, t, f, x, method="quadrature", budget=None, rng=None,
             nodes=GH_NODES):
    """P(t)f(x) = E f(S(t)x + Y), Y ~ N(0, Q_t).

    Quadrature whitens Q_t and uses tensor Gauss-Hermite on the support
    subspace (effective dimension <= 4); Monte Carlo reports a standard
    error and respects the budget.
    """
    t = float(t)
    if t < 0:
        raise DomainError("t must be nonnegative")
    budget = DEFAULT_BUDGET if budget is None else budget
    x = np.asarray(x, dtype=float)
    mean = sys.flow(t) @ x
    Qt = van_loan_qt(sys.A, sys.noise_cov, t)
    if method == "quadrature":
        pts, W = gauss_hermite_nodes(Qt, nodes=nodes)
        vals = np.asarray(f.fn(mean + pts))
        return Estimate(complex(np.dot(W, vals)).real
                        if not np.iscomplexobj(vals)
                        else complex(np.dot(W, vals)),
                        0.0, "quadrature")
    if method == "monte-carlo":
        rng = np.random.default_rng(0) if rng is None else rng
        law = GaussianMeasure(mean, Qt)
        n = 0
        tot = 0.0
        tot2 = 0.0
        batch = 8192
        while n < budget.max_evals:
            k = min(batch, budget.max_evals - n)
            ys = gm_sample(law, rng, k)
            v = np.asarray(f.fn(ys))
            tot += v.sum()
            tot2 += (np.abs(v) ** 2).sum()
            n += k
            mu = tot / n
            var = max(tot2 / n - abs(mu) ** 2, 0.0)
            se = math.sqrt(var / n)
            if n >= 4096 and se <= budget.target_std_error:
                return Estimate(mu, se, "monte-carlo")
        return Estimate(mu, se, "monte-carlo", converged=False)
    raise ValueError(f"unknown method {method!r}")


def ou_field(sys, t, f, nodes=GH_NODES):
    """P(t)f as a lazily evaluated field (quadrature per point)."""
    Qt = van_loan_qt(sys.A, sys.noise_cov, t)
    S = sys.flow(t)
    pts, W = gauss_hermite_nodes(Qt, nodes=nodes)

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.array([np.dot(W, np.asarray(f.fn(xi @ S.T + pts)))
                        for xi in xb])
        return out if np.ndim(x) > 1 else np.squeeze(out)[()]

    return ScalarField(fn=fn)


def apply_generator(sys, f, x, allow_fd=True):
    """L f(x) = 1/2 Tr(Q D^2 f(x)) + <Ax, Df(x)>."""
    x = np.asarray(x, dtype=float)
    if (f.grad is None or f.hess is None) and not allow_fd:
        raise ValueError("field lacks derivative oracles and fallback disabled")
    g = np.asarray(f.grad(x)) if f.grad is not None else fd_gradient(f, x)
    H = np.asarray(f.hess(x)) if f.hess is not None else fd_hessian(
        f, x, h=1e-4 * (1.0 + np.linalg.norm(x)))
    val = 0.5 * np.trace(sys.noise_cov @ H) + np.dot(sys.A @ x, g)
    return val.real if np.isrealobj(g) and np.isrealobj(H) else val


def conjugated_generator_check(sys, f, probe_points):
    """Residual of the conjugation identity for the generator transported
    to flat Lebesgue space.

    Left side: 1/2 Tr(Q D^2 f) + <A~ x, Df> + k f with
    A~ = -Q_inf A^T Q_inf^{-1} and k = -Tr A.  Right side: b * L(b^{-1} f)
    with b the invariant density.  Returns the max discrepancy over the
    probe points.
    """
    mu = invariant_measure(sys)
    w = np.linalg.eigvalsh(mu.cov)
    if w.min() <= 1e-12 * w.max():
        raise DegenerateCovarianceError("Q_inf is degenerate")
    Qinf = mu.cov
    Qinf_inv = np.linalg.inv(Qinf)
    Atil = -Qinf @ sys.A.T @ Qinf_inv
    k = -float(np.trace(sys.A))

    logdet = float(np.linalg.slogdet(2 * math.pi * Qinf)[1])

    def binv_f(x):
        # b^{-1}(x) f(x) with b the invariant density
        x = np.asarray(x, dtype=float)
        xb = np.atleast_2d(x)
        quad = np.einsum("ni,ij,nj->n", xb, Qinf_inv, xb)
        vals = np.exp(0.5 * quad + 0.5 * logdet) * np.asarray(f.fn(xb))
        return vals if np.ndim(x) > 1 else np.squeeze(vals)[()]

    if f.grad is not None and f.hess is not None:
        # push the derivatives through the conjugation analytically:
        # for g = e^psi f with psi(x) = x'Q_inf^{-1}x/2 + const,
        # Dg = e^psi (Df + f u) and
        # D^2 g = e^psi (D^2 f + Df u' + u Df' + f (u u' + Q_inf^{-1}))
        # with u = Q_inf^{-1} x.
        def binv_grad(x):
            x = np.asarray(x, dtype=float)
            u = Qinf_inv @ x
            scale = math.exp(0.5 * float(x @ u) + 0.5 * logdet)
            return scale * (np.asarray(f.grad(x)) + float(f.fn(x)) * u)

        def binv_hess(x):
            x = np.asarray(x, dtype=float)
            u = Qinf_inv @ x
            scale = math.exp(0.5 * float(x @ u) + 0.5 * logdet)
            df = np.asarray(f.grad(x))
            return scale * (np.asarray(f.hess(x)) + np.outer(df, u)
                            + np.outer(u, df)
                            + float(f.fn(x)) * (np.outer(u, u) + Qinf_inv))

        gfield = ScalarField(fn=binv_f, grad=binv_grad, hess=binv_hess)
    else:
        gfield = ScalarField(fn=binv_f)
    worst = 0.0
    for x in np.atleast_2d(np.asarray(probe_points, dtype=float)):
        grad = np.asarray(f.grad(x)) if f.grad is not None else fd_gradient(f, x)
        hess = np.asarray(f.hess(x)) if f.hess is not None else fd_hessian(
            f, x, h=1e-4 * (1.0 + np.linalg.norm(x)))
        lhs = (0.5 * np.trace(sys.noise_cov @ hess)
               + np.dot(Atil @ x, grad) + k * f(x))
        b_at_x = math.exp(-0.5 * float(x @ Qinf_inv @ x) - 0.5 * logdet)
        rhs = b_at_x * apply_generator(sys, gfield, x)
        worst = max(worst, abs(lhs - rhs))
    return worst


def smooth_delta(sys, f, delta, semigroup="R"):
    """Time-average smoothing f_delta(x) = (1/delta) int_0^delta T(t)f(x) dt.

    The averaged field satisfies ||T(t) f_delta - f_delta|| <= 2 t / delta
    * ||f|| and is therefore strongly continuous for the sup norm.
    """
    delta = float(delta)
    if delta <= 0:
        raise DomainError("delta must be positive")
    if semigroup not in ("P", "R"):
        raise ValueError("semigroup must be 'P' or 'R'")

    def one_point(x):
        if semigroup == "R":
            g = lambda t: float(f.fn(sys.flow(t) @ x))
        else:
            g = lambda t: float(ou_apply(sys, t, f, x).value.real
                                if np.iscomplexobj(f.fn(x)) else
                                ou_apply(sys, t, f, x).value)
        val, _ = integrate.quad(g, 0.0, delta, epsabs=1e-9, epsrel=1e-9,
                                limit=100)
        return val / delta

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.array([one_point(xi) for xi in xb])
        return out if np.ndim(x) > 1 else np.squeeze(out)[()]

    modulus = f.modulus
    return ScalarField(fn=fn, modulus=modulus)


def limit_class_check(sys, t, f, n_values, probe_points=None, rng=None,
                      mc_draws=10_000):
    """Defects of the scaling-isometry conjugation against the drift
    semigroup.

    For each n returns (defect, bound) where defect is a grid estimate of
    sup_x |V_n^{-1} P(t) V_n f(x) - R(t) f(x)| and bound is the Monte
    Carlo estimate of int modulus_f(|y|/n) dmu_t(y).
    """
    if f.modulus is None:
        raise ValueError("limit_class_check requires a modulus of continuity")
    rng = np.random.default_rng(0) if rng is None else rng
    if probe_points is None:
        probe_points = np.vstack([np.zeros(sys.dim),
                                  np.eye(sys.dim),
                                  -np.eye(sys.dim),
                                  2.0 * np.eye(sys.dim)])
    probe_points = np.atleast_2d(np.asarray(probe_points, dtype=float))
    S = sys.flow(t)
    Qt = van_loan_qt(sys.A, sys.noise_cov, t)
    pts, W = gauss_hermite_nodes(Qt)
    draws = gm_sample(GaussianMeasure(np.zeros(sys.dim), Qt), rng, mc_draws)
    radii = np.linalg.norm(draws, axis=1)

    results = []
    for n in n_values:
        defect = 0.0
        for x in probe_points:
            base = S @ x
            # V_n^{-1} P(t) V_n f(x) = int f(S(t)x + y/n) dmu_t(y)
            conj = float(np.dot(W, np.asarray(f.fn(base + pts / n))))
            defect = max(defect, abs(conj - float(f.fn(base))))
        bound = float(np.mean([f.modulus(r / n) for r in radii]))
        results.append((int(n), defect, bound))
    return results


def strong_feller_check(sys, t, tol=1e-8):
    """Decide range(S(t)) subseteq range(Q_t^{1/2}) by least-squares
    residuals on the coordinate basis.  Returns (verdict, margin)."""
    t = float(t)
    if t <= 0:
        raise DomainError("t must be positive")
    S = sys.flow(t)
    Qt = van_loan_qt(sys.A, sys.noise_cov, t)
    w, V = np.linalg.eigh(Qt)
    thresh = 1e-10 * max(1.0, float(w.max(initial=0.0)))
    keep = w > thresh
    worst = 0.0
    for i in range(sys.dim):
        v = S[:, i]
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        z = V.T @ v
        resid = np.linalg.norm(z[~keep]) / nv
        worst = max(worst, float(resid))
    return worst <= tol, worst
