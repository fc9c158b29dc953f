"""Gaussian measures as first-class values.

Densities, sampling, pushforwards, Hellinger affinity, total-variation
distance on the [0, 2] scale, the finite-dimensional Feldman-Hajek
dichotomy, and Cameron-Martin membership tests.

Degenerate covariances are handled by reduction to the support subspace
(rank-revealing eigendecomposition at tolerance 1e-10) before any
density work.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.stats import chi2, norm

from .budget import DEFAULT_BUDGET
from .errors import DegenerateCovarianceError, DimensionMismatchError
from .linalg import psd_sqrt, require_psd

RANK_TOL = 1e-10

TV_METHODS = ("closed-form-1d", "equal-cov", "isotropic-radial",
              "quadrature", "monte-carlo")


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = require_psd(np.atleast_2d(np.asarray(self.cov, dtype=float)),
                          name="cov")
        if mean.shape != (cov.shape[0],):
            raise DimensionMismatchError(
                f"mean shape {mean.shape} incompatible with cov {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size

    def support_basis(self):
        """Orthonormal basis U of range(cov) and the positive eigenvalues."""
        w, V = np.linalg.eigh(self.cov)
        thresh = RANK_TOL * max(1.0, float(w.max(initial=0.0)))
        keep = w > thresh
        return V[:, keep], w[keep]


@dataclass(frozen=True)
class TVEstimate:
    value: float
    method: str
    std_error: float = 0.0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in TV_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not -1e-12 <= self.value <= 2 + 1e-12:
            raise ValueError(f"TV value {self.value} outside [0, 2]")
        if self.method != "monte-carlo" and self.std_error != 0.0:
            raise ValueError("deterministic methods carry std_error 0")


@dataclass(frozen=True)
class CameronMartinResult:
    contained: bool
    norm: Optional[float] = None


def density(m, x):
    """Lebesgue density of a nondegenerate Gaussian at x (vectorized)."""
    w, V = np.linalg.eigh(m.cov)
    if w.min() <= 1e-12 * max(w.max(), 1e-300):
        raise DegenerateCovarianceError(
            "covariance is degenerate; restrict to the support subspace first"
        )
    return np.exp(log_density(m, x))


def log_density(m, x):
    w, V = np.linalg.eigh(m.cov)
    if w.min() <= 0:
        raise DegenerateCovarianceError("degenerate covariance")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = (x - m.mean) @ V
    quad = (z * z / w).sum(axis=-1)
    logdet = float(np.log(w).sum())
    out = -0.5 * (quad + logdet + m.dim * math.log(2 * math.pi))
    return np.squeeze(out)[()]


def sample(m, rng, n):
    """n i.i.d. draws, deterministic given the generator state."""
    if n < 1:
        raise ValueError("n must be >= 1")
    C = psd_sqrt(m.cov)
    z = rng.standard_normal((n, m.dim))
    return m.mean + z @ C.T


def pushforward(m, T):
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape[1] != m.dim:
        raise DimensionMismatchError(
            f"map with {T.shape[1]} columns applied to dim-{m.dim} measure"
        )
    return GaussianMeasure(T @ m.mean, T @ m.cov @ T.T)


def _ranges_equal(m1, m2):
    U1, _ = m1.support_basis()
    U2, _ = m2.support_basis()
    if U1.shape[1] != U2.shape[1]:
        return False
    P1 = U1 @ U1.T
    P2 = U2 @ U2.T
    return float(np.abs(P1 - P2).max()) <= 1e-8


def _reduce_pair(m1, m2):
    """Project both measures onto the common support coordinates.

    Returns (r1, r2) as reduced GaussianMeasures, or None when the pair
    is mutually singular (different ranges or mean shift off-range).
    """
    if m1.dim != m2.dim:
        raise DimensionMismatchError("measure dimensions differ")
    if not _ranges_equal(m1, m2):
        return None
    U, _ = m1.support_basis()
    delta = m2.mean - m1.mean
    resid = delta - U @ (U.T @ delta)
    if np.linalg.norm(resid) > 1e-8 * (1.0 + np.linalg.norm(delta)):
        return None
    if U.shape[1] == 0:
        # Both are point masses at the same point.
        return (GaussianMeasure(np.zeros(1), np.zeros((1, 1))),) * 2
    r1 = GaussianMeasure(U.T @ (m1.mean - m1.mean), U.T @ m1.cov @ U)
    r2 = GaussianMeasure(U.T @ (m2.mean - m1.mean), U.T @ m2.cov @ U)
    return r1, r2


def fh_classify(m1, m2):
    """Finite-dimensional Feldman-Hajek dichotomy.

    'equivalent' iff the covariance ranges coincide and the mean shift
    lies in the common range; 'singular' otherwise.
    """
    return "singular" if _reduce_pair(m1, m2) is None else "equivalent"


def hellinger_affinity(m1, m2):
    """rho = int sqrt(d mu1 d mu2); 0 for measures with different supports."""
    pair = _reduce_pair(m1, m2)
    if pair is None:
        return 0.0
    r1, r2 = pair
    w, _ = np.linalg.eigh(r1.cov)
    if w.max(initial=0.0) == 0.0:
        return 1.0  # identical point masses
    Sbar = 0.5 * (r1.cov + r2.cov)
    s1, ld1 = np.linalg.slogdet(r1.cov)
    s2, ld2 = np.linalg.slogdet(r2.cov)
    sb, ldb = np.linalg.slogdet(Sbar)
    delta = r2.mean - r1.mean
    quad = float(delta @ np.linalg.solve(Sbar, delta))
    return float(np.exp(0.25 * ld1 + 0.25 * ld2 - 0.5 * ldb - 0.125 * quad))


def cameron_martin_contains(m, x):
    """Decide x in range(cov^{1/2}); on yes return the minimal-norm
    preimage length |cov^{-1/2} x|."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (m.dim,):
        raise DimensionMismatchError("vector dimension mismatch")
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return CameronMartinResult(True, 0.0)
    w, V = np.linalg.eigh(m.cov)
    thresh = RANK_TOL * max(1.0, float(w.max(initial=0.0)))
    z = V.T @ x
    off = z[w <= thresh]
    if off.size and np.linalg.norm(off) > 1e-8 * nx:
        return CameronMartinResult(False, None)
    keep = w > thresh
    h2 = float((z[keep] ** 2 / w[keep]).sum())
    return CameronMartinResult(True, math.sqrt(h2))


# ---------------------------------------------------------------------------
# total-variation distance


def _tv_closed_form_1d(r1, r2):
    mu1, s1 = float(r1.mean[0]), math.sqrt(float(r1.cov[0, 0]))
    mu2, s2 = float(r2.mean[0]), math.sqrt(float(r2.cov[0, 0]))
    # log p1 - log p2 is quadratic; its real roots are the crossing points.
    a = -0.5 / s1**2 + 0.5 / s2**2
    b = mu1 / s1**2 - mu2 / s2**2
    c = (-0.5 * mu1**2 / s1**2 + 0.5 * mu2**2 / s2**2
         + math.log(s2) - math.log(s1))
    if abs(a) < 1e-300:
        roots = [] if abs(b) < 1e-300 else [-c / b]
    else:
        disc = b * b - 4 * a * c
        roots = [] if disc < 0 else sorted(
            [(-b - math.sqrt(disc)) / (2 * a), (-b + math.sqrt(disc)) / (2 * a)]
        )
    pts = [-np.inf] + roots + [np.inf]
    tv = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        d1 = norm.cdf(hi, mu1, s1) - norm.cdf(lo, mu1, s1)
        d2 = norm.cdf(hi, mu2, s2) - norm.cdf(lo, mu2, s2)
        tv += abs(d1 - d2)
    return min(2.0, tv)


def _tv_equal_cov(r1, r2):
    delta = r2.mean - r1.mean
    w, V = np.linalg.eigh(r1.cov)
    z = V.T @ delta
    gap = math.sqrt(float((z * z / w).sum()))
    return 2.0 * (2.0 * norm.cdf(gap / 2.0) - 1.0)


def _tv_isotropic_radial(a, b, d):
    # variances a < b; densities cross on the sphere r^2 = d ln(b/a)/(1/a - 1/b)
    if a > b:
        a, b = b, a
    r2 = d * math.log(b / a) / (1.0 / a - 1.0 / b)
    return 2.0 * (chi2.cdf(r2 / a, d) - chi2.cdf(r2 / b, d))


def _conditional_1d(meas, x):
    """For a 2-D Gaussian: marginal density weight at x and the
    conditional (mean, std) of the second coordinate."""
    mx, my = meas.mean
    sxx, sxy, syy = meas.cov[0, 0], meas.cov[0, 1], meas.cov[1, 1]
    A = norm.pdf(x, mx, math.sqrt(sxx))
    bmean = my + sxy / sxx * (x - mx)
    bvar = syy - sxy**2 / sxx
    return A, bmean, math.sqrt(max(bvar, 1e-300))


def _tv_quadrature_2d(r1, r2):
    """Exact inner integral in y (crossing points of two scaled normals),
    adaptive outer quadrature in x."""

    def inner(x):
        A1, b1, v1 = _conditional_1d(r1, x)
        A2, b2, v2 = _conditional_1d(r2, x)
        if A1 < 1e-300 and A2 < 1e-300:
            return 0.0
        # log(A1 N(y;b1,v1)) - log(A2 N(y;b2,v2)) quadratic in y
        if A1 < 1e-300:
            return A2
        if A2 < 1e-300:
            return A1
        a = -0.5 / v1**2 + 0.5 / v2**2
        b = b1 / v1**2 - b2 / v2**2
        c = (math.log(A1) - math.log(A2) - 0.5 * b1**2 / v1**2
             + 0.5 * b2**2 / v2**2 + math.log(v2) - math.log(v1))
        if abs(a) < 1e-14 * (abs(b) + 1.0):
            roots = [] if abs(b) < 1e-300 else [-c / b]
        else:
            disc = b * b - 4 * a * c
            roots = [] if disc < 0 else sorted(
                [(-b - math.sqrt(disc)) / (2 * a),
                 (-b + math.sqrt(disc)) / (2 * a)]
            )
        pts = [-np.inf] + roots + [np.inf]
        val = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            d1 = norm.cdf(hi, b1, v1) - norm.cdf(lo, b1, v1)
            d2 = norm.cdf(hi, b2, v2) - norm.cdf(lo, b2, v2)
            val += abs(A1 * d1 - A2 * d2)
        return val

    # Segment the x-axis around both marginal supports.
    marks = []
    for r in (r1, r2):
        mx = r.mean[0]
        sx = math.sqrt(r.cov[0, 0])
        marks.extend([mx - 10 * sx, mx, mx + 10 * sx])
    marks = sorted(marks)
    tv = 0.0
    err = 0.0
    segs = [(-np.inf, marks[0])] + list(zip(marks[:-1], marks[1:])) + [
        (marks[-1], np.inf)
    ]
    for lo, hi in segs:
        v, e = integrate.quad(inner, lo, hi, epsabs=1e-11, epsrel=1e-11,
                              limit=200)
        tv += v
        err += e
    return min(2.0, tv), err


def _tv_monte_carlo(r1, r2, budget, rng):
    """Balanced-mixture importance sampling of int |p1 - p2|.

    Proposal q = (p1 + p2)/2; the integrand 2|w1 - w2|/(w1 + w2) is
    bounded by 2, so the variance is bounded.
    """
    total = 0.0
    total2 = 0.0
    n = 0
    batch = 8192
    while n < budget.max_evals:
        k = min(batch, budget.max_evals - n)
        k1 = k // 2
        xs = np.vstack([sample(r1, rng, max(k1, 1)),
                        sample(r2, rng, max(k - k1, 1))])[:k]
        a = log_density(r1, xs)
        b = log_density(r2, xs)
        mx = np.maximum(a, b)
        ea = np.exp(a - mx)
        eb = np.exp(b - mx)
        g = 2.0 * np.abs(ea - eb) / (ea + eb)
        total += g.sum()
        total2 += (g * g).sum()
        n += k
        mean = total / n
        var = max(total2 / n - mean**2, 0.0)
        se = math.sqrt(var / n)
        if n >= 4096 and se <= budget.target_std_error:
            return min(2.0, mean), se, True
    return min(2.0, mean), se, False


def tv_distance(m1, m2, budget=None, rng=None, method=None):
    """Total-variation distance on the scale [0, 2].

    Dispatch: exact closed forms where available (1-D, equal covariance,
    centred isotropic), adaptive quadrature in dimension <= 2, Monte
    Carlo with reported standard error otherwise.  Mutually singular
    pairs return exactly 2.  ``method`` forces a particular estimator
    (it must be applicable).
    """
    budget = DEFAULT_BUDGET if budget is None else budget
    pair = _reduce_pair(m1, m2)
    if pair is None:
        return TVEstimate(2.0, "closed-form-1d",
                          diagnostics={"singular": True})
    r1, r2 = pair
    if float(np.abs(r1.cov).max()) == 0.0:
        # identical point masses
        return TVEstimate(0.0, "closed-form-1d")
    d = r1.dim

    scale = max(float(np.abs(r1.cov).max()), float(np.abs(r2.cov).max()))
    equal_cov = float(np.abs(r1.cov - r2.cov).max()) <= 1e-12 * scale
    iso1 = float(np.abs(r1.cov - r1.cov[0, 0] * np.eye(d)).max()) <= 1e-12 * scale
    iso2 = float(np.abs(r2.cov - r2.cov[0, 0] * np.eye(d)).max()) <= 1e-12 * scale
    centred = (np.linalg.norm(r1.mean) <= 1e-12 * (1 + math.sqrt(scale))
               and np.linalg.norm(r2.mean) <= 1e-12 * (1 + math.sqrt(scale)))

    if method is None:
        if d == 1:
            method = "closed-form-1d"
        elif equal_cov:
            method = "equal-cov"
        elif iso1 and iso2 and centred:
            method = "isotropic-radial"
        elif d == 2:
            method = "quadrature"
        else:
            method = "monte-carlo"

    if method == "closed-form-1d":
        if d != 1:
            raise DimensionMismatchError("closed-form-1d requires dimension 1")
        return TVEstimate(_tv_closed_form_1d(r1, r2), "closed-form-1d")
    if method == "equal-cov":
        if not equal_cov:
            raise ValueError("covariances are not equal on the support")
        return TVEstimate(_tv_equal_cov(r1, r2), "equal-cov")
    if method == "isotropic-radial":
        if not (iso1 and iso2 and centred):
            raise ValueError("measures are not centred isotropic")
        a, b = float(r1.cov[0, 0]), float(r2.cov[0, 0])
        if abs(a - b) <= 1e-15 * max(a, b):
            return TVEstimate(0.0, "isotropic-radial")
        return TVEstimate(_tv_isotropic_radial(a, b, d), "isotropic-radial")
    if method == "quadrature":
        if d > 2:
            raise DimensionMismatchError("quadrature limited to dimension <= 2")
        if d == 1:
            return TVEstimate(_tv_closed_form_1d(r1, r2), "closed-form-1d")
        val, err = _tv_quadrature_2d(r1, r2)
        return TVEstimate(val, "quadrature", diagnostics={"quad_error": err})
    if method == "monte-carlo":
        rng = np.random.default_rng(0) if rng is None else rng
        val, se, ok = _tv_monte_carlo(r1, r2, budget, rng)
        return TVEstimate(val, "monte-carlo", std_error=se, converged=ok)
    raise ValueError(f"unknown method {method!r}")
