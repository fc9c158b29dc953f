"""Scalar fields on state space with optional derivative oracles.

Evaluation is vectorized: fields accept a single vector of shape (d,)
or a batch of shape (n, d) and return a scalar or an (n,) array.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    """A real- or complex-valued function on R^d.

    ``fn`` is the evaluation map.  ``grad`` and ``hess`` are optional
    oracles taking a single point of shape (d,).  ``modulus`` optionally
    bounds the modulus of continuity: modulus(r) >= sup_{|x-y|<=r} |f(x)-f(y)|.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    modulus: Optional[Callable[[float], float]] = None

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


def fd_gradient(field, x, h=None):
    """Central-difference gradient with step h = 1e-5 * (1 + |x|)."""
    x = np.asarray(x, dtype=float)
    if field.grad is not None:
        return np.asarray(field.grad(x))
    h = 1e-5 * (1.0 + np.linalg.norm(x)) if h is None else h
    d = x.size
    g = np.zeros(d, dtype=complex)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        g[i] = (field(x + e) - field(x - e)) / (2 * h)
    return g.real if np.allclose(g.imag, 0) else g


def fd_hessian(field, x, h=None):
    """Central-difference Hessian with step h = 1e-5 * (1 + |x|)."""
    x = np.asarray(x, dtype=float)
    if field.hess is not None:
        return np.asarray(field.hess(x))
    h = 1e-5 * (1.0 + np.linalg.norm(x)) if h is None else h
    d = x.size
    H = np.zeros((d, d), dtype=complex)
    f0 = field(x)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        H[i, i] = (field(x + ei) - 2 * f0 + field(x - ei)) / h**2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            H[i, j] = (
                field(x + ei + ej)
                - field(x + ei - ej)
                - field(x - ei + ej)
                + field(x - ei - ej)
            ) / (4 * h**2)
            H[j, i] = H[i, j]
    return H.real if np.allclose(H.imag, 0) else H


def _batchdot(x, v):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.squeeze(x @ np.asarray(v))


def constant_field(c):
    return ScalarField(
        fn=lambda x: np.broadcast_to(c, np.atleast_2d(x).shape[:-1]).squeeze()[()],
        grad=lambda x: np.zeros(np.asarray(x).size),
        hess=lambda x: np.zeros((np.asarray(x).size,) * 2),
        modulus=lambda r: 0.0,
    )


def linear_field(v):
    """f(x) = <x, v>."""
    v = np.asarray(v)
    return ScalarField(
        fn=lambda x: _batchdot(x, v),
        grad=lambda x: v.copy(),
        hess=lambda x: np.zeros((v.size, v.size)),
        modulus=lambda r: float(np.linalg.norm(v)) * r,
    )


def cosine_field(v):
    """f(x) = cos<x, v>; Lipschitz with constant |v|."""
    v = np.asarray(v, dtype=float)

    def fn(x):
        return np.cos(_batchdot(x, v))

    def grad(x):
        return -np.sin(float(np.dot(x, v))) * v

    def hess(x):
        return -np.cos(float(np.dot(x, v))) * np.outer(v, v)

    L = float(np.linalg.norm(v))
    return ScalarField(fn=fn, grad=grad, hess=hess,
                       modulus=lambda r: min(2.0, L * r))


def quadratic_field(M, c=0.0):
    """f(x) = x^T M x + c with symmetric M."""
    M = 0.5 * (np.asarray(M, dtype=float) + np.asarray(M, dtype=float).T)

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        return np.squeeze(np.einsum("ni,ij,nj->n", xb, M, xb) + c)[()]

    return ScalarField(
        fn=fn,
        grad=lambda x: 2.0 * M @ np.asarray(x, dtype=float),
        hess=lambda x: 2.0 * M,
    )


def gaussian_bump(center, width=1.0, amplitude=1.0):
    """Smooth compactly-concentrated bump a * exp(-|x-c|^2 / (2 w^2))."""
    c = np.asarray(center, dtype=float)
    w2 = float(width) ** 2

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = ((xb - c) ** 2).sum(axis=-1)
        return np.squeeze(amplitude * np.exp(-0.5 * r2 / w2))[()]

    def grad(x):
        x = np.asarray(x, dtype=float)
        return fn(x) * (-(x - c) / w2)

    def hess(x):
        x = np.asarray(x, dtype=float)
        u = (x - c) / w2
        d = x.size
        return fn(x) * (np.outer(u, u) - np.eye(d) / w2)

    # Lipschitz constant of the bump: a * exp(-1/2)/w.
    L = abs(amplitude) * np.exp(-0.5) / float(width)
    return ScalarField(fn=fn, grad=grad, hess=hess,
                       modulus=lambda r: min(2 * abs(amplitude), L * r))


def indicator_ball(center, radius):
    """Indicator of the open euclidean ball B(center, radius)."""
    c = np.asarray(center, dtype=float)
    r = float(radius)

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        return np.squeeze((((xb - c) ** 2).sum(axis=-1) < r * r).astype(float))[()]

    return ScalarField(fn=fn)


def compose_linear(field, T):
    """The field x -> f(Tx); derivatives by the chain rule when present."""
    T = np.asarray(T, dtype=float)

    def fn(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        return field.fn(np.squeeze(xb @ T.T) if xb.shape[0] > 1 else (T @ xb[0]))

    grad = None
    hess = None
    if field.grad is not None:
        grad = lambda x: T.T @ np.asarray(field.grad(T @ np.asarray(x, dtype=float)))
    if field.hess is not None:
        hess = lambda x: T.T @ np.asarray(field.hess(T @ np.asarray(x, dtype=float))) @ T
    modulus = None
    if field.modulus is not None:
        op = float(np.linalg.norm(T, 2))
        modulus = lambda r: field.modulus(op * r)
    return ScalarField(fn=fn, grad=grad, hess=hess, modulus=modulus)


def check_derivative_oracles(field, points, rtol=1e-5):
    """Spot-check grad/hess oracles against central differences.

    Returns the maximum relative discrepancy over the probe points.
    """
    worst = 0.0
    for x in np.atleast_2d(points):
        if field.grad is not None:
            g = np.asarray(field.grad(x))
            gfd = fd_gradient(ScalarField(fn=field.fn), x)
            scale = max(1.0, float(np.abs(g).max()))
            worst = max(worst, float(np.abs(g - gfd).max()) / scale)
        if field.hess is not None:
            H = np.asarray(field.hess(x))
            Hfd = fd_hessian(ScalarField(fn=field.fn), x, h=1e-4 * (1 + np.linalg.norm(x)))
            scale = max(1.0, float(np.abs(H).max()))
            worst = max(worst, float(np.abs(H - Hfd).max()) / scale)
    return worst
