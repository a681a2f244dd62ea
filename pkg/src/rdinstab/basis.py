"""Orthonormal shifted Legendre polynomials on ``[0, theta_i]``.

``phi_k(theta) = sqrt((2k + 1)/theta_i) P_k(2 theta/theta_i - 1)`` for
``k = 0..n-1``.  The derivative of ``Phi = (phi_0, ..., phi_{n-1})`` stays in
the span, ``Phi' = D Phi``, with ``D`` strictly lower triangular.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .errors import InvalidParameters, OutOfDomain

__all__ = ["LegendreBasis", "build", "evaluate", "derivative_values", "project"]


@dataclass(frozen=True, eq=False)
class LegendreBasis:
    """Truncated Legendre basis with its differentiation matrix.

    Attributes
    ----------
    n : int
        Number of basis functions.
    theta_i : float
        Length of the interval.
    D : ndarray, shape (n, n)
        Differentiation matrix, ``Phi'(theta) = D @ Phi(theta)``.
    phi_0, phi_end : ndarray, shape (n,)
        ``Phi(0)`` and ``Phi(theta_i)``.
    nodes, weights : ndarray
        Gauss-Legendre rule on ``[0, theta_i]`` with ``max(2n, 40)`` points.
    """

    n: int
    theta_i: float
    D: np.ndarray = field(repr=False)
    phi_0: np.ndarray = field(repr=False)
    phi_end: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __call__(self, theta):
        return evaluate(self, theta)

    def derivative(self, theta):
        return derivative_values(self, theta)

    def project(self, f):
        return project(self, f)

    def quadrature(self, m):
        """Gauss-Legendre nodes and weights with ``m`` points on the interval."""
        x, w = legendre.leggauss(int(m))
        h = self.theta_i / 2
        return h * (x + 1), h * w


def build(n: int, theta_i: float) -> LegendreBasis:
    """Construct the basis of order ``n`` on ``[0, theta_i]``.

    Raises
    ------
    InvalidParameters
        If ``n < 1`` or ``theta_i <= 0``.
    """
    n = int(n)
    if n < 1:
        raise InvalidParameters(f"basis order must be >= 1, got {n}")
    if not theta_i > 0:
        raise InvalidParameters(f"theta_i must be positive, got {theta_i}")
    theta_i = float(theta_i)
    k = np.arange(n)
    c = np.sqrt(2 * k + 1.0)
    # P_k' = sum over j < k with k - j odd of (2j + 1) P_j
    odd = ((k[:, None] - k[None, :]) % 2 == 1) & (k[None, :] < k[:, None])
    D = np.where(odd, 2.0 / theta_i * np.outer(c, c), 0.0)
    scale = c / np.sqrt(theta_i)
    phi_0 = scale * (-1.0) ** k
    phi_end = scale.copy()
    x, w = legendre.leggauss(max(2 * n, 40))
    nodes = theta_i / 2 * (x + 1)
    weights = theta_i / 2 * w
    for arr in (D, phi_0, phi_end, nodes, weights):
        arr.setflags(write=False)
    return LegendreBasis(n, theta_i, D, phi_0, phi_end, nodes, weights)


def _legendre_table(n, x):
    """Rows ``P_0..P_{n-1}`` and their derivatives at points ``x``."""
    x = np.asarray(x, dtype=float)
    P = np.empty((n,) + x.shape)
    dP = np.empty_like(P)
    P[0] = 1.0
    dP[0] = 0.0
    if n > 1:
        P[1] = x
        dP[1] = 1.0
    for k in range(1, n - 1):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k]
    return P, dP


def _unit(basis, theta):
    x = 2 * np.asarray(theta, dtype=float) / basis.theta_i - 1
    if np.any(np.abs(x) > 1 + 1e-12):
        raise OutOfDomain(f"theta outside [0, {basis.theta_i}]")
    return np.clip(x, -1.0, 1.0)


def _scale(basis):
    return np.sqrt(2 * np.arange(basis.n) + 1.0) / np.sqrt(basis.theta_i)


def evaluate(basis: LegendreBasis, theta):
    """``Phi(theta)``; shape ``(n,)`` for scalar input, ``(n, m)`` for arrays.

    Raises
    ------
    OutOfDomain
        If some ``theta`` lies outside ``[0, theta_i]``.
    """
    x = _unit(basis, theta)
    P, _ = _legendre_table(basis.n, x)
    s = _scale(basis)
    return s.reshape((-1,) + (1,) * x.ndim) * P


def derivative_values(basis: LegendreBasis, theta):
    """``Phi'(theta)`` computed from the polynomial recurrence (not from ``D``)."""
    x = _unit(basis, theta)
    _, dP = _legendre_table(basis.n, x)
    s = _scale(basis) * 2 / basis.theta_i
    return s.reshape((-1,) + (1,) * x.ndim) * dP


def project(basis: LegendreBasis, f):
    """Coefficients ``int_0^theta_i f(theta) Phi(theta)^T dtheta``.

    Parameters
    ----------
    f : callable
        Vectorized function of ``theta``.  It may return shape ``(m,)`` for a
        scalar field or ``(c, m)`` for a ``c``-vector field on ``m`` nodes.

    Returns
    -------
    ndarray, shape (n,) or (c, n)
    """
    th, w = basis.nodes, basis.weights
    vals = np.asarray(f(th))
    if vals.shape[-1] != th.size:
        vals = np.array([np.asarray(f(t)) for t in th]).T
    Phi = evaluate(basis, th)
    return (vals * w) @ Phi.T
