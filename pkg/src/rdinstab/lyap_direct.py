"""Projected Lyapunov matrix inequalities and the direct instability test.

A Lyapunov functional with kernels ``P``, ``Q(theta)``, ``T(theta1, theta2)``
is restricted to the Legendre span.  Writing ``Qn`` and ``Tn`` for the
projected kernels, the quadratic forms

    Psi_plus  = [[P, Qn], [Qn^T, Tn]]
    Psi_minus = He([[P A, Psi_xz], [0, Psi_zz]])
    Psi_xz    = P B Phi(theta_o)^T D^T + (lambda I + A^T) Qn + nu Qn (D^T)^2
    Psi_zz    = D Phi(theta_o) B^T Qn + Tn (lambda I + nu (D^T)^2)

act on ``(x, zeta)`` where ``zeta`` holds the Legendre coefficients of ``z``.
The boundary conditions restrict ``Psi_minus`` to the kernel ``Pi`` of
``[[C, -Phi(0)^T], [0, -Phi(theta_i)^T]]``.  If no triplet makes
``Psi_plus`` positive definite and ``Pi^T Psi_minus Pi`` negative definite,
the system is unstable.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import basis as _basis
from . import sdp
from .errors import InvalidParameters
from .model import SystemParams
from .verdict import Verdict, inconclusive, stable_indicated, unstable

__all__ = ["ProjectedLmi", "DimensionMismatch", "assemble", "verdict_direct"]

log = logging.getLogger(__name__)


class DimensionMismatch(InvalidParameters):
    """Basis and system disagree on the interval or the orders are invalid."""


def _he(M):
    return M + M.T


@dataclass(frozen=True, eq=False)
class ProjectedLmi:
    """Projected LMI data for one system and one basis order.

    The maps :meth:`psi_plus` and :meth:`psi_minus` are linear in the triplet
    ``(P, Qn, Tn)``; :meth:`pencils` scalarizes them for the SDP backend.
    """

    params: SystemParams
    basis: _basis.LegendreBasis
    constraint: np.ndarray = field(repr=False)
    Pi: np.ndarray = field(repr=False)
    _bphi: np.ndarray = field(repr=False)   # B Phi(theta_o)^T D^T, shape (n_x, n)
    _dt2: np.ndarray = field(repr=False)    # (D^T)^2

    @property
    def n_x(self):
        return self.params.n_x

    @property
    def n(self):
        return self.basis.n

    @property
    def dim(self):
        return self.n_x + self.n

    def psi_plus(self, P, Q, T):
        P, Q, T = map(np.asarray, (P, Q, T))
        return np.block([[P, Q], [Q.T, T]])

    def psi_blocks(self, P, Q, T):
        """``(Psi_xx, Psi_xz, Psi_zz)`` before symmetrization."""
        p = self.params
        P, Q, T = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (P, Q, T))
        Q = Q.reshape(self.n_x, self.n)
        lam_n = p.lam * np.eye(self.n)
        xx = P @ p.A
        xz = P @ self._bphi + (p.lam * np.eye(self.n_x) + p.A.T) @ Q + p.nu * Q @ self._dt2
        zz = self._bphi.T @ Q + T @ (lam_n + p.nu * self._dt2)
        return xx, xz, zz

    def psi_minus(self, P, Q, T):
        xx, xz, zz = self.psi_blocks(P, Q, T)
        M = np.block([[xx, xz], [np.zeros((self.n, self.n_x)), zz]])
        return _he(M)

    def psi_minus_projected(self, P, Q, T):
        return self.Pi.T @ self.psi_minus(P, Q, T) @ self.Pi

    # -- scalarization --------------------------------------------------------
    def variable_layout(self):
        """List of ``(P, Q, T)`` unit triplets spanning the decision space.

        Symmetric unknowns use ``E_ij + E_ji`` for ``i < j`` and ``E_ii`` on
        the diagonal.
        """
        nx, n = self.n_x, self.n
        out = []
        zP, zQ, zT = np.zeros((nx, nx)), np.zeros((nx, n)), np.zeros((n, n))
        for i in range(nx):
            for j in range(i, nx):
                E = zP.copy()
                E[i, j] = E[j, i] = 1.0
                out.append((E, zQ, zT))
        for i in range(nx):
            for j in range(n):
                E = zQ.copy()
                E[i, j] = 1.0
                out.append((zP, E, zT))
        for i in range(n):
            for j in range(i, n):
                E = zT.copy()
                E[i, j] = E[j, i] = 1.0
                out.append((zP, zQ, E))
        return out

    def unpack(self, y):
        """Triplet ``(P, Qn, Tn)`` for a scalar variable vector ``y``."""
        P = np.zeros((self.n_x, self.n_x))
        Q = np.zeros((self.n_x, self.n))
        T = np.zeros((self.n, self.n))
        for yi, (dP, dQ, dT) in zip(np.asarray(y, dtype=float), self.variable_layout()):
            P += yi * dP
            Q += yi * dQ
            T += yi * dT
        return P, Q, T

    def pencils(self, shift=0.0):
        """Pencils for ``Psi_plus - shift I >= 0`` and ``-Pi^T Psi_minus Pi - shift I >= 0``.

        Returns the two :class:`sdp.PencilConstraint` objects and the trace
        normalization ``trace(P) + trace(Tn) = 1`` as ``(E, f)``.
        """
        layout = self.variable_layout()
        Gp = np.array([self.psi_plus(*v) for v in layout])
        Gm = np.array([-self.psi_minus_projected(*v) for v in layout])
        m = self.Pi.shape[1]
        plus = sdp.PencilConstraint(-shift * np.eye(self.dim), Gp, name="psi_plus")
        minus = sdp.PencilConstraint(-shift * np.eye(m), Gm, name="psi_minus")
        E = np.array([[np.trace(dP) + np.trace(dT) for dP, _, dT in layout]])
        return [plus, minus], (E, np.array([1.0]))


def assemble(p: SystemParams, basis: _basis.LegendreBasis) -> ProjectedLmi:
    """Build the projected LMI data for ``p`` on ``basis``.

    Raises
    ------
    DimensionMismatch
        If the basis interval differs from ``theta_i``.
    """
    if not np.isclose(basis.theta_i, p.theta_i, rtol=1e-14, atol=0):
        raise DimensionMismatch(f"basis is on [0, {basis.theta_i}] but theta_i = {p.theta_i}")
    phi_o = _basis.evaluate(basis, p.theta_o)
    Dt = basis.D.T
    bphi = p.B @ (phi_o[None, :] @ Dt)
    K = np.block([[p.C, -basis.phi_0[None, :]],
                  [np.zeros((1, p.n_x)), -basis.phi_end[None, :]]])
    Pi = linalg.null_space(K)
    for arr in (K, Pi, bphi):
        arr.setflags(write=False)
    return ProjectedLmi(p, basis, K, Pi, bphi, Dt @ Dt)


def verdict_direct(p: SystemParams, n: int = 10, eps: float = 1e-7, **solver_opts) -> Verdict:
    """Direct LMI instability test at basis order ``n``.

    The homogeneous LMI pair is normalized by ``trace(P) + trace(Tn) = 1`` and
    handed to :func:`sdp.solve` with both pencils shifted by ``eps``.  A
    verified dual certificate for the shifted problem gives ``UNSTABLE``; a
    verified feasible triplet gives ``STABLE_INDICATED`` (not a stability
    proof); anything else is ``INCONCLUSIVE``.

    Parameters
    ----------
    p : SystemParams
    n : int
        Basis order, at least 2.
    eps : float
        Strictness margin.
    """
    if n < 2:
        raise DimensionMismatch(f"order n must be >= 2, got {n}")
    if not eps > 0:
        raise InvalidParameters("eps must be positive")
    lmi = assemble(p, _basis.build(n, p.theta_i))
    cons, eq = lmi.pencils(shift=eps)
    out = sdp.solve(cons, eq, eps=eps / 2, **solver_opts)
    ev = {"order": n, "eps": eps, "t_star": out.t_star + eps, "sdp_status": out.status.value,
          "solver_status": out.solver_status, "iterations": out.iterations,
          "kernel_dim": lmi.Pi.shape[1]}
    if out.infeasible:
        ev.update(dual_margin=out.dual_margin, certificate_check=out.details)
        return unstable("lmi", **ev)
    if out.feasible:
        P, Q, T = lmi.unpack(out.y)
        ev.update(margin=out.primal_margin + eps, P=P, P_eigs=np.linalg.eigvalsh(P))
        return stable_indicated("lmi", **ev)
    return inconclusive("lmi", **ev)
