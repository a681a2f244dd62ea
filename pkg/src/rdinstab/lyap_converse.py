"""Closed-form converse Lyapunov kernels for the scalar plant.

For ``x' = a x + b z_theta(theta_i)``, ``z(0) = x`` the kernels are written
with ``r = sqrt(-lambda/nu)`` through the two branch-free functions

    S(theta)  = theta sinhc(r theta)      (= sinh(r theta)/r)
    Ch(theta) = cosh(r theta)

which are real for either sign of ``lambda`` and regular at ``lambda = 0``:

    alpha = 1 / (b - a S(theta_i))
    beta  = a alpha Ch(theta_i)            (coefficient of S in f)
    f     = Ch + beta S
    w     = b / (nu Ch(theta_i))
    P     = alpha S(theta_i) / 2
    Q     = -(alpha b / (2 nu)) S
    T     = (w / (2 nu)) f(theta1) S(theta2)   for theta2 <= theta1, symmetric otherwise

The residual checker evaluates the six relations the kernels are meant to
satisfy, using analytic derivatives and the one-sided derivative from inside
the square wherever the kernel has a kink.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from . import basis as _basis
from .errors import InvalidParameters, SingularParameters
from .model import SystemParams, sinhc
from .verdict import Verdict, inconclusive, stable_indicated, unstable

__all__ = ["ConverseKernels", "ResidualReport", "solve_scalar_kernels", "kernel_residuals",
           "project_kernels", "verdict_converse_scalar", "verdict_converse_projected",
           "derivative_form"]

_SINGULAR = 1e-12
_IMAG_TOL = 1e-10


def _real(z, what):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        scale = 1.0 + np.max(np.abs(z), initial=0.0)
        if np.max(np.abs(z.imag), initial=0.0) > _IMAG_TOL * scale:
            raise ArithmeticError(f"{what} has an imaginary residue")
        z = z.real
    return z


@dataclass(frozen=True, eq=False)
class ConverseKernels:
    """Scalar converse kernels and their derivatives.

    The fields ``P``, ``alpha``, ``beta`` and ``w`` are plain numbers; ``Q``
    and ``T`` are methods.  ``T`` is fixed by ``t_gain`` and ``beta`` at
    construction, so replacing ``w`` or ``P`` (``dataclasses.replace``)
    perturbs only the quantities that read those fields.
    """

    params: SystemParams = field(repr=False)
    P: float
    alpha: float
    beta: float
    w: float
    r2: float = field(repr=False)
    q_gain: float = field(repr=False)
    t_gain: float = field(repr=False)
    _r: complex = field(repr=False, default=0j)

    # branch-free building blocks
    def S(self, th):
        th = np.asarray(th, dtype=float)
        return _real(th * sinhc(self._r * th), "S")

    def Ch(self, th):
        return _real(np.cosh(self._r * np.asarray(th, dtype=float)), "Ch")

    def f(self, th):
        return self.Ch(th) + self.beta * self.S(th)

    def df(self, th):
        return self.r2 * self.S(th) + self.beta * self.Ch(th)

    # kernels
    def Q(self, th):
        return self.q_gain * self.S(th)

    def dQ(self, th):
        return self.q_gain * self.Ch(th)

    def d2Q(self, th):
        return self.q_gain * self.r2 * self.S(th)

    def T(self, t1, t2):
        t1, t2 = np.broadcast_arrays(np.asarray(t1, float), np.asarray(t2, float))
        hi, lo = np.maximum(t1, t2), np.minimum(t1, t2)
        return self.t_gain * self.f(hi) * self.S(lo)

    def T_partials(self, t1, t2, side="lower"):
        """``(T, T_1, T_2, T_11, T_22)`` at ``(t1, t2)``.

        Off the diagonal the region is determined by the arguments; on the
        diagonal ``side`` selects the triangle the one-sided derivatives
        come from.
        """
        t1, t2 = np.broadcast_arrays(np.asarray(t1, float), np.asarray(t2, float))
        lower = (t2 < t1) | ((t2 == t1) & (side == "lower"))
        g = self.t_gain
        # lower triangle: g f(t1) S(t2); upper triangle: g f(t2) S(t1)
        a, b = np.where(lower, t1, t2), np.where(lower, t2, t1)
        fa, dfa, d2fa = self.f(a), self.df(a), self.r2 * self.f(a)
        Sb, dSb, d2Sb = self.S(b), self.Ch(b), self.r2 * self.S(b)
        T = g * fa * Sb
        d_a, d_b = g * dfa * Sb, g * fa * dSb
        dd_a, dd_b = g * d2fa * Sb, g * fa * d2Sb
        T1 = np.where(lower, d_a, d_b)
        T2 = np.where(lower, d_b, d_a)
        T11 = np.where(lower, dd_a, dd_b)
        T22 = np.where(lower, dd_b, dd_a)
        return T, T1, T2, T11, T22


def solve_scalar_kernels(p: SystemParams) -> ConverseKernels:
    """Closed-form kernels for the scalar plant.

    Raises
    ------
    InvalidParameters
        If ``p`` is not scalar with ``theta_o = theta_i`` and ``C = 1``.
    SingularParameters
        If ``b - a S(theta_i)`` or ``cosh(r theta_i)`` is within ``1e-12``
        (relative) of zero.
    """
    if not p.is_scalar():
        raise InvalidParameters("converse kernels need n_x = 1, theta_o = theta_i and C = 1")
    a, b = float(p.A[0, 0]), float(p.B[0, 0])
    nu, ti = p.nu, p.theta_i
    r = complex(np.sqrt(complex(-p.lam / nu)))
    r2 = -p.lam / nu
    S_i = float(_real(ti * sinhc(r * ti), "S(theta_i)"))
    Ch_i = float(_real(np.cosh(r * ti), "Ch(theta_i)"))
    den = b - a * S_i
    if abs(den) <= _SINGULAR * max(1.0, abs(b), abs(a * S_i)):
        raise SingularParameters(f"b - a S(theta_i) = {den:.3g} vanishes")
    if abs(Ch_i) <= _SINGULAR:
        raise SingularParameters("cosh(r theta_i) vanishes")
    alpha = 1.0 / den
    beta = a * alpha * Ch_i
    w = b / (nu * Ch_i)
    return ConverseKernels(params=p, P=alpha * S_i / 2, alpha=alpha, beta=beta, w=w, r2=r2,
                           q_gain=-alpha * b / (2 * nu), t_gain=w / (2 * nu), _r=r)


@dataclass(frozen=True)
class ResidualReport:
    """Maximum absolute residual of each kernel relation on a sample grid."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    grid: int
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        return {k: getattr(self, k) for k in "abcdef"}

    def max(self):
        return max(self.as_dict().values())

    def table(self) -> str:
        labels = {
            "a": "algebraic identity",
            "b": "Q equation with T coupling",
            "c": "Q boundary pair",
            "d": "T interior equation",
            "e": "T boundary pair",
            "f": "T diagonal jump",
        }
        lines = [f"{'eq':<4}{'relation':<30}{'max |residual|':>16}", "-" * 50]
        for k, v in self.as_dict().items():
            lines.append(f"{k:<4}{labels[k]:<30}{v:>16.3e}")
        return "\n".join(lines)


def kernel_residuals(p: SystemParams, k: ConverseKernels, grid: int = 20) -> ResidualReport:
    """Residuals of the six kernel relations on a ``grid x grid`` sample.

    (a) ``2 (P a + nu Q'(0)) + 1``
    (b) ``nu Q'' + (a + lambda) Q + nu dT/dtheta1 (0, theta)``, the derivative
        taken from inside the square (``theta1 -> 0+`` with ``theta > 0``)
    (c) ``Q(0)`` and ``P b + nu Q(theta_i)``
    (d) ``(nu d11 + nu d22 + 2 lambda) T`` off the diagonal
    (e) ``T(theta, 0)`` and ``nu T(theta_i, theta) + b Q(theta)``
    (f) ``(d1 - d2) T(theta, theta) + w / (2 nu)`` from the lower triangle

    ``extras["b_lower_formula"]`` repeats (b) with the coupling derivative
    taken from the lower-triangle expression, for diagnostics.
    """
    if grid < 8:
        raise InvalidParameters("grid must be at least 8")
    a, b = float(p.A[0, 0]), float(p.B[0, 0])
    nu, lam, ti = p.nu, p.lam, p.theta_i
    th = np.linspace(0.0, ti, int(grid))
    pos = th[1:]

    res_a = abs(2 * (k.P * a + nu * float(k.dQ(0.0))) + 1)

    _, T1_up, *_ = k.T_partials(np.zeros_like(pos), pos)
    base_b = nu * k.d2Q(pos) + (a + lam) * k.Q(pos)
    res_b = float(np.max(np.abs(base_b + nu * T1_up)))
    T1_low = k.t_gain * k.df(np.zeros_like(pos)) * k.S(pos)
    res_b_low = float(np.max(np.abs(base_b + nu * T1_low)))

    res_c = max(abs(float(k.Q(0.0))), abs(k.P * b + nu * float(k.Q(ti))))

    X1, X2 = np.meshgrid(th, th, indexing="ij")
    off = X1 != X2
    _, _, _, T11, T22 = k.T_partials(X1[off], X2[off])
    Tv = k.T(X1[off], X2[off])
    res_d = float(np.max(np.abs(nu * T11 + nu * T22 + 2 * lam * Tv)))

    res_e = max(float(np.max(np.abs(k.T(th, np.zeros_like(th))))),
                float(np.max(np.abs(nu * k.T(np.full_like(th, ti), th) + b * k.Q(th)))))

    _, T1d, T2d, _, _ = k.T_partials(th, th, side="lower")
    res_f = float(np.max(np.abs(T1d - T2d + k.w / (2 * nu))))

    return ResidualReport(res_a, res_b, res_c, res_d, res_e, res_f, int(grid),
                          extras={"b_lower_formula": res_b_low})


def project_kernels(k: ConverseKernels, basis: _basis.LegendreBasis, m: int | None = None):
    """Projections ``Qn = int Q Phi^T`` and ``Tn = int int Phi T Phi^T``.

    The square is split along the diagonal; on the lower triangle the kernel
    is separable and the inner integral over ``[0, theta1]`` uses its own
    Gauss rule, so the kink on the diagonal is never sampled across.
    """
    if m is None:
        m = max(2 * basis.n, 40)
    th, wt = basis.quadrature(m)
    Phi = _basis.evaluate(basis, th)
    Qn = (k.Q(th) * wt) @ Phi.T
    x, wx = legendre.leggauss(m)
    inner = np.empty((basis.n, m))
    for j, t1 in enumerate(th):
        t2 = t1 * (x + 1) / 2
        inner[:, j] = _basis.evaluate(basis, t2) @ (k.S(t2) * wx * t1 / 2)
    L = k.t_gain * (Phi * (k.f(th) * wt)) @ inner.T
    return Qn.reshape(1, -1), L + L.T


def _psi_plus(k, basis):
    if basis is None or (isinstance(basis, int) and basis == 0):
        return np.array([[k.P]])
    Qn, Tn = project_kernels(k, basis)
    return np.block([[np.array([[k.P]]), Qn], [Qn.T, Tn]])


def verdict_converse_scalar(p: SystemParams) -> Verdict:
    """Sign test on ``P`` with the weight condition ``w > 0``.

    ``UNSTABLE`` if ``w > 0`` and ``P <= 0``; ``STABLE_INDICATED`` if
    ``w > 0`` and ``P > 0``; ``INCONCLUSIVE`` when ``w <= 0`` or the closed
    form is singular.
    """
    try:
        k = solve_scalar_kernels(p)
    except SingularParameters as exc:
        return inconclusive("converse", reason="singular", error=str(exc))
    ev = {"P": k.P, "alpha": k.alpha, "beta": k.beta, "w": k.w}
    if not k.w > 0:
        return inconclusive("converse", reason="w <= 0", **ev)
    if k.P <= 0:
        return unstable("converse", **ev)
    return stable_indicated("converse", **ev)


def verdict_converse_projected(p: SystemParams, basis=None) -> Verdict:
    """Eigenvalue test on the projected kernel matrix.

    ``basis=None`` (or ``0``) keeps only the ``P`` block.  ``UNSTABLE`` if
    ``w > 0`` and the matrix has an eigenvalue at most
    ``-1e-10 (1 + |Psi|)``; otherwise ``INCONCLUSIVE``.
    """
    try:
        k = solve_scalar_kernels(p)
    except SingularParameters as exc:
        return inconclusive("converse_projected", reason="singular", error=str(exc))
    if basis is not None and not isinstance(basis, int):
        if not np.isclose(basis.theta_i, p.theta_i, rtol=1e-14, atol=0):
            raise InvalidParameters("basis interval differs from theta_i")
    Psi = _psi_plus(k, basis)
    eig = np.linalg.eigvalsh((Psi + Psi.T) / 2)
    order = 0 if basis is None or isinstance(basis, int) else basis.n
    ev = {"order": order, "P": k.P, "w": k.w, "min_eig": float(eig[0]),
          "positive_definite": bool(eig[0] > 0)}
    if not k.w > 0:
        return inconclusive("converse_projected", reason="w <= 0", **ev)
    if eig[0] <= -1e-10 * (1 + np.linalg.norm(Psi, 2)):
        return unstable("converse_projected", **ev)
    return inconclusive("converse_projected", **ev)


def derivative_form(p: SystemParams, k: ConverseKernels, basis: _basis.LegendreBasis):
    """Matrix of ``dV/dt`` on ``(x, zeta)`` built from the projected kernels.

    For a state with ``z = Phi^T zeta`` satisfying the boundary conditions,
    ``dV/dt = xi^T M xi`` with ``xi = (x, zeta)``.  Returns ``(M, Pi)`` where
    ``Pi`` spans the admissible states.
    """
    from .lyap_direct import assemble

    lmi = assemble(p, basis)
    Qn, Tn = project_kernels(k, basis)
    return lmi.psi_minus(np.array([[k.P]]), Qn, Tn), lmi.Pi
