"""ODE coupled to a reaction-diffusion PDE with in-domain actuation.

The plant is

    x'(t)      = A x(t) + B dz/dtheta(t, theta_o)
    dz/dt      = nu d2z/dtheta2 + lambda z,       theta in (0, theta_i)
    z(t, 0)    = C x(t),   z(t, theta_i) = 0

with a scalar PDE state ``z`` and ``0 <= theta_o <= theta_i``.  This module
holds the parameter record and every frequency-domain object derived from it:
the PDE transfer functions, the characteristic function and its pole-free
(entire) rescaling.

All transcendental functions are written through ``sinhc`` and ``cosh`` of
``sigma = theta_i * sqrt((s - lambda) / nu)``.  They are even in ``sigma``, so
the results do not depend on which square root is taken.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import Degenerate, InvalidParameters, PoleProximity

__all__ = [
    "SystemParams",
    "sinhc",
    "sigma_of",
    "transfer_G",
    "transfer_H",
    "h_bar",
    "char_delta",
    "char_delta_sigma",
    "char_entire",
    "char_entire_scale",
    "open_loop_pde_spectrum",
    "left_half_plane_condition",
    "scalar_example",
    "example2",
]

_TAYLOR_RADIUS = 1e-2
_POLE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Parameters of the coupled ODE-PDE plant.

    Parameters
    ----------
    A : array_like, shape (n_x, n_x)
    B : array_like, shape (n_x,) or (n_x, 1)
        Gain on the PDE flux measured at ``theta_o``.
    C : array_like, shape (n_x,) or (1, n_x)
        Map from ODE state to the boundary value ``z(0)``.
    nu : float
        Diffusion coefficient, strictly positive.
    lam : float
        Reaction coefficient (``lambda``).
    theta_i : float
        Length of the spatial domain, strictly positive.
    theta_o : float
        Measurement point, ``0 <= theta_o <= theta_i``.

    Notes
    -----
    Arrays are stored as read-only float arrays with ``B`` a column and
    ``C`` a row.  Construction validates shapes and ranges and raises
    :class:`InvalidParameters` on violation.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    nu: float
    lam: float
    theta_i: float
    theta_o: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise InvalidParameters(f"A must be square and non-empty, got shape {A.shape}")
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(-1, 1) if np.size(self.B) == n else None
        C = np.asarray(self.C, dtype=float).reshape(1, -1) if np.size(self.C) == n else None
        if B is None:
            raise InvalidParameters(f"B must have {n} entries, got shape {np.shape(self.B)}")
        if C is None:
            raise InvalidParameters(f"C must have {n} entries, got shape {np.shape(self.C)}")
        nu, lam = float(self.nu), float(self.lam)
        ti, to = float(self.theta_i), float(self.theta_o)
        for name, val in (("A", A), ("B", B), ("C", C)):
            if not np.all(np.isfinite(val)):
                raise InvalidParameters(f"{name} has non-finite entries")
        if not np.isfinite(lam):
            raise InvalidParameters("lambda must be finite")
        if not (np.isfinite(nu) and nu > 0):
            raise InvalidParameters(f"nu must be positive, got {nu}")
        if not (np.isfinite(ti) and ti > 0):
            raise InvalidParameters(f"theta_i must be positive, got {ti}")
        if not (np.isfinite(to) and 0.0 <= to <= ti):
            raise InvalidParameters(f"theta_o must lie in [0, theta_i], got {to}")
        for arr in (A, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "theta_i", ti)
        object.__setattr__(self, "theta_o", to)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def beta_o(self) -> float:
        """Relative distance ``(theta_i - theta_o) / theta_i`` of the sensor from the far end."""
        return (self.theta_i - self.theta_o) / self.theta_i

    def is_scalar(self) -> bool:
        """True for the scalar configuration with collocated flux and unit ``C``."""
        return self.n_x == 1 and self.theta_o == self.theta_i and self.C[0, 0] == 1.0

    def with_(self, **changes) -> "SystemParams":
        """Return a copy with some fields replaced (validated again)."""
        d = dict(A=self.A, B=self.B, C=self.C, nu=self.nu, lam=self.lam,
                 theta_i=self.theta_i, theta_o=self.theta_o)
        d.update(changes)
        return SystemParams(**d)

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "nu": self.nu,
            "lambda": self.lam,
            "theta_i": self.theta_i,
            "theta_o": self.theta_o,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        missing = {"A", "B", "C", "nu", "lambda", "theta_i", "theta_o"} - set(d)
        if missing:
            raise InvalidParameters(f"missing keys: {sorted(missing)}")
        try:
            return cls(A=d["A"], B=d["B"], C=d["C"], nu=d["nu"], lam=d["lambda"],
                       theta_i=d["theta_i"], theta_o=d["theta_o"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameters):
                raise
            raise InvalidParameters(str(exc)) from exc

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), **kw)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source) -> "SystemParams":
        """Load from a JSON string or a path to a JSON file."""
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            text = Path(source).read_text()
        else:
            text = source
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameters(f"malformed JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise InvalidParameters("parameter JSON must be an object")
        return cls.from_dict(d)

    def __repr__(self):
        return (f"SystemParams(n_x={self.n_x}, nu={self.nu:g}, lambda={self.lam:g}, "
                f"theta_i={self.theta_i:g}, theta_o={self.theta_o:g})")


def scalar_example(a, b, lam=0.0, nu=1.0, theta_i=1.0) -> SystemParams:
    """Scalar plant ``x' = a x + b z_theta(theta_i)`` with ``z(0) = x``."""
    return SystemParams(A=[[a]], B=[b], C=[1.0], nu=nu, lam=lam,
                        theta_i=theta_i, theta_o=theta_i)


def example2(theta_i=3.0, theta_o_ratio=0.7, nu=1.0, lam=1.0, input_sign=-1.0) -> SystemParams:
    """Second-order plant with interior flux measurement.

    ``A = [[0, 1], [-4, -4]]``, ``C = [1, 0]`` and ``B = [0, input_sign * theta_i]``.
    The default ``input_sign = -1`` gives the characteristic equation

        (s + 2)**2 - cosh(sigma (1 - theta_o/theta_i)) / sinhc(sigma) = 0

    whose rightmost root is real and close to 0.17 for the default geometry.
    See the decisions notes for the choice of sign.
    """
    return SystemParams(A=[[0.0, 1.0], [-4.0, -4.0]], B=[0.0, input_sign * theta_i],
                        C=[1.0, 0.0], nu=nu, lam=lam, theta_i=theta_i,
                        theta_o=theta_o_ratio * theta_i)


# -- elementary functions -----------------------------------------------------

def sinhc(z):
    """Entire function ``sinh(z)/z`` with value 1 at the origin.

    Uses a Taylor polynomial for ``|z| < 1e-2`` and the quotient elsewhere.
    Accepts real or complex scalars and arrays.
    """
    z = np.asarray(z)
    zc = z.astype(complex) if not np.iscomplexobj(z) else z
    small = np.abs(zc) < _TAYLOR_RADIUS
    z2 = zc * zc
    taylor = 1 + z2 / 6 * (1 + z2 / 20 * (1 + z2 / 42 * (1 + z2 / 72)))
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        quot = np.sinh(zc) / np.where(small, 1.0, zc)
    out = np.where(small, taylor, quot)
    if not np.iscomplexobj(z):
        out = out.real
    return out[()] if out.ndim == 0 else out


def sigma_of(p: SystemParams, s):
    """``theta_i * sqrt((s - lambda)/nu)`` on the principal branch, as complex."""
    s = np.asarray(s, dtype=complex)
    return p.theta_i * np.sqrt((s - p.lam) / p.nu)


def _right(sig):
    # even functions of sigma only: fold onto Re(sigma) >= 0
    return np.where(sig.real < 0, -sig, sig)


def _pole_measure(sig):
    """Scaled distance of sigma from the poles i*k*pi, k != 0."""
    sr = _right(sig)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.abs(sinhc(sr)) * np.maximum(np.abs(sr), 1.0) * np.exp(-sr.real)
        # |sinh(sr)| exp(-Re sr) = |1 - exp(-2 sr)| / 2 once |sr| >= 1
        big = np.abs(1 - np.exp(-2 * sr)) / 2
    m = np.where(np.abs(sr) >= 1.0, big, small)
    return np.where(np.isfinite(m), m, 0.0)


def _sinh_ratio(sig, frac):
    """``sinh(frac*sig)/sinh(sig)`` for ``frac`` in [0, 1], overflow free."""
    sr = _right(sig)
    big = sr.real > 20
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        direct = frac * sinhc(frac * sr) / sinhc(sr)
        scaled = (np.exp((frac - 1) * sr) * (1 - np.exp(-2 * frac * sr))
                  / (1 - np.exp(-2 * sr)))
    return np.where(big, scaled, direct)


def _cosh_over_sinhc(sig, beta):
    """``cosh(beta*sig)/sinhc(sig)`` for ``beta`` in [0, 1], overflow free."""
    sr = _right(sig)
    big = sr.real > 20
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        direct = np.cosh(beta * sr) / sinhc(sr)
        scaled = (sr * np.exp((beta - 1) * sr) * (1 + np.exp(-2 * beta * sr))
                  / (1 - np.exp(-2 * sr)))
    return np.where(big, scaled, direct)


def _check_poles(sig, floor):
    m = _pole_measure(np.atleast_1d(sig))
    if np.any(m < floor):
        raise PoleProximity(f"sigma within {floor:g} (scaled) of a pole i*k*pi")


def transfer_G(p: SystemParams, s, theta, pole_floor=_POLE_FLOOR):
    """Steady profile ``G(s, theta)`` of the PDE driven by a unit boundary value.

    ``G = sinh(sigma (theta_i - theta)/theta_i) / sinh(sigma)``, so that
    ``G(s, 0) = 1`` and ``G(s, theta_i) = 0``.  Broadcasts over ``s`` and
    ``theta``.

    Raises
    ------
    PoleProximity
        If ``sigma`` is within ``pole_floor`` of some ``i k pi``, ``k != 0``.
    """
    sig = sigma_of(p, s)
    _check_poles(sig, pole_floor)
    frac = (p.theta_i - np.asarray(theta, dtype=float)) / p.theta_i
    out = _sinh_ratio(sig, frac)
    return out[()] if np.ndim(out) == 0 else out


def transfer_H(p: SystemParams, s, pole_floor=_POLE_FLOOR):
    """Flux transfer ``H(s) = dG/dtheta (s, theta_o)``.

    Equal to ``-cosh(sigma beta_o) / (theta_i sinhc(sigma))`` and finite at
    ``s = lambda`` where it takes the value ``-1/theta_i``.
    """
    sig = sigma_of(p, s)
    _check_poles(sig, pole_floor)
    out = -_cosh_over_sinhc(sig, p.beta_o) / p.theta_i
    return out[()] if np.ndim(out) == 0 else out


def h_bar(p: SystemParams, sigma, explicit=True, cond_max=1e12):
    """Flux transfer as a function of ``sigma``.

    With ``explicit=True`` the value is obtained by solving the 2x2 boundary
    system for the exponential coefficients, which is singular at
    ``sigma = 0`` and at the poles; near ``sigma = 0`` the routine switches to
    the limit-safe closed form.  ``explicit=False`` always uses the closed
    form.

    Raises
    ------
    Degenerate
        If the boundary system is singular and no limit form applies.
    """
    sig = complex(sigma)
    ti, ratio = p.theta_i, p.theta_o / p.theta_i
    if _pole_measure(np.array([sig]))[0] < _POLE_FLOOR:
        raise Degenerate("boundary matrix is singular (sigma at a pole)")
    if not explicit or abs(sig) < 1e-3 or abs(sig.real) > 300:
        return complex(-_cosh_over_sinhc(np.array([sig]), p.beta_o)[0] / ti)
    M = np.array([[1.0, 1.0], [np.exp(sig), np.exp(-sig)]])
    if np.linalg.cond(M) > cond_max:
        raise Degenerate("boundary matrix is numerically singular")
    coef = np.linalg.solve(M, np.array([1.0, 0.0], dtype=complex))
    row = np.array([np.exp(sig * ratio), -np.exp(-sig * ratio)])
    return complex(sig / ti * (row @ coef))


# -- characteristic functions -------------------------------------------------

def _dets(p: SystemParams, s):
    """``det(sI - A)`` and ``C adj(sI - A) B`` on an array of points."""
    s = np.asarray(s, dtype=complex)
    flat = s.reshape(-1)
    n = p.n_x
    eye = np.eye(n)
    M = flat[:, None, None] * eye - p.A
    d0 = np.linalg.det(M)
    d1 = np.linalg.det(M - p.B @ p.C)
    return d0.reshape(s.shape), (d0 - d1).reshape(s.shape)


def char_entire(p: SystemParams, s, scaled=False):
    """Entire characteristic function.

    ``E(s) = theta_i sinhc(sigma) det(sI - A) + cosh(sigma beta_o) C adj(sI - A) B``

    which equals ``theta_i sinhc(sigma) Delta(s)``.  Its zeros are the whole
    point spectrum of the coupled system, including the open-loop PDE modes
    that remain when ``C adj(sI - A) B`` vanishes (for example ``B = 0``).

    With ``scaled=True`` the value is multiplied by ``exp(-|Re sigma|)``,
    a positive factor, so phases (and hence winding numbers) are unchanged
    while overflow is avoided for large ``|s|``.
    """
    s = np.asarray(s, dtype=complex)
    sig = _right(sigma_of(p, s))
    d0, cab = _dets(p, s)
    if scaled:
        x = sig.real
        w = np.exp(-2 * sig)
        sh = np.where(np.abs(sig) < _TAYLOR_RADIUS, sinhc(sig) * np.exp(-x),
                      np.exp(1j * sig.imag) * (1 - w) / np.where(sig == 0, 1, 2 * sig))
        b = p.beta_o
        ch = np.exp((b - 1) * x + 1j * b * sig.imag) * (1 + np.exp(-2 * b * sig)) / 2
        out = p.theta_i * sh * d0 + ch * cab
    else:
        out = p.theta_i * sinhc(sig) * d0 + np.cosh(p.beta_o * sig) * cab
    return out[()] if out.ndim == 0 else out


def char_entire_scale(p: SystemParams, s):
    """Envelope of the terms of ``E(s)``, used for relative residuals.

    Built from ``|sinh(sigma)| <= cosh(Re sigma)`` and
    ``|det(sI - A)| <= (|s| + |A|)**n_x`` so that it does not vanish at the
    roots of either term.
    """
    s = np.asarray(s, dtype=complex)
    sig = _right(sigma_of(p, s))
    x = sig.real
    r = np.abs(s) + np.linalg.norm(p.A, 2)
    n = p.n_x
    with np.errstate(over="ignore"):
        env_sh = np.cosh(x) / np.maximum(np.abs(sig), 1.0)
        env_ch = np.cosh(p.beta_o * x)
    bc = np.linalg.norm(p.B) * np.linalg.norm(p.C)
    out = p.theta_i * env_sh * np.maximum(r, 1.0) ** n + env_ch * bc * np.maximum(r, 1.0) ** (n - 1)
    return out[()] if out.ndim == 0 else out


def char_delta(p: SystemParams, s, pole_floor=_POLE_FLOOR):
    """Characteristic function ``Delta(s) = det(sI - A - B H(s) C)``.

    Broadcasts over ``s``.  Raises :class:`PoleProximity` near the PDE poles
    ``lambda - nu (k pi / theta_i)**2``.
    """
    s = np.asarray(s, dtype=complex)
    H = transfer_H(p, s, pole_floor=pole_floor)
    d0, cab = _dets(p, s)
    out = d0 - H * cab
    return out[()] if np.ndim(out) == 0 else out


def char_delta_sigma(p: SystemParams, sigma, explicit=True):
    """``Delta`` written in the ``sigma`` variable.

    ``s = nu (sigma/theta_i)**2 + lambda`` and the flux transfer is taken from
    :func:`h_bar`.  Agrees with ``char_delta`` at the corresponding ``s`` for
    either sign of ``sigma``.
    """
    sig = complex(sigma)
    s = p.nu * (sig / p.theta_i) ** 2 + p.lam
    H = h_bar(p, sig, explicit=explicit)
    d0, cab = _dets(p, np.array([s]))
    return complex(d0[0] - H * cab[0])


def open_loop_pde_spectrum(p: SystemParams, k_max: int):
    """Dirichlet modes ``lambda - nu (k pi / theta_i)**2`` for ``k = 1..k_max``."""
    k = np.arange(1, int(k_max) + 1)
    return p.lam - p.nu * (k * np.pi / p.theta_i) ** 2


def left_half_plane_condition(p: SystemParams, sigma) -> bool:
    """Test for ``Re s < 0`` expressed in the ``sigma`` variable.

    ``Re(s) < 0`` if and only if ``Re(w)**2 - Im(w)**2 < -lambda/nu`` where
    ``w = sigma / theta_i``.
    """
    w = complex(sigma) / p.theta_i
    return w.real ** 2 - w.imag ** 2 < -p.lam / p.nu
