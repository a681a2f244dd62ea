"""Characteristic roots, spectral verdicts and eigenfunctions.

Roots are located with the entire characteristic function ``E(s)`` from
:mod:`rdinstab.model` rather than ``Delta(s)`` itself: ``E`` has no poles,
so contours never need to dodge the PDE modes, and its zero set is the full
point spectrum (the PDE modes included when the loop is open).

Counting uses the argument principle on rectangles with adaptive boundary
sampling; isolation is by recursive bisection; polishing is Newton's method
with a four-point holomorphic difference for the derivative.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import brentq

from .errors import (BoundaryZero, ConvergenceFailure, DegenerateRoot, InvalidParameters,
                     NumericalFailure)
from .model import (SystemParams, _cosh_over_sinhc, _pole_measure, _sinh_ratio, char_delta,
                    char_entire, char_entire_scale, sigma_of, sinhc)
from .verdict import Verdict, inconclusive, stable_indicated, unstable

__all__ = [
    "SearchRegion", "SeedSource", "RootRecord", "RealAxisScan", "Eigenfunction",
    "count_roots", "find_roots", "newton_polish", "asymptotic_seed", "real_axis_unstable_root",
    "default_region", "verdict_spectral", "eigenfunction", "rightmost_root",
    "scalar_threshold", "inverse_b_max",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchRegion:
    """Closed rectangle ``[re_min, re_max] x [im_min, im_max]`` in the s-plane.

    ``refine_tol`` is the Newton target for the relative residual
    ``|E(s)| / scale(s)``.
    """

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    max_roots: int = 200
    refine_tol: float = 1e-12

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidParameters("region bounds must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise InvalidParameters(f"degenerate region {vals}")

    def contains(self, s, slack=0.0) -> bool:
        w = slack * max(self.re_max - self.re_min, self.im_max - self.im_min)
        return (self.re_min - w <= s.real <= self.re_max + w
                and self.im_min - w <= s.imag <= self.im_max + w)

    def grown(self, delta) -> "SearchRegion":
        return replace(self, re_min=self.re_min - delta, re_max=self.re_max + delta,
                       im_min=self.im_min - delta, im_max=self.im_max + delta)

    @property
    def center(self) -> complex:
        return complex((self.re_min + self.re_max) / 2, (self.im_min + self.im_max) / 2)

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)


class SeedSource(str, enum.Enum):
    GRID = "grid"
    ASYMPTOTIC = "asymptotic"
    REAL_AXIS = "real_axis"


@dataclass(frozen=True)
class RootRecord:
    """A polished characteristic root.

    ``residual`` is the relative residual ``|E(s)|/scale(s)`` of the entire
    characteristic function; ``delta_abs`` is ``|Delta(s)|`` when ``s`` is
    not a PDE mode (``nan`` otherwise).
    """

    s: complex
    residual: float
    multiplicity: int = 1
    seed_source: SeedSource = SeedSource.GRID
    delta_abs: float = float("nan")
    iterations: int = 0

    def csv_row(self):
        return (f"{self.s.real!r},{self.s.imag!r},{self.residual!r},"
                f"{self.multiplicity},{self.seed_source.value}")


# -- entire function helpers ----------------------------------------------------

def _E(p, s):
    return char_entire(p, s)


def _derivative(p, s, h=None):
    """Four-point holomorphic difference; error O(h**4)."""
    if h is None:
        h = 1e-4 * (1 + abs(s))
    pts = s + h * np.array([1, -1, 1j, -1j])
    f = _E(p, pts)
    return ((f[0] - f[1]) + (f[2] - f[3]) / 1j) / (4 * h)


def _rel_residual(p, s):
    return float(abs(_E(p, s)) / char_entire_scale(p, s))


def _delta_abs(p, s):
    try:
        return float(abs(char_delta(p, s)))
    except NumericalFailure:
        return float("nan")


def newton_polish(p: SystemParams, s0, multiplicity=1, tol=1e-12, max_iter=60):
    """Newton iteration on ``E`` from ``s0``.

    Returns ``(s, iterations, residual)`` where ``residual`` is the relative
    residual.  Stops once the step falls below ``1e-15 (1 + |s|)`` or the
    residual reaches ``tol``; an extra step is taken after the first hit.

    Raises
    ------
    ConvergenceFailure
        If the residual target is not met within ``max_iter`` iterations.
    """
    s = complex(s0)
    m = int(multiplicity)
    hit = False
    for it in range(1, max_iter + 1):
        f = complex(_E(p, s))
        d = complex(_derivative(p, s))
        if not np.isfinite(f) or not np.isfinite(d):
            break
        if d == 0:
            if f == 0:
                return s, it, 0.0
            break
        step = m * f / d
        s = s - step
        if abs(step) <= 1e-15 * (1 + abs(s)) or _rel_residual(p, s) <= tol:
            if hit or abs(step) <= 1e-15 * (1 + abs(s)):
                res = _rel_residual(p, s)
                if res <= tol:
                    return s, it, res
                break
            hit = True
    res = _rel_residual(p, s) if np.isfinite(s) else float("inf")
    if res <= tol:
        return s, max_iter, res
    raise ConvergenceFailure(f"Newton from {s0} stopped at {s} with residual {res:.3g}")


def asymptotic_seed(p: SystemParams, k: int) -> complex:
    """Point ``nu (i k pi / theta_i)**2 + lambda`` near which high modes lie."""
    return complex(p.nu * (1j * k * np.pi / p.theta_i) ** 2 + p.lam)


# -- argument principle -------------------------------------------------------

def _edge_phase(p, a, b, max_depth=48, max_points=400000):
    """Total phase change of ``E`` along the segment ``a -> b``.

    The initial sampling density follows the variation of ``sigma`` along
    the edge (``E`` behaves like ``exp(sigma)`` times a polynomial).  An
    interval is accepted when its phase step is below pi/2 and agrees with
    the sum over its two halves; all other intervals are bisected, level by
    level.  Returns ``(dphase, min_rel_abs)``.
    """
    probe = a + (b - a) * np.linspace(0.0, 1.0, 257)
    var = float(np.sum(np.abs(np.diff(np.asarray(sigma_of(p, probe))))))
    n0 = int(min(20000, 16 + 2 * p.n_x + 6 * var))
    t = np.linspace(0.0, 1.0, n0 + 1)
    v = char_entire(p, a + (b - a) * t, scaled=True)
    vmax = float(np.max(np.abs(v)))
    # pending intervals: left node index pairs resolved through arrays
    lo_t, hi_t, lo_v, hi_v = t[:-1], t[1:], v[:-1], v[1:]
    total, vmin, npts = 0.0, float(np.min(np.abs(v))), n0 + 1
    for _ in range(max_depth + 1):
        if lo_t.size == 0:
            return total, vmin / max(vmax, np.finfo(float).tiny)
        if np.any(lo_v == 0) or np.any(hi_v == 0):
            raise BoundaryZero("characteristic function vanishes on the contour")
        mid_t = 0.5 * (lo_t + hi_t)
        mid_v = char_entire(p, a + (b - a) * mid_t, scaled=True)
        npts += mid_t.size
        if npts > max_points:
            break
        vmax = max(vmax, float(np.max(np.abs(mid_v))))
        vmin = min(vmin, float(np.min(np.abs(mid_v))))
        if np.any(mid_v == 0):
            raise BoundaryZero("characteristic function vanishes on the contour")
        d = np.angle(hi_v / lo_v)
        d1 = np.angle(mid_v / lo_v)
        d2 = np.angle(hi_v / mid_v)
        ok = (np.abs(d) < np.pi / 2) & (np.abs(d1 + d2 - d) < 1e-8)
        total += float(np.sum(d[ok]))
        bad = ~ok
        lo_t, hi_t, lo_v, hi_v, mid_t, mid_v = (x[bad] for x in (lo_t, hi_t, lo_v, hi_v, mid_t, mid_v))
        lo_t, hi_t = np.concatenate([lo_t, mid_t]), np.concatenate([mid_t, hi_t])
        lo_v, hi_v = np.concatenate([lo_v, mid_v]), np.concatenate([mid_v, hi_v])
    raise BoundaryZero("phase cannot be resolved; zero close to the contour")


def _winding(p, r: SearchRegion):
    z = [complex(r.re_min, r.im_min), complex(r.re_max, r.im_min),
         complex(r.re_max, r.im_max), complex(r.re_min, r.im_max)]
    total, minrel = 0.0, np.inf
    for a, b in zip(z, z[1:] + z[:1]):
        d, m = _edge_phase(p, a, b)
        total += d
        minrel = min(minrel, m)
    w = total / (2 * np.pi)
    if abs(w - round(w)) > 0.1 or minrel < 1e-13:
        raise BoundaryZero(f"winding number {w:.4f} is not an integer (min |E| ratio {minrel:.2g})")
    return int(round(w))


def count_roots(p: SystemParams, region: SearchRegion) -> int:
    """Number of characteristic roots inside ``region``, with multiplicity.

    If the characteristic function nearly vanishes on the boundary, the
    rectangle is grown or shrunk by up to ``1e-6`` (relative to its size)
    before :class:`BoundaryZero` is raised.
    """
    try:
        return _winding(p, region)
    except BoundaryZero:
        pass
    for rel in (1e-9, -1e-9, 1e-8, -1e-8, 1e-7, -1e-7, 1e-6, -1e-6):
        try:
            return _winding(p, region.grown(rel * (1 + region.size)))
        except (BoundaryZero, InvalidParameters):
            continue
    raise BoundaryZero(f"could not move the contour off a zero for region {region}")


# -- isolation ------------------------------------------------------------------

def _split(r: SearchRegion):
    # split slightly off-center so symmetric roots (e.g. real ones) avoid the cut
    f = 0.4817
    if (r.re_max - r.re_min) >= (r.im_max - r.im_min):
        x = r.re_min + f * (r.re_max - r.re_min)
        return replace(r, re_max=x), replace(r, re_min=x)
    y = r.im_min + f * (r.im_max - r.im_min)
    return replace(r, im_max=y), replace(r, im_min=y)


def _record(p, s, m, res, src, it, tol):
    if abs(s.imag) <= 1e-13 * (1 + abs(s)):
        s = complex(s.real, 0.0)
    return RootRecord(s=s, residual=res, multiplicity=m, seed_source=src,
                      delta_abs=_delta_abs(p, s), iterations=it)


def _isolate(p, r, count, tol, min_size, out, budget):
    if count <= 0 or len(out) >= budget:
        return
    if count == 1 or r.size < min_size:
        try:
            s, it, res = newton_polish(p, r.center, multiplicity=count, tol=tol)
            if r.contains(s, slack=1e-6):
                out.append(_record(p, s, count, res, SeedSource.GRID, it, tol))
                return
        except ConvergenceFailure as exc:
            if r.size < min_size:
                log.warning("root cluster at %s not polished: %s", r.center, exc)
                return
        if r.size < min_size:
            log.warning("Newton left the isolating box near %s", r.center)
            return
    a, b = _split(r)
    ca = count_roots(p, a)
    cb = count_roots(p, b)
    if ca + cb != count:
        log.warning("count mismatch in %s: %d + %d != %d", r, ca, cb, count)
    _isolate(p, a, ca, tol, min_size, out, budget)
    _isolate(p, b, cb, tol, min_size, out, budget)


def _dedupe(roots, tol=1e-8):
    out = []
    for r in roots:
        if not any(abs(r.s - q.s) <= tol * (1 + abs(q.s)) for q in out):
            out.append(r)
    return out


def find_roots(p: SystemParams, region: SearchRegion, asymptotic_k: int = 20):
    """All characteristic roots in ``region``, sorted by (Re, Im) descending.

    Parameters
    ----------
    asymptotic_k : int
        Newton is additionally started from :func:`asymptotic_seed` for
        ``k = 1..asymptotic_k`` when the seed lies in the region; roots found
        this way that bisection missed are appended with
        ``seed_source = "asymptotic"``.
    """
    total = count_roots(p, region)
    out = []
    min_size = 1e-9 * (1 + region.size)
    _isolate(p, region, total, region.refine_tol, min_size, out, region.max_roots)
    for k in range(1, int(asymptotic_k) + 1):
        s0 = asymptotic_seed(p, k)
        if not region.contains(s0):
            continue
        try:
            s, it, res = newton_polish(p, s0, tol=region.refine_tol)
        except ConvergenceFailure:
            continue
        if region.contains(s):
            out.append(_record(p, s, 1, res, SeedSource.ASYMPTOTIC, it, region.refine_tol))
    roots = _dedupe(out)
    found = sum(r.multiplicity for r in roots)
    if found != total:
        log.warning("found %d roots but the winding number is %d", found, total)
    roots.sort(key=lambda r: (-r.s.real, -r.s.imag))
    return roots


# -- real axis ------------------------------------------------------------------

@dataclass(frozen=True)
class RealAxisScan:
    """Result of :func:`real_axis_unstable_root`.

    ``root`` is the largest real root found in ``[0, s_max]`` (``None`` if
    none); ``sign_at_zero`` is the sign of ``Delta(0)`` (equivalently of
    ``E(0)`` up to the positive factor ``theta_i sinhc``).
    """

    root: float | None
    roots: tuple = ()
    sign_at_zero: int = 0


def real_axis_unstable_root(p: SystemParams, s_max: float, n_grid: int = 2000) -> RealAxisScan:
    """Real non-negative characteristic roots by sign changes of ``E``.

    ``E`` is real on the real axis and has no poles, so sign changes bracket
    roots directly; each bracket is refined by Brent's method.  Local minima
    of ``|E|`` between samples are refined as well so that close pairs of
    roots are not stepped over.
    """
    if not s_max > 0:
        raise InvalidParameters("s_max must be positive")
    s = np.linspace(0.0, float(s_max), int(n_grid) + 1)
    f = char_entire(p, s).real
    sign0 = int(np.sign(f[0]) * np.sign(sinhc(sigma_of(p, 0.0)).real)) if f[0] != 0 else 0
    brackets = []
    for j in range(len(s) - 1):
        if f[j] == 0:
            brackets.append((s[j], s[j]))
        elif f[j] * f[j + 1] < 0:
            brackets.append((s[j], s[j + 1]))
    # possible double crossings hidden between samples
    a = np.abs(f)
    for j in range(1, len(s) - 1):
        if a[j] < a[j - 1] and a[j] < a[j + 1] and f[j - 1] * f[j + 1] > 0 and f[j] * f[j - 1] > 0:
            sub = np.linspace(s[j - 1], s[j + 1], 65)
            g = char_entire(p, sub).real
            for q in range(64):
                if g[q] * g[q + 1] < 0:
                    brackets.append((sub[q], sub[q + 1]))
    if f[-1] == 0:
        brackets.append((s[-1], s[-1]))
    fun = lambda x: float(char_entire(p, x).real)  # noqa: E731
    roots = []
    for lo, hi in brackets:
        roots.append(lo if lo == hi else brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    roots = sorted(set(roots))
    return RealAxisScan(root=roots[-1] if roots else None, roots=tuple(roots), sign_at_zero=sign0)


# -- verdicts ---------------------------------------------------------------------

def default_region(p: SystemParams) -> SearchRegion:
    """Heuristic search rectangle for verdicts.

    The right edge is ``max(10, 4 g)`` where ``g`` bounds the growth a root
    could have from the ODE part, the reaction term and the coupling gain.
    """
    g = (np.linalg.norm(p.A, 2) + max(p.lam, 0.0)
         + np.linalg.norm(p.B) * np.linalg.norm(p.C) * (1 / p.theta_i + 1 / np.sqrt(p.nu)))
    re_max = max(10.0, 4 * g)
    im_max = max(50.0, re_max)
    return SearchRegion(-1.0, re_max, -im_max, im_max)


def verdict_spectral(p: SystemParams, region: SearchRegion | None = None,
                     verdict_margin: float = 1e-9) -> Verdict:
    """Spectral instability test.

    Searches the part of ``region`` with ``Re s >= -verdict_margin``.  A root
    with ``Re s >= verdict_margin`` gives ``UNSTABLE``; no root at all gives
    ``STABLE_INDICATED`` for that rectangle only; a root within the margin
    of the imaginary axis, or a numerical failure, gives ``INCONCLUSIVE``.
    """
    if region is None:
        region = default_region(p)
    if region.re_max <= 0:
        raise InvalidParameters("region has no right half-plane portion")
    right = replace(region, re_min=max(region.re_min, -verdict_margin))
    ev = {"region": [right.re_min, right.re_max, right.im_min, right.im_max]}
    try:
        n = count_roots(p, right)
        if n == 0:
            return stable_indicated("spectral", count=0, **ev)
        roots = find_roots(p, right, asymptotic_k=0)
    except NumericalFailure as exc:
        return inconclusive("spectral", error=str(exc), **ev)
    ev.update(count=n, roots=[r.s for r in roots])
    if any(r.s.real >= verdict_margin for r in roots):
        return unstable("spectral", rightmost=roots[0].s, **ev)
    return inconclusive("spectral", marginal=True, **ev)


def rightmost_root(p: SystemParams, region: SearchRegion | None = None) -> RootRecord:
    """Root with the largest real part in ``region`` (default: a wide box)."""
    if region is None:
        d = default_region(p)
        region = replace(d, re_min=-max(20.0, 4 * abs(p.lam) + 10 * p.nu / p.theta_i ** 2))
    roots = find_roots(p, region)
    if not roots:
        raise ConvergenceFailure("no root in the search region")
    return roots[0]


# -- eigenfunctions ---------------------------------------------------------------

def _adjugate(M):
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=M.dtype)
    cof = np.empty_like(M)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(M, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T


@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """Eigenvector ``(X, Z)`` of the coupled generator for the root ``s``.

    ``Z`` and its derivatives are callables on ``[0, theta_i]``.  The pair
    has unit norm ``|X|**2 + int |Z|**2``.
    """

    s: complex
    X: np.ndarray
    params: SystemParams = field(repr=False)
    coef: complex = field(repr=False, default=1.0)
    mode: str = "coupled"

    def _f(self, theta):
        return (self.params.theta_i - np.asarray(theta, dtype=float)) / self.params.theta_i

    def _sig(self):
        return complex(np.asarray(sigma_of(self.params, self.s)))

    def Z(self, theta):
        sig, f = self._sig(), self._f(theta)
        if self.mode == "pde":
            return self.coef * np.sinh(sig * f)
        return self.coef * _sinh_ratio(np.asarray(sig), f)

    def dZ(self, theta):
        sig, f = self._sig(), self._f(theta)
        ti = self.params.theta_i
        if self.mode == "pde":
            return -self.coef * sig / ti * np.cosh(sig * f)
        sr = sig if sig.real >= 0 else -sig
        return -self.coef * _cosh_over_sinhc(np.asarray(sr), f) / ti

    def d2Z(self, theta):
        return (self._sig() / self.params.theta_i) ** 2 * self.Z(theta)

    def norm(self, m=200):
        x, w = legendre.leggauss(m)
        th = self.params.theta_i / 2 * (x + 1)
        return math.sqrt(float(np.vdot(self.X, self.X).real)
                         + float(self.params.theta_i / 2 * np.sum(w * np.abs(self.Z(th)) ** 2)))

    def residuals(self, n_samples=201) -> dict:
        """Sup-norm residuals of the eigenvalue problem and boundary conditions."""
        p = self.params
        th = np.linspace(0.0, p.theta_i, n_samples)
        ode = self.s * self.X - p.A @ self.X - (p.B[:, 0] * self.dZ(p.theta_o))
        pde = self.s * self.Z(th) - p.nu * self.d2Z(th) - p.lam * self.Z(th)
        return {
            "ode": float(np.max(np.abs(ode))),
            "pde": float(np.max(np.abs(pde))),
            "bc0": float(abs(self.Z(0.0) - (p.C[0] @ self.X))),
            "bc1": float(abs(self.Z(p.theta_i))),
        }


def eigenfunction(p: SystemParams, root) -> Eigenfunction:
    """Eigenvector of the coupled system at a simple root.

    Parameters
    ----------
    root : RootRecord or complex

    Raises
    ------
    DegenerateRoot
        If ``C adj(sI - A) B`` vanishes at a root that is not a PDE mode.
    """
    if isinstance(root, RootRecord):
        if root.multiplicity != 1:
            raise DegenerateRoot("eigenfunction requires a simple root")
        s = root.s
    else:
        s = complex(root)
    M = s * np.eye(p.n_x) - p.A.astype(complex)
    adjB = _adjugate(M) @ p.B[:, 0]
    cab = complex(p.C[0] @ adjB)
    sig = complex(np.asarray(sigma_of(p, s)))
    near_pole = _pole_measure(np.array([sig]))[0] < 1e-3
    scale = np.linalg.norm(adjB) * np.linalg.norm(p.C) + abs(np.linalg.det(M)) + 1.0
    if abs(cab) <= 1e-12 * scale:
        if not near_pole:
            raise DegenerateRoot(f"C adj(sI - A) B vanishes at s = {s}")
        X = np.zeros(p.n_x, dtype=complex)
        ef = Eigenfunction(s, X, p, 1j, mode="pde")
    elif near_pole:
        X = 1j * adjB * np.sinh(sig) / cab
        ef = Eigenfunction(s, X, p, 1j, mode="pde")
    else:
        X = 1j * adjB / cab
        ef = Eigenfunction(s, X, p, 1j, mode="coupled")
    nrm = ef.norm()
    return Eigenfunction(s, ef.X / nrm, p, ef.coef / nrm, mode=ef.mode)


# -- scalar helpers ------------------------------------------------------------------

def scalar_threshold(b, lam=0.0, nu=1.0, theta_i=1.0) -> float:
    """Critical ``a`` of the scalar plant: ``Delta(0) = 0`` at ``a = b / (theta_i sinhc(r theta_i))``.

    ``r = sqrt(-lambda/nu)``; for ``a`` above this value (and ``b < 0``)
    ``Delta(0) < 0`` and a real positive root exists.
    """
    r = np.sqrt(complex(-lam / nu))
    val = complex(b / (theta_i * sinhc(r * theta_i)))
    return float(val.real)


def inverse_b_max(lam=0.0, nu=1.0, theta_i=1.0, method="complex_step", h=1e-20) -> float:
    """Slope ``-d/ds [1 / (theta_i sinhc(sigma(s)))]`` at ``s = 0``.

    ``method="complex_step"`` differentiates via ``Im f(i h) / h`` using
    ``sinhc(sqrt(q))`` as an entire function of ``q = sigma**2``;
    ``method="closed_form"`` evaluates the derivative analytically.  At
    ``lambda = 0`` the value is ``theta_i / (6 nu)``.
    """
    if method == "complex_step":
        q = theta_i ** 2 * (1j * h - lam) / nu
        return float(-(1.0 / (theta_i * _sinhc_sq(q))).imag / h)
    if method == "closed_form":
        x = complex(np.sqrt(complex(-lam / nu))) * theta_i
        if abs(x) < 1e-4:
            ratio = 1 / 3 - 7 * x * x / 90
        else:
            ratio = (np.cosh(x) - sinhc(x)) / np.sinh(x) ** 2
        return float((theta_i / (2 * nu) * ratio).real)
    raise InvalidParameters(f"unknown method {method!r}")


def _sinhc_sq(q):
    """``sinhc(sqrt(q))`` as an entire function of ``q``."""
    q = complex(q)
    if abs(q) < 1e-2:
        return 1 + q / 6 * (1 + q / 20 * (1 + q / 42 * (1 + q / 72)))
    return complex(sinhc(np.sqrt(q)))
