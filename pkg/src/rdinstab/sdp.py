"""Dense semidefinite feasibility with verified outcomes.

A problem is a list of affine pencils ``G_j(y) = G0_j + sum_i y_i G_ij`` that
must all be positive semidefinite, together with linear equalities
``E y = f``.  :func:`solve` maximizes the common margin ``t`` with
``G_j(y) >= t I`` and classifies the problem as

* ``FEASIBLE``   -- a point ``y`` whose margin, recomputed by an independent
  symmetric eigendecomposition, is at least ``eps``;
* ``INFEASIBLE`` -- PSD multipliers ``Z_j`` with ``sum_j <Z_j, G_ij> = 0`` on
  the equality-reduced variables and ``sum_j <Z_j, G0_j> <= -eps trace(Z)``
  (Farkas alternative), re-verified after projection;
* ``UNKNOWN``    -- anything else.

The interior-point iterations are delegated to ``cvxopt.solvers.sdp``.  Both
definite answers are re-derived from raw data, so a solver failure can only
produce ``UNKNOWN``.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidParameters

__all__ = ["PencilConstraint", "FeasibilityStatus", "FeasibilityOutcome", "solve", "dump_sdpa"]

_SYM_TOL = 1e-14
_PSD_TOL = 1e-10
_EQ_TOL = 1e-8


class FeasibilityStatus(str, enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


@dataclass(frozen=True, eq=False)
class PencilConstraint:
    """Affine symmetric pencil ``G0 + sum_i y_i G[i] >= 0``.

    Parameters
    ----------
    G0 : ndarray, shape (d, d)
    G : ndarray, shape (k, d, d)
        One symmetric matrix per scalar decision variable.
    """

    G0: np.ndarray
    G: np.ndarray
    name: str = ""

    def __post_init__(self):
        G0 = np.atleast_2d(np.asarray(self.G0, dtype=float))
        G = np.asarray(self.G, dtype=float)
        if G.ndim == 2 and G0.shape == (1, 1):
            G = G.reshape(-1, 1, 1)
        if G.ndim != 3 or G.shape[1:] != G0.shape or G0.shape[0] != G0.shape[1]:
            raise InvalidParameters(f"pencil shapes do not match: G0 {G0.shape}, G {G.shape}")
        scale = 1.0 + max(np.abs(G0).max(initial=0), np.abs(G).max(initial=0))
        if (np.abs(G0 - G0.T).max(initial=0) > _SYM_TOL * scale
                or np.abs(G - G.transpose(0, 2, 1)).max(initial=0) > _SYM_TOL * scale):
            raise InvalidParameters(f"pencil {self.name!r} is not symmetric")
        object.__setattr__(self, "G0", (G0 + G0.T) / 2)
        object.__setattr__(self, "G", (G + G.transpose(0, 2, 1)) / 2)

    @property
    def dim(self) -> int:
        return self.G0.shape[0]

    @property
    def nvar(self) -> int:
        return self.G.shape[0]

    def __call__(self, y):
        return self.G0 + np.tensordot(np.asarray(y, dtype=float), self.G, axes=1)


@dataclass(frozen=True, eq=False)
class FeasibilityOutcome:
    """Result of :func:`solve`.

    ``primal_margin`` is the verified smallest eigenvalue over all pencils at
    ``y`` (``nan`` without a candidate point).  ``dual_certificate`` holds
    the verified multipliers, one per pencil, normalized to unit total trace,
    and ``dual_margin`` equals ``-sum_j <Z_j, G0_j>`` for them after the
    equality reduction.
    """

    status: FeasibilityStatus
    y: np.ndarray | None = None
    primal_margin: float = float("nan")
    dual_certificate: list | None = None
    dual_margin: float = float("nan")
    t_star: float = float("nan")
    iterations: int = 0
    solver_status: str = ""
    runtime_s: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status is FeasibilityStatus.FEASIBLE

    @property
    def infeasible(self):
        return self.status is FeasibilityStatus.INFEASIBLE


def _check(constraints, equalities):
    if not constraints:
        raise InvalidParameters("at least one pencil is required")
    k = constraints[0].nvar
    if any(c.nvar != k for c in constraints):
        raise InvalidParameters("pencils disagree on the number of variables")
    if equalities is None:
        E, f = np.zeros((0, k)), np.zeros(0)
    else:
        E, f = equalities
        E = np.atleast_2d(np.asarray(E, dtype=float))
        f = np.atleast_1d(np.asarray(f, dtype=float))
        if E.shape[1] != k or E.shape[0] != f.size:
            raise InvalidParameters("equality system has wrong shape")
    return k, E, f


def _reduce(constraints, E, f):
    """Eliminate ``E y = f`` by ``y = y_p + N u``."""
    k = constraints[0].nvar
    if E.shape[0]:
        y_p, *_ = linalg.lstsq(E, f)
        if np.linalg.norm(E @ y_p - f) > 1e-9 * (1 + np.linalg.norm(f)):
            raise InvalidParameters("equality constraints are inconsistent")
        N = linalg.null_space(E)
    else:
        y_p, N = np.zeros(k), np.eye(k)
    reduced = [(c(y_p), np.tensordot(N.T, c.G, axes=1)) for c in constraints]
    # directions that move no pencil make the interior-point system singular
    M = _inner_rows(reduced)
    if M.shape[0]:
        U, sv, _ = np.linalg.svd(M, full_matrices=False)
        keep = U[:, sv > 1e-12 * max(sv.max(initial=0.0), 1e-300)] if sv.size else U[:, :0]
        if keep.shape[1] < M.shape[0]:
            N = N @ keep
            reduced = [(G0, np.tensordot(keep.T, Gr, axes=1)) for G0, Gr in reduced]
    return y_p, N, reduced


def _inner_rows(reduced):
    """Stacked inner-product rows ``<., G_k>`` acting on concatenated vec(Z_j)."""
    total = sum(G0.size for G0, _ in reduced)
    rows = [np.concatenate([Gr[i].ravel() for _, Gr in reduced]) for i in range(reduced[0][1].shape[0])]
    return np.array(rows).reshape(len(rows), total)


def _split(zvec, dims):
    out, pos = [], 0
    for d in dims:
        out.append(zvec[pos:pos + d * d].reshape(d, d))
        pos += d * d
    return out


def _psd_part(Z):
    w, V = np.linalg.eigh((Z + Z.T) / 2)
    return (V * np.clip(w, 0, None)) @ V.T


def _verify_dual(reduced, Zs, eps, iters=60):
    """Project candidate multipliers onto {Z >= 0} n {<Z,G_k> = 0} and verify.

    Returns ``(ok, Zs, margin, info)``.
    """
    dims = [G0.shape[0] for G0, _ in reduced]
    Zs = [_psd_part(Z) for Z in Zs]
    tr = sum(np.trace(Z) for Z in Zs)
    if not tr > 0:
        return False, Zs, float("nan"), {"reason": "zero multipliers"}
    Zs = [Z / tr for Z in Zs]
    A = _inner_rows(reduced)
    gnorm = np.linalg.norm(A, axis=1) if A.size else np.zeros(0)
    if A.shape[0]:
        Ap = np.linalg.pinv(A, rcond=1e-13)
        for _ in range(iters):
            z = np.concatenate([Z.ravel() for Z in Zs])
            z = z - Ap @ (A @ z)
            Zs = [(Z + Z.T) / 2 for Z in _split(z, dims)]
            lo = min(np.linalg.eigvalsh(Z)[0] for Z in Zs)
            if lo >= -_PSD_TOL * (1 + max(np.linalg.norm(Z, 2) for Z in Zs)) / 10:
                break
            Zs = [_psd_part(Z) for Z in Zs]
        z = np.concatenate([Z.ravel() for Z in Zs])
        eq_res = np.abs(A @ z)
    else:
        eq_res = np.zeros(0)
    tr = sum(np.trace(Z) for Z in Zs)
    if not tr > 0:
        return False, Zs, float("nan"), {"reason": "multipliers vanished"}
    Zs = [Z / tr for Z in Zs]
    eq_res = eq_res / tr
    min_eigs = [np.linalg.eigvalsh(Z)[0] for Z in Zs]
    psd_ok = all(m >= -_PSD_TOL * (1 + np.linalg.norm(Z, 2)) for m, Z in zip(min_eigs, Zs))
    eq_ok = bool(np.all(eq_res <= _EQ_TOL * (1 + gnorm)))
    margin = -sum(np.sum(Z * G0) for Z, (G0, _) in zip(Zs, reduced))
    info = {"min_eig": float(min(min_eigs)), "eq_residual": float(eq_res.max(initial=0.0)),
            "psd_ok": psd_ok, "eq_ok": eq_ok}
    return psd_ok and eq_ok and margin >= eps, Zs, float(margin), info


def _primal_margin(constraints, y):
    return min(float(np.linalg.eigvalsh(c(y))[0]) for c in constraints)


def solve(constraints, equalities=None, eps=1e-7, max_iters=100, time_limit=None,
          tol=(1e-9, 1e-8, 1e-10, 1e-7, 1e-6)) -> FeasibilityOutcome:
    """Decide ``eps``-feasibility of a family of pencils.

    Parameters
    ----------
    constraints : list of PencilConstraint
    equalities : tuple (E, f), optional
        Linear equalities ``E y = f`` on the decision variables.
    eps : float
        Required margin for either definite answer.
    max_iters : int
        Interior-point iteration budget per attempt.
    time_limit : float, optional
        Seconds; exceeding it turns the outcome into ``UNKNOWN``.
    tol : float or sequence of float
        Backend tolerances (absolute, relative and feasibility).  With a
        sequence the attempts run in order and the first verified definite
        answer is returned.

    Returns
    -------
    FeasibilityOutcome
    """
    t0 = time.perf_counter()
    k, E, f = _check(constraints, equalities)
    y_p, N, reduced = _reduce(constraints, E, f)
    tols = [tol] if np.isscalar(tol) else list(tol)
    out = None
    for tl in tols:
        out = _attempt(constraints, y_p, N, reduced, eps, max_iters, tl, t0)
        if out.status is not FeasibilityStatus.UNKNOWN:
            break
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            break
    details = dict(out.details, tol=tl)
    return FeasibilityOutcome(out.status, y=out.y, primal_margin=out.primal_margin,
                              dual_certificate=out.dual_certificate, dual_margin=out.dual_margin,
                              t_star=out.t_star, iterations=out.iterations,
                              solver_status=out.solver_status,
                              runtime_s=time.perf_counter() - t0, details=details)


def _attempt(constraints, y_p, N, reduced, eps, max_iters, tol, t0):
    import cvxopt
    from cvxopt import solvers

    nu = N.shape[1]
    # variables (u, t): maximize t subject to G0 + sum u_k G_k - t I >= 0, t <= 1
    c = cvxopt.matrix(np.r_[np.zeros(nu), -1.0])
    Gs, hs = [], []
    for G0, Gr in reduced:
        d = G0.shape[0]
        cols = [-Gr[i].ravel(order="F") for i in range(nu)] + [np.eye(d).ravel(order="F")]
        Gs.append(cvxopt.matrix(np.column_stack(cols)))
        hs.append(cvxopt.matrix(G0))
    Gl = cvxopt.matrix(np.r_[np.zeros(nu), 1.0].reshape(1, -1))
    hl = cvxopt.matrix([1.0])
    opts = {"show_progress": False, "maxiters": int(max_iters),
            "abstol": tol, "reltol": tol, "feastol": tol}
    try:
        sol = solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs, options=opts)
    except (ValueError, ArithmeticError) as exc:
        return FeasibilityOutcome(FeasibilityStatus.UNKNOWN, solver_status=f"breakdown: {exc}")
    status = sol["status"]
    iters = int(sol.get("iterations", 0) or 0)
    if sol["x"] is None:
        return FeasibilityOutcome(FeasibilityStatus.UNKNOWN, solver_status=status, iterations=iters)
    x = np.array(sol["x"]).ravel()
    u, t_star = x[:nu], float(x[nu])
    y = y_p + N @ u
    margin = _primal_margin(constraints, y)
    common = dict(y=y, primal_margin=margin, t_star=t_star, iterations=iters, solver_status=status)

    if margin >= eps:
        return FeasibilityOutcome(FeasibilityStatus.FEASIBLE, **common)
    if t_star <= -eps and sol["zs"] is not None:
        Zs = [np.array(Z) for Z in sol["zs"]]
        ok, Zs, dual_margin, info = _verify_dual(reduced, Zs, eps)
        if ok:
            return FeasibilityOutcome(FeasibilityStatus.INFEASIBLE, dual_certificate=Zs,
                                      dual_margin=dual_margin, details=info, **common)
        return FeasibilityOutcome(FeasibilityStatus.UNKNOWN, dual_margin=dual_margin,
                                  details=info, **common)
    return FeasibilityOutcome(FeasibilityStatus.UNKNOWN, **common)


def dump_sdpa(path, constraints, equalities=None):
    """Write the feasibility problem in sparse SDPA format.

    The file encodes ``sum_i y_i F_i - F_0 >= 0`` with ``F_0 = -G0`` and
    ``F_i = G_i``; equalities become a diagonal (LP) block holding both
    ``E y - f >= 0`` and ``f - E y >= 0``.  Each entry line is
    ``mat block row col value`` with 1-based indices, upper triangle only.
    """
    k, E, f = _check(constraints, equalities)
    blocks = [c.dim for c in constraints]
    lp = 2 * E.shape[0]
    sizes = blocks + ([-lp] if lp else [])
    lines = [f"{k} = mDIM", f"{len(sizes)} = nBLOCK", " ".join(str(s) for s in sizes),
             " ".join(["0"] * k)]

    def emit(mat, blk, M):
        iu = np.triu_indices(M.shape[0])
        for r, cidx in zip(*iu):
            v = M[r, cidx]
            if v != 0:
                lines.append(f"{mat} {blk} {r + 1} {cidx + 1} {v:.17g}")

    for b, c in enumerate(constraints, start=1):
        emit(0, b, -c.G0)
        for i in range(k):
            emit(i + 1, b, c.G[i])
    if lp:
        b = len(constraints) + 1
        m = E.shape[0]
        for r in range(m):
            if f[r] != 0:
                lines.append(f"0 {b} {r + 1} {r + 1} {f[r]:.17g}")
                lines.append(f"0 {b} {m + r + 1} {m + r + 1} {-f[r]:.17g}")
            for i in range(k):
                if E[r, i] != 0:
                    lines.append(f"{i + 1} {b} {r + 1} {r + 1} {E[r, i]:.17g}")
                    lines.append(f"{i + 1} {b} {m + r + 1} {m + r + 1} {-E[r, i]:.17g}")
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text
