"""Parameter-grid sweeps over the certification methods.

A sweep file is JSON::

    {
      "base": {"preset": "scalar", "a": 0.0, "b": -1.0},
      "axis1": {"path": "lambda", "min": -5, "max": 5, "steps": 21},
      "axis2": {"path": "A[0][0]", "min": -3, "max": 1, "steps": 21},
      "methods": ["spectral", "lmi", "converse"],
      "lmi_order": 10
    }

``base`` is either a full parameter object (the same keys as a parameter
file) or a preset: ``{"preset": "scalar", "a", "b", "lambda", "nu",
"theta_i"}`` or ``{"preset": "example2", "theta_i", "theta_o_ratio", "nu",
"lambda", "input_sign"}``.  Axis paths are ``A[i][j]``, ``B[i]``, ``C[j]``,
``nu``, ``lambda``, ``theta_i``, ``theta_o`` and ``theta_o_ratio``.  When
``theta_i`` varies and ``theta_o_ratio`` does not, the base ratio is kept.
With ``"scale_B_with_theta_i": true`` (the default for the ``example2``
preset) ``B`` is proportional to ``theta_i``.
"""
from __future__ import annotations

import json
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameters, RDInstabError
from .model import SystemParams, example2, scalar_example
from .spectral import SearchRegion

__all__ = ["Axis", "SweepSpec", "SweepRow", "SweepResult", "run_sweep", "evaluate_point",
           "apply_axes", "heatmap_svg", "METHODS"]

METHODS = ("spectral", "lmi", "converse", "simulate")
_PATH = re.compile(r"^(A)\[(\d+)\]\[(\d+)\]$|^(B|C)\[(\d+)\](?:\[(\d+)\])?$"
                   r"|^(nu|lambda|theta_i|theta_o|theta_o_ratio)$")


def _vector_index(path, m):
    """Entry of the column ``B`` (``B[i]``, ``B[i][0]``) or row ``C`` (``C[j]``, ``C[0][j]``)."""
    i, j = int(m.group(5)), m.group(6)
    if j is None:
        return i
    j = int(j)
    if m.group(4) == "B":
        if j != 0:
            raise InvalidParameters(f"{path}: B is a column")
        return i
    if i != 0:
        raise InvalidParameters(f"{path}: C is a row")
    return j


@dataclass(frozen=True)
class Axis:
    path: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if not _PATH.match(self.path):
            raise InvalidParameters(f"unknown parameter path {self.path!r}")
        if int(self.steps) < 2:
            raise InvalidParameters("each axis needs at least 2 steps")
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise InvalidParameters("axis bounds must be finite")

    @property
    def values(self):
        return np.linspace(float(self.min), float(self.max), int(self.steps))


@dataclass(frozen=True, eq=False)
class SweepSpec:
    base: SystemParams
    axis1: Axis
    axis2: Axis
    methods: tuple = ("spectral", "lmi", "converse")
    lmi_order: int = 10
    lmi_eps: float = 1e-7
    converse_order: int | None = None
    region: SearchRegion | None = None
    sim: dict = field(default_factory=dict)
    scale_B_with_theta_i: bool = False

    def __post_init__(self):
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise InvalidParameters(f"unknown methods {sorted(bad)}")
        n = self.base.n_x
        for ax in (self.axis1, self.axis2):
            m = _PATH.match(ax.path)
            if m.group(1):
                idx = [int(m.group(2)), int(m.group(3))]
            elif m.group(4):
                idx = [_vector_index(ax.path, m)]
            else:
                idx = []
            if any(i >= n for i in idx):
                raise InvalidParameters(f"{ax.path} is out of range for n_x = {n}")
        if self.axis1.path == self.axis2.path:
            raise InvalidParameters("the two axes must vary different parameters")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        try:
            base_d = dict(d["base"])
            preset = base_d.pop("preset", None)
            if preset == "scalar":
                base = scalar_example(base_d.get("a", 0.0), base_d.get("b", -1.0),
                                      lam=base_d.get("lambda", 0.0), nu=base_d.get("nu", 1.0),
                                      theta_i=base_d.get("theta_i", 1.0))
            elif preset == "example2":
                base = example2(theta_i=base_d.get("theta_i", 3.0),
                                theta_o_ratio=base_d.get("theta_o_ratio", 0.7),
                                nu=base_d.get("nu", 1.0), lam=base_d.get("lambda", 1.0),
                                input_sign=base_d.get("input_sign", -1.0))
            elif preset is None:
                base = SystemParams.from_dict(base_d)
            else:
                raise InvalidParameters(f"unknown preset {preset!r}")
            region = d.get("region")
            if region is not None:
                region = SearchRegion(**region)
            co = d.get("converse_order")
            return cls(base=base, axis1=Axis(**d["axis1"]), axis2=Axis(**d["axis2"]),
                       methods=tuple(d.get("methods", ("spectral", "lmi", "converse"))),
                       lmi_order=int(d.get("lmi_order", 10)), lmi_eps=float(d.get("lmi_eps", 1e-7)),
                       converse_order=None if co is None else int(co), region=region,
                       sim=dict(d.get("sim", {})),
                       scale_B_with_theta_i=bool(d.get("scale_B_with_theta_i", preset == "example2")))
        except KeyError as exc:
            raise InvalidParameters(f"sweep spec is missing {exc}") from exc
        except TypeError as exc:
            raise InvalidParameters(f"malformed sweep spec: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "SweepSpec":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise InvalidParameters(f"malformed JSON: {exc}") from exc


def apply_axes(spec: SweepSpec, v1: float, v2: float) -> SystemParams:
    """Parameters at grid point ``(v1, v2)``."""
    b = spec.base
    A, B, C = b.A.copy(), b.B.copy(), b.C.copy()
    scal = {"nu": b.nu, "lambda": b.lam, "theta_i": b.theta_i, "theta_o": b.theta_o}
    ratio = b.theta_o / b.theta_i
    ratio_set = theta_o_set = False
    for ax, v in ((spec.axis1, v1), (spec.axis2, v2)):
        m = _PATH.match(ax.path)
        if m.group(1):
            A[int(m.group(2)), int(m.group(3))] = v
        elif m.group(4) == "B":
            B[_vector_index(ax.path, m), 0] = v
        elif m.group(4) == "C":
            C[0, _vector_index(ax.path, m)] = v
        else:
            name = m.group(7)
            if name == "theta_o_ratio":
                ratio, ratio_set = float(v), True
            else:
                scal[name] = float(v)
                theta_o_set |= name == "theta_o"
    if spec.scale_B_with_theta_i:
        B = B * scal["theta_i"] / b.theta_i
    if ratio_set or not theta_o_set:
        scal["theta_o"] = ratio * scal["theta_i"]
    return SystemParams(A=A, B=B, C=C, nu=scal["nu"], lam=scal["lambda"],
                        theta_i=scal["theta_i"], theta_o=min(scal["theta_o"], scal["theta_i"]))


@dataclass(frozen=True)
class SweepRow:
    axis1: float
    axis2: float
    verdicts: dict
    rightmost: complex | None = None
    sim_rate: float | None = None
    runtimes_ms: dict = field(default_factory=dict)

    def csv(self, methods):
        cells = [repr(float(self.axis1)), repr(float(self.axis2))]
        for m in ("spectral", "lmi", "converse"):
            cells.append(self.verdicts.get(m, "") if m in methods else "")
        cells.append("" if self.sim_rate is None or "simulate" not in methods
                     else repr(float(self.sim_rate)))
        return ",".join(cells)


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    rows: list

    CSV_HEADER = "axis1,axis2,spectral,lmi,converse,sim_rate"

    def to_csv(self, path=None) -> str:
        text = "\n".join([self.CSV_HEADER] + [r.csv(self.spec.methods) for r in self.rows]) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def grid(self, method):
        n1, n2 = self.spec.axis1.steps, self.spec.axis2.steps
        return np.array([r.verdicts.get(method, "") for r in self.rows], dtype=object).reshape(n1, n2)


def evaluate_point(spec: SweepSpec, v1: float, v2: float) -> SweepRow:
    """Run every requested method at one grid point; failures become ``I``."""
    from . import lyap_converse, lyap_direct, simulator, spectral, basis

    verdicts, times = {}, {}
    rightmost, rate = None, None
    try:
        p = apply_axes(spec, v1, v2)
    except InvalidParameters:
        return SweepRow(v1, v2, {m: "I" for m in spec.methods if m != "simulate"})
    for m in spec.methods:
        t0 = time.perf_counter()
        try:
            if m == "spectral":
                v = spectral.verdict_spectral(p, spec.region)
                verdicts[m] = v.code
                if v.unstable:
                    rightmost = complex(v.evidence["rightmost"])
            elif m == "lmi":
                verdicts[m] = lyap_direct.verdict_direct(p, spec.lmi_order, spec.lmi_eps).code
            elif m == "converse":
                if not p.is_scalar():
                    verdicts[m] = "I"
                elif spec.converse_order:
                    b = basis.build(spec.converse_order, p.theta_i)
                    verdicts[m] = lyap_converse.verdict_converse_projected(p, b).code
                else:
                    verdicts[m] = lyap_converse.verdict_converse_scalar(p).code
            elif m == "simulate":
                cfg = simulator.SimConfig(**spec.sim)
                rate = simulator.growth_rate(simulator.simulate(p, cfg))
        except (RDInstabError, ArithmeticError, ValueError, np.linalg.LinAlgError):
            if m != "simulate":
                verdicts[m] = "I"
        times[m] = 1e3 * (time.perf_counter() - t0)
    return SweepRow(float(v1), float(v2), verdicts, rightmost, rate, times)


def _eval_star(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Evaluate the grid in axis1-major order, optionally in parallel."""
    pts = [(spec, float(a), float(b)) for a in spec.axis1.values for b in spec.axis2.values]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as ex:
            rows = list(ex.map(_eval_star, pts, chunksize=max(1, len(pts) // (4 * jobs))))
    else:
        rows = [_eval_star(a) for a in pts]
    return SweepResult(spec, rows)


_COLORS = {"U": "#d62728", "S": "#2ca02c", "I": "#b0b0b0", "": "#ffffff"}


def heatmap_svg(result: SweepResult, path=None, cell=14) -> str:
    """Standalone SVG with one panel per verdict method."""
    spec = result.spec
    methods = [m for m in ("spectral", "lmi", "converse") if m in spec.methods]
    n1, n2 = spec.axis1.steps, spec.axis2.steps
    pad, top, gap = 50, 30, 30
    pw, ph = n1 * cell, n2 * cell
    width = pad + len(methods) * (pw + gap) + 90
    height = top + ph + 50
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for k, m in enumerate(methods):
        x0 = pad + k * (pw + gap)
        g = result.grid(m)
        out.append(f'<text x="{x0 + pw / 2}" y="{top - 10}" text-anchor="middle">{m}</text>')
        for i in range(n1):
            for j in range(n2):
                y = top + (n2 - 1 - j) * cell
                out.append(f'<rect x="{x0 + i * cell}" y="{y}" width="{cell}" height="{cell}" '
                           f'fill="{_COLORS.get(g[i, j], "#ffffff")}" stroke="white" stroke-width="0.5"/>')
        out.append(f'<text x="{x0 + pw / 2}" y="{top + ph + 30}" text-anchor="middle">'
                   f'{spec.axis1.path} [{spec.axis1.min:g}, {spec.axis1.max:g}]</text>')
    out.append(f'<text x="14" y="{top + ph / 2}" transform="rotate(-90 14 {top + ph / 2})" '
               f'text-anchor="middle">{spec.axis2.path} [{spec.axis2.min:g}, {spec.axis2.max:g}]</text>')
    lx = pad + len(methods) * (pw + gap)
    for q, (code, label) in enumerate((("U", "unstable"), ("S", "stable indicated"), ("I", "inconclusive"))):
        y = top + q * 20
        out.append(f'<rect x="{lx}" y="{y}" width="12" height="12" fill="{_COLORS[code]}"/>')
        out.append(f'<text x="{lx + 16}" y="{y + 10}">{code}: {label}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
