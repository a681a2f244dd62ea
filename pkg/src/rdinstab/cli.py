"""Command-line front end.

Exit codes: 0 on completion, 2 for invalid input, 3 for a numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from .errors import InvalidParameters, NumericalFailure
from .model import SystemParams

log = logging.getLogger("rdinstab")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _load_params(path) -> SystemParams:
    try:
        with open(path) as fh:
            return SystemParams.from_dict(json.load(fh))
    except OSError as exc:
        raise InvalidParameters(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameters(f"malformed JSON in {path}: {exc}") from exc


def _write_verdict(v, t0, out):
    text = v.to_json(runtime_ms=1e3 * (time.perf_counter() - t0), indent=2)
    with open(out, "w") as fh:
        fh.write(text + "\n")
    print(f"{v.method}: {v.code}")


def cmd_spectrum(args):
    from . import spectral

    p = _load_params(args.params)
    reg = spectral.default_region(p)
    kw = {"re_min": args.re_min, "re_max": args.re_max, "im_min": args.im_min,
          "im_max": args.im_max, "refine_tol": args.tol}
    kw = {k: v for k, v in kw.items() if v is not None}
    region = spectral.SearchRegion(**{**{"re_min": reg.re_min, "re_max": reg.re_max,
                                         "im_min": reg.im_min, "im_max": reg.im_max}, **kw})
    roots = spectral.find_roots(p, region)
    lines = ["re,im,residual,multiplicity,seed_source"] + [r.csv_row() for r in roots]
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{len(roots)} roots in [{region.re_min:g}, {region.re_max:g}] x "
          f"[{region.im_min:g}, {region.im_max:g}]")
    return EXIT_OK


def cmd_lmi(args):
    from .lyap_direct import verdict_direct

    p = _load_params(args.params)
    if args.order < 4:
        print(f"warning: basis order {args.order} is below 4; the test is unlikely to certify",
              file=sys.stderr)
    t0 = time.perf_counter()
    _write_verdict(verdict_direct(p, args.order, args.eps), t0, args.out)
    return EXIT_OK


def cmd_converse(args):
    from . import basis, lyap_converse

    p = _load_params(args.params)
    t0 = time.perf_counter()
    if args.order is None:
        v = lyap_converse.verdict_converse_scalar(p)
    else:
        v = lyap_converse.verdict_converse_projected(p, basis.build(args.order, p.theta_i))
    _write_verdict(v, t0, args.out)
    return EXIT_OK


def cmd_simulate(args):
    from . import simulator

    p = _load_params(args.params)
    cfg = simulator.SimConfig(M=args.M, dt=args.dt, t_end=args.t_end)
    traj = simulator.simulate(p, cfg)
    traj.to_csv(args.out)
    if args.z_out:
        traj.z_to_csv(args.z_out)
    print(f"growth rate {simulator.growth_rate(traj):.6g}")
    return EXIT_OK


def cmd_sweep(args):
    from . import sweep

    spec = sweep.SweepSpec.from_json(args.spec)
    res = sweep.run_sweep(spec, jobs=args.jobs)
    res.to_csv(args.out)
    if args.heatmap:
        sweep.heatmap_svg(res, args.heatmap)
    n = len(res.rows)
    counts = {m: sum(r.verdicts.get(m) == "U" for r in res.rows)
              for m in ("spectral", "lmi", "converse") if m in spec.methods}
    print(f"{n} points; unstable counts {counts}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdinstab",
                                 description="Instability certificates for ODE/reaction-diffusion loops.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", help="locate characteristic roots in a rectangle")
    s.add_argument("--params", required=True)
    for name in ("--re-min", "--re-max", "--im-min", "--im-max", "--tol"):
        s.add_argument(name, type=float, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("lmi", help="direct Lyapunov LMI test")
    s.add_argument("--params", required=True)
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--eps", type=float, default=1e-7)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lmi)

    s = sub.add_parser("converse", help="converse Lyapunov positivity test")
    s.add_argument("--params", required=True)
    s.add_argument("--order", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_converse)

    s = sub.add_parser("simulate", help="time-domain simulation")
    s.add_argument("--params", required=True)
    s.add_argument("--M", type=int, default=256)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-end", type=float, default=20.0)
    s.add_argument("--z-out", default=None, help="optional CSV of z snapshots")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="evaluate methods over a parameter grid")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--heatmap", default=None)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidParameters as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
