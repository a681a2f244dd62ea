"""Stability maps over two parameter planes, written as CSV and SVG.

Usage: python3 demos/stability_maps.py [outdir] [jobs]
"""
import os
import sys

from rdinstab import sweep

out = sys.argv[1] if len(sys.argv) > 1 else "maps"
jobs = int(sys.argv[2]) if len(sys.argv) > 2 else (os.cpu_count() or 1)
os.makedirs(out, exist_ok=True)

specs = {
    "scalar_lambda_a": {
        "base": {"preset": "scalar", "a": 0.0, "b": -1.0},
        "axis1": {"path": "lambda", "min": -5, "max": 5, "steps": 21},
        "axis2": {"path": "A[0][0]", "min": -3, "max": 1, "steps": 21},
        "methods": ["spectral", "lmi", "converse"],
    },
    "example2_geometry": {
        "base": {"preset": "example2"},
        "axis1": {"path": "theta_i", "min": 0.5, "max": 4, "steps": 21},
        "axis2": {"path": "theta_o_ratio", "min": 0.5, "max": 1, "steps": 21},
        "methods": ["spectral", "lmi"],
    },
}

for name, d in specs.items():
    res = sweep.run_sweep(sweep.SweepSpec.from_dict(d), jobs=jobs)
    res.to_csv(os.path.join(out, name + ".csv"))
    sweep.heatmap_svg(res, os.path.join(out, name + ".svg"))
    g = {m: res.grid(m) for m in d["methods"]}
    unstable = {m: int((v == "U").sum()) for m, v in g.items()}
    print(f"{name}: {len(res.rows)} points, unstable {unstable}")
