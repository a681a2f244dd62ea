"""Scalar loop: where does the interconnection lose stability?

Compares the analytic threshold on ``a`` with a bisection on the spectral
verdict, then checks both Lyapunov routes on either side of it.
"""
import numpy as np

from rdinstab import scalar_example
from rdinstab import lyap_converse, lyap_direct, simulator, spectral

b, lam = -1.0, -1.0
a_star = spectral.scalar_threshold(b, lam=lam)
print(f"analytic threshold a* = {a_star:.10f}")

lo, hi = a_star - 1, a_star + 1
while hi - lo > 1e-8:
    mid = 0.5 * (lo + hi)
    if spectral.verdict_spectral(scalar_example(mid, b, lam=lam)).unstable:
        hi = mid
    else:
        lo = mid
print(f"bisected threshold  = {0.5 * (lo + hi):.10f}")

for a in (a_star - 0.5, a_star + 0.5):
    p = scalar_example(a, b, lam=lam)
    root = spectral.rightmost_root(p).s
    rate = simulator.growth_rate(simulator.simulate(p, simulator.SimConfig(M=128, t_end=10)))
    direct = lyap_direct.verdict_direct(p, 8)
    conv = lyap_converse.verdict_converse_scalar(p)
    print(f"a = {a:+.3f}: rightmost root {root.real:+.4f}, "
          f"energy rate {rate:+.4f} (2 Re s = {2 * root.real:+.4f}), "
          f"LMI {direct.code}, converse {conv.code}")

print("1/b_max at lambda = 0:", spectral.inverse_b_max(0.0), "(1/6 =", 1 / 6, ")")
print("1/b_max over lambda:",
      np.round([spectral.inverse_b_max(l) for l in (-2, -1, 0, 1, 2)], 6))
