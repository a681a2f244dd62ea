"""Two-state plant: the real unstable pole and its eigenfunction."""
import numpy as np

from rdinstab import example2
from rdinstab import lyap_direct, spectral
from rdinstab.model import char_delta

p = example2()
r = spectral.rightmost_root(p)
print(f"rightmost root {r.s:.12f}, |Delta| = {abs(char_delta(p, r.s)):.1e}, "
      f"seed {r.seed_source.value}")

ef = spectral.eigenfunction(p, r.s)
theta = np.linspace(0, p.theta_i, 7)
# eigenvectors carry an arbitrary phase; rotate the largest state entry onto the real axis
ph = ef.X[np.argmax(np.abs(ef.X))]
ph = ph / abs(ph)
print("X:       ", np.round((ef.X / ph).real, 6))
print("Z(theta):", np.round((ef.Z(theta) / ph).real, 6))
print("residuals:", {k: f"{v:.1e}" for k, v in ef.residuals().items()})

# flipping the input sign moves every root into the left half-plane
q = example2(input_sign=+1)
print(f"input sign +1: rightmost root {spectral.rightmost_root(q).s:.6f}")

for n in (4, 6, 8, 10):
    v = lyap_direct.verdict_direct(p, n)
    print(f"LMI order {n:2d}: {v.code}")
