"""Gegenbauer polynomials and harmonic dimension counts.

The building block for everything else in this library is the family of
degree-k zonal polynomials P_k on [-1, 1], normalized so P_k(1) = 1, together
with the dimension N(d, k) of the space of degree-k spherical harmonics in
R^d.  This script evaluates the polynomials by the stable forward recurrence,
checks them against classical special cases, and prints dimension tables.
"""

import numpy as np

from sphattn import cumulative_dim, gegenbauer_all, harmonic_dim

print("Dimension N(d, k) of degree-k spherical harmonics")
print("k:        " + "".join(f"{k:>8d}" for k in range(7)))
for d in (2, 3, 4, 6, 8):
    row = [harmonic_dim(d, k) for k in range(7)]
    print(f"d = {d}:   " + "".join(f"{v:>8d}" for v in row))

print("\nCumulative dimension (kernel rank when channels 0..k are kept)")
for d in (3, 6, 8):
    print(f"d = {d}: ", [cumulative_dim(d, k) for k in range(5)])

print("\nP_k(t) for d = 3 (classical Legendre), t = 0.5:")
print(gegenbauer_all(0.5, 3, 5))

print("\nd = 2 reduces to Chebyshev: P_k(cos th) = cos(k th)")
theta = 0.7
vals = gegenbauer_all(np.cos(theta), 2, 5)
print("recurrence:", np.round(vals, 10))
print("cosines:   ", np.round([np.cos(k * theta) for k in range(6)], 10))

print("\nEndpoint normalization P_k(1) = 1 in any dimension:")
print("d = 9:", gegenbauer_all(1.0, 9, 6))

print("\nRecurrence residual on random arguments (should be ~1e-16):")
rng = np.random.default_rng(0)
t = rng.uniform(-1, 1, 1000)
P = gegenbauer_all(t, 5, 8)
worst = 0.0
for k in range(1, 8):
    d = 5
    resid = t * P[k] - k / (2 * k + d - 2) * P[k - 1] - (k + d - 2) / (2 * k + d - 2) * P[k + 1]
    worst = max(worst, np.max(np.abs(resid)))
print(f"max residual over degrees 1..7: {worst:.2e}")
