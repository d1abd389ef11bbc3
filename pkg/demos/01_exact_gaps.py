"""Exact spectral gaps on boxes small enough to enumerate, next to the bounds.

The generator of heat-bath Glauber dynamics is built over all 2^|Lambda|
states.  Its gap is the second-smallest eigenvalue of -A.  Any test function
gives an upper bound (Rayleigh quotient), and so does the indicator of any
event S through mu(inner boundary of S) / (mu(S)(1 - mu(S))).

Run:  python demos/01_exact_gaps.py
"""

import numpy as np

from isinggap.events import in_D
from isinggap.geometry import build_rect, constant_boundary, eta
from isinggap.spectral import build_generator, event_masses, exact_gap, indicator_bound, rayleigh_bound, state_mask

# a single spin relaxes at rate c(+) + c(-) = 1 whatever the field
g = build_rect((0, 0), (0, 0))
for value in (-1, 0, 1):
    gap = exact_gap(build_generator(g, constant_boundary(g, value), 0.8)).gap
    print(f"single site, boundary {value:+d}: gap {gap:.12f}")

# plus boundary on growing rectangles: the gap shrinks as beta grows
print("\nplus boundary, gap by box and beta")
for w, h in [(2, 2), (3, 3), (4, 3), (4, 4)]:
    g = build_rect((0, w - 1), (0, h - 1))
    row = []
    for beta in (0.2, 0.44, 0.8):
        r = exact_gap(build_generator(g, constant_boundary(g, 1), beta))
        row.append(f"{r.gap:.5f} ({r.solver})")
    print(f"  {w}x{h}: " + "  ".join(row))

# the event D on the 3x3 box: exact masses, indicator bound, Rayleigh bound of 1_D
print("\nevent D on N=1, k=1")
e = eta(1, 1, 0)
g = e.geometry
for beta in (0.3, 0.6, 1.2):
    gen = build_generator(g, e, beta)
    gap = exact_gap(gen).gap
    mask = state_mask(g, lambda s: in_D(s, e))
    mD, mdD = event_masses(g, e, beta, mask, gen.mu)
    print(f"  beta {beta}: gap {gap:.4f}  Rayleigh(1_D) {rayleigh_bound(gen, mask.astype(float)):.4f}  "
          f"indicator {indicator_bound(g, e, beta, mask, mu=gen.mu):.4f}  mu(D) {mD:.3e}  ratio {mdD / mD:.3f}")

# random test functions never beat the gap
g = build_rect((0, 2), (0, 2))
gen = build_generator(g, constant_boundary(g, 1), 0.7)
gap = exact_gap(gen).gap
rng = np.random.default_rng(0)
best = min(rayleigh_bound(gen, rng.standard_normal(gen.dim)) for _ in range(200))
print(f"\n3x3 plus box at beta 0.7: gap {gap:.5f}, best of 200 random Rayleigh quotients {best:.5f}")
