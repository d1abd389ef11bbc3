"""Dual surface tension from connectivity decay, and what it predicts.

In a wired box the dual of the FK configuration is a subcritical free FK
model, so P(0* <-> (n d)*) decays like exp(-n tau(d)).  The ladder
tau_n = -log P_n / n decreases towards tau (subadditivity); the last
point is reported with an error widened by the spread of the last two.

Sample sizes here are small so the script runs in about a minute.

Run:  python demos/03_surface_tension.py
"""

import math

from isinggap.ising import BETA_C
from isinggap.tension import NormModel, check_equivnorm, crossover_k_error, estimate_tensions, normprop_excess

beta = 1.3 * BETA_C
t = estimate_tensions(beta, {(1, 0): (2, 4, 6, 8), (1, 1): (1, 2, 3, 4, 6)}, M=32, samples=20000, seed=11)
for d, tt in t.items():
    ladder = "  ".join(f"n={n}: {v:.3f}" for n, v in zip(tt.ladder, tt.tau_n))
    print(f"direction {d}: {ladder}  ->  tau {tt.tau:.3f} +- {tt.tau_se:.3f}")
print(f"(exact horizontal tension at this beta: {2 * beta + math.log(math.tanh(beta)):.3f};"
      " short ladders overestimate it through the log n / n correction)")

eq = check_equivnorm(t[(1, 0)], t[(1, 1)])
print(f"\ntau(e1+e2) / (sqrt2 tau(e1)) = {eq.ratio:.3f} +- {eq.stderr:.3f}, bracket "
      f"[{eq.lower:.3f}, {eq.upper:.3f}]: {'ok' if eq.passed else 'violated'}")

# minimal excess of a detour through z over admissible grid points, for test norms and the sampled Ising norm
sampled = NormModel.from_samples({d: tt.tau for d, tt in t.items()})
for name, norm in [("l1", NormModel.analytic("l1")), ("l2", NormModel.analytic("l2")),
                   ("linf", NormModel.analytic("linf")), ("ising", sampled)]:
    ex, z = normprop_excess(norm, 20, 5, 2, return_argmin=True)
    print(f"minimal excess {name:5s}: {ex:.4f} at z=({z[0]:.1f}, {z[1]:.1f})")

k, se = crossover_k_error(32, t[(1, 0)].tau, t[(1, 0)].tau_se, t[(1, 1)].tau, t[(1, 1)].tau_se)
print(f"\npredicted crossover at N=32: k* = {k:.1f} +- {se:.1f}")
