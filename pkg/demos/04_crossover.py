"""The k -> mu(D) curve at fixed N next to the predicted crossover k*.

D asks every plus strip's cluster to stay in its triangle.  Short strips
leave the minus phase intact; long strips pull the box into the plus phase
and D fails.  The balance 2k tau(e1) = (N - k) tau(e1+e2) gives k*.

SW chains started from all minus are metastable at this size, so the
measured curve depends on the start; compare with start="plus".

Run:  python demos/04_crossover.py     (writes crossover_demo.csv/json)
"""

from isinggap.harness import ExperimentConfig, run_crossover, summarize

cfg = ExperimentConfig.from_dict(dict(
    kind="crossover-demo", seed=4, output="crossover_demo",
    grid=dict(N=[16], k=[2, 4, 6, 8, 10, 12, 14], eps=[-1], beta=["1.3*beta_c"]),
    chain=dict(sweeps=2000, burn_in=300), start="minus",
    tension=dict(M=32, samples=20000, ladders={"1,0": [2, 4, 6, 8], "1,1": [1, 2, 3, 4, 6]}),
))
s = run_crossover(cfg)
for r in s.rows:
    print(f"k={r['k']:2d}  mu(D) = {r['D']:.3f} +- {r['D_se']:.3f}")
print(summarize(s))
