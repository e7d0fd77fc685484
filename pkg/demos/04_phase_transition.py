"""Miniature recovery phase transition (a few minutes of compute).

Sweeps the measurement count s for 14x11 rank-2 instances and tabulates
recovery probability per method. The same experiment at larger scale is
available from the command line:

    kyfan2k sweep --s-values 75,95,115,135,320 --trials 25 --seed 1729 --out results/

which also renders the probability and timing curves as SVG.
"""

import numpy as np

from kyfan2k import TrialConfig, run_sweep

m, n, r = 14, 11, 2
d_r = r * (m + n - r)
grid = [int(np.ceil(f * d_r)) for f in (1.1, 1.4, 1.8, 2.4)] + [m * n]
print(f"{m}x{n} rank-{r} instances, d_r = {d_r}, s grid = {grid}")

report = run_sweep(
    m, n, grid, trials=8,
    methods=("nuclear", "k2-nuclear", "k2-zero"),
    cfg=TrialConfig(), master_seed=7, workers=2, r=r,
)

methods = ("nuclear", "k2-nuclear", "k2-zero")
cells = {(c.method, c.s): c for c in report.cells}
header = "s      " + "".join(f"{mth:>14s}" for mth in methods)
print("\nrecovery probability")
print(header)
for s in grid:
    row = f"{s:<7d}" + "".join(f"{cells[(mth, s)].recovery_prob:14.2f}" for mth in methods)
    print(row)

print("\nmean outer iterations (recovered trials)")
print(header)
for s in grid:
    row = f"{s:<7d}" + "".join(f"{cells[(mth, s)].mean_outer_iters_recovered:14.1f}" for mth in methods)
    print(row)

print("\nThe K2 columns saturate close to d_r while nuclear needs far more")
print("measurements; extra iterations vanish as s grows.")
