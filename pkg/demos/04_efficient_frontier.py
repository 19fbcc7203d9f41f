#!/usr/bin/env python3
"""Efficient frontiers by investment horizon.

Sweeps risk aversion for horizons of 10 to 50 years under both premium
regimes.  With slowly mean-reverting premia, longer horizons enjoy strictly
better risk-return trade-offs; with fast reversion the frontiers collapse
onto each other except for the bond-yield intercept.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from glidepath import MarketState, efficient_frontier
from glidepath.analytics import mean_at_vol
from glidepath.cli import builtin_params_path, load_params

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

HORIZONS = (10.0, 20.0, 30.0, 50.0)
GRID = [float("inf")] + list(np.logspace(3, -3, 50))

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharex=True, sharey=True)
for ax, name in zip(axes, ("slow", "fast")):
    p = load_params(builtin_params_path(name))
    for horizon in HORIZONS:
        state = MarketState(r_t=0.02, x_t=0.04, t=0.0, s=horizon)
        pts = efficient_frontier(p, state, GRID)
        vols = [q.ann_vol for q in pts]
        means = [q.ann_mean for q in pts]
        np.savetxt(
            OUT / f"frontier_{name}_{int(horizon)}y.csv",
            np.column_stack([[q.nu for q in pts], vols, means]),
            delimiter=",",
            header="nu,ann_vol,ann_mean",
            comments="",
        )
        ax.plot(vols, means, label=f"{int(horizon)}y")
    ax.set_title(f"{name} mean reversion")
    ax.set_xlabel("annualized volatility")
    ax.set_xlim(0, 0.12)
axes[0].set_ylabel("annualized mean log return")
axes[0].legend()
fig.tight_layout()
fig.savefig(OUT / "efficient_frontiers.png", dpi=130)
print(f"wrote {OUT}/efficient_frontiers.png and frontier CSVs")

print("\nAnnualized mean at a matched 5% annualized volatility:")
print("horizon     slow      fast")
for horizon in HORIZONS:
    state = MarketState(r_t=0.02, x_t=0.04, t=0.0, s=horizon)
    ms = mean_at_vol(load_params(builtin_params_path("slow")), state, 0.05)
    mf = mean_at_vol(load_params(builtin_params_path("fast")), state, 0.05)
    print(f"{int(horizon):4d}y    {ms:7.4%}  {mf:7.4%}")
print("\nThe slow-reversion column rises with horizon; the fast column does not.")
