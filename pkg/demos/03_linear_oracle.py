"""Exact linear semigroup of the (u, Gamma) system and the whole-space decay curves.

Run: python3 demos/03_linear_oracle.py
"""
import math

import numpy as np

from oldroyd_lab import harness as h
from oldroyd_lab import linear_oracle as lo

# %% three spectral regimes of the 2x2 symbol
for r in (0.5, math.sqrt(2), 4.0):
    lp_, lm, regime = lo.eigen_branches(r)
    print(f"r={r:.4f}: {regime:12s} lambda = {lp_:.4f}, {lm:.4f}")

# %% semigroup against scipy's matrix exponential
from scipy.linalg import expm

r, t = 1.3, 2.5
print("semigroup vs expm:", np.abs(lo.semigroup_matrix(r, t) - expm(lo.symbol_matrix(r) * t)).max())

# %% decay of ||Lambda^alpha W(t)||_L2 for data saturating B^-s_(2,1)
prof = lo.RadialProfile.saturating(n=2, s=0.75, delta=0.05)
times = h.sample_times(1.0, 1e4, 16)
curve = lo.l2_decay_curve(prof, 0.0, times)
fit = h.fit_decay(times, curve, (1e2, 1e4))
pred = lo.predicted_rate(2, 0.75 + 0.05, 0.0, 2.0)
print(f"fitted slope {fit.slope:.4f} +/- {fit.stderr:.1e}, predicted rate {pred.rate:.4f}")

# %% heat flow comparison: same data, e^{-r^2 t} only
heat = lo.l2_decay_curve(prof, 0.0, times, semigroup="heat")
print("coupled / heat at t=1e4:", curve[-1] / heat[-1])

# %% the admissible parameter window is enforced
try:
    lo.predicted_rate(2, 1.0, 0.0, 2.0)
except lo.WindowError as exc:
    print("rejected:", exc)
