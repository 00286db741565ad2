"""Dyadic blocks and Besov norms on the lattice.

Run: python3 demos/02_littlewood_paley.py
"""
import math

import numpy as np

from oldroyd_lab import littlewood_paley as lp
from oldroyd_lab import spectral as sp
from oldroyd_lab.spectral import Grid

# %% the radial cutoff and the dyadic bump
r = np.linspace(0, 3, 7)
print("r     ", r)
print("theta ", lp.theta(r).round(4))
print("phi   ", lp.phi(r).round(4))

# %% partition of the lattice
g = Grid(2, 128, L=16 * math.pi)
part = lp.make_partition(g, j0=0)
print("resolvable j range", part.j_min, "..", part.j_max)
total = sum(part.table(j) for j in part.js)
print("sum of blocks on k != 0: min", total[g.kmag > 0].min(), "max", total[g.kmag > 0].max())

# %% block norms of a random field and its Besov norms
rng = np.random.default_rng(1)
u = sp.leray_project(sp.random_field(g, "vector", rng, kmax=8))
norms = lp.block_norms(u, part, p=2.0)
for j, val in norms.items():
    if val > 0:
        print(f"  j={j:3d}  ||Delta_j u||_L2 = {val:.4e}")
for s in (-0.5, 0.0, 0.5):
    print(f"B^{s}_(2,1) = {lp.besov_norm(u, lp.BesovSpec(s, 2.0), part):.6e}")

# %% low (j <= j0) and high (j >= j0 - 1) sides overlap on two blocks
low = lp.besov_norm(u, lp.BesovSpec(0.0, 2.0, "low"), part)
high = lp.besov_norm(u, lp.BesovSpec(0.0, 2.0, "high"), part)
overlap = sum(v for j, v in norms.items() if part.j0 - 1 <= j <= part.j0)
print("low + high - overlap", low + high - overlap, "full", lp.besov_norm(u, lp.BesovSpec(0.0, 2.0), part))

# %% product and commutator estimate ratios (bounded by a constant)
v = sp.random_field(g, "scalar", rng, kmax=8)
w = sp.random_field(g, "scalar", rng, kmax=8)
print("product ratio", lp.lemma_ratio_product(v, w, 0.5, 0.5, 2.0, 2.0, part))
print("commutator ratio", lp.lemma_ratio_commutator(u, v, 0.5, 2.0, 2.0, part))
