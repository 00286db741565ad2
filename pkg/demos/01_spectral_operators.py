"""Spectral toolkit tour: transforms, Leray projection, Lambda^s and the Gamma variable.

Run: python3 demos/01_spectral_operators.py
"""
import math

import numpy as np

from oldroyd_lab import spectral as sp
from oldroyd_lab.spectral import Grid

# %% a periodic box and a random velocity
g = Grid(2, 64, L=2 * math.pi)
rng = np.random.default_rng(0)
v = sp.random_field(g, "vector", rng, kmax=6)
print("grid", g.n, "x", g.N, "L =", g.L, "dx =", g.dx)

# %% physical round trip
vals = v.physical()
back = sp.transform_forward(g, vals, "vector")
print("round trip error", np.abs(back.coeffs - v.coeffs).max())

# %% Leray projection removes the divergence and is idempotent
pv = sp.leray_project(v)
div = sp.divergence(pv)
print("|div P v| max", np.abs(div.coeffs).max())
print("|P P v - P v| max", np.abs(sp.leray_project(pv).coeffs - pv.coeffs).max())

# %% fractional derivatives compose additively
a = sp.lambda_power(sp.lambda_power(pv, 0.5), -1.5)
b = sp.lambda_power(pv, -1.0)
print("Lambda^0.5 Lambda^-1.5 vs Lambda^-1:", np.abs(a.coeffs - b.coeffs).max())

# %% Gamma = Lambda^-1 P div tau; a stress made from D(u) gives Gamma = -Lambda u / 2
tau = sp.sym_grad(pv)
gam = sp.gamma_from_tau(tau)
ref = sp.lambda_power(pv, 1.0)
print("Gamma(D u) + Lambda u / 2:", np.abs(gam.coeffs + 0.5 * ref.coeffs).max())

# %% Parseval: spectral and physical L2 norms agree
direct = math.sqrt(np.sum(pv.physical() ** 2) * g.dx**2)
print("L2 spectral", sp.l2_norm(pv), "physical", direct)
