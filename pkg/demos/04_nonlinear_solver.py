"""Pseudo-spectral Oldroyd-B solver: energy law, linear limit and a short decay run.

Run: python3 demos/04_nonlinear_solver.py
"""
import math

import numpy as np
from scipy.integrate import simpson

from oldroyd_lab import linear_oracle as lo
from oldroyd_lab import solver as so
from oldroyd_lab import spectral as sp
from oldroyd_lab.spectral import Grid

# %% random divergence-free data, unit energy scale
g = Grid(2, 64)
rng = np.random.default_rng(2)
u = sp.leray_project(sp.random_field(g, "vector", rng, kmax=4))
tau = sp.random_field(g, "sym", rng, kmax=4)
state = so.initial_state(g, u.with_coeffs(u.coeffs / sp.l2_norm(u)),
                         tau.with_coeffs(tau.coeffs / sp.l2_norm(tau)), b=0.0)

# %% energy law: d/dt E + ||grad u||^2 = 0 for b = 0
ctl = so.StepControl(dt=1e-3)
rec0 = so.diagnostics(state)
D = [rec0.dissipation]
for _ in range(100):
    state = so.step(state, ctl)
    rec = so.diagnostics(state)
    D.append(rec.dissipation)
dissipated = simpson(D, dx=ctl.dt)
print(f"E(0)={rec0.energy:.6f}  E(T)={rec.energy:.6f}  int D={dissipated:.6f}")
print("relative energy-law residual", abs(rec.energy - rec0.energy + dissipated) / rec0.energy)
print("divergence residual", rec.div_residual)

# %% tiny data follow the exact linear semigroup mode by mode
eps = 1e-6
s0 = so.initial_state(g, u.with_coeffs(eps * u.coeffs / np.abs(u.coeffs).max()))
s1 = so.advance_to(s0, 0.5, so.StepControl(0.01, order=4))
M = lo.semigroup_matrix(g.kmag, 0.5)
exact_u = M[..., 0, 0] * s0.u.coeffs
print("linear-limit mismatch / eps:", np.abs(s1.u.coeffs - exact_u).max() / eps)

# %% short decay run from saturating data in a larger box
g = Grid(2, 64, L=8 * math.pi)
state = so.saturating_initial_data(g, s=0.75, A=0.1)
spec = so.DiagnosticSpec(norms=((0.0, 2.0),), s=0.75)
print("smallness X0 =", so.smallness(state, spec))
for t in (0.5, 1.0, 2.0, 4.0):
    state = so.advance_to(state, t, so.StepControl(dt=0.05))
    rec = so.diagnostics(state, spec)
    print(f"t={t:4.1f}  ||(u,Gamma)||_L2={rec.norms[('pair', 0.0, 2.0)]:.4e}  "
          f"B^-s={rec.besov_negs:.4e}")
