"""
Fibering maps and the Nehari projection
=======================================

Along a ray ``t -> J(t u)`` the energy is a sum of powers of ``t``, so it
rises, peaks once and falls to minus infinity. The peak is the Nehari
projection.
"""

# %%
import numpy as np

from choquard_lab import DEFAULT_SPEC, ComplexField, ProblemParams, make_grid, sample_potentials
from choquard_lab.energy import fibering_scan, nehari_project, nehari_residual

g = make_grid(3, 32, 12.0)
pot = sample_potentials(g, DEFAULT_SPEC)
params = ProblemParams(3, 1.0, 4.5, 1.0, "A")
u = ComplexField(g, np.exp(-g.radius() ** 2 / 2) * np.exp(0.3j * g.mesh()[0]))

tab = fibering_scan(u, params, pot)
t, v = nehari_project(u, params, pot)
print(f"scan maximum at t = {tab.t_max:.10f}, projection t_u = {t:.10f}")
print(f"J(t u) turns negative at t = {tab.sign_change:.4f}")
print("residual after projection:", nehari_residual(v, params, pot))

# %%
for k in range(0, 1000, 111):
    print(f"  t = {tab.t[k]:9.4f}   J(tu) = {tab.values[k]: .6e}")
