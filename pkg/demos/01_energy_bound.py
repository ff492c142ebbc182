"""From a set of macroscopic stresses to the optimal rank-3 laminate.

Two load cases mixed by chi: pure uniaxial stresses at chi = 0, pure
deviatoric plus shear at chi = 1. For each mix we find the trigonometric
moments minimizing the complementary energy, rebuild a three-family laminate
with those moments, and report its layer directions and widths.

    python3 demos/01_energy_bound.py
"""
import numpy as np

from rank3cell.experiments import build_loadset_examples123
from rank3cell.laminate import MaterialPair, complementary_energy
from rank3cell.moments import optimize_moments
from rank3cell.reconstruct import reconstruct

mat = MaterialPair(f=0.5)
print(f"{'chi':>4} {'bound':>9}   moments (m1..m4)                  normals [deg]        widths mu")
for chi in (0.0, 0.3, 0.6, 1.0):
    loads = build_loadset_examples123(chi)
    sol = optimize_moments(loads, mat)
    lam = reconstruct(sol.m, mat.f)
    # the laminate reproduces the optimal moments, hence the bound itself
    assert abs(complementary_energy(lam.moments, loads, mat) / sol.energy - 1) < 1e-8
    m = np.round(sol.m.as_array(), 3)
    print(f"{chi:4.1f} {sol.energy:9.4f}   {m}   {np.round(np.degrees(lam.theta), 1)}   {np.round(lam.mu, 3)}")
