import numpy as np

from geothermo.contact import induce_metric
from geothermo.geometry import riemann, scalar_curvature_at
from geothermo.vdw import VdwParams, phase_boundary_energy, singular_locus, vdw_metric_closed, vdw_system

params = VdwParams(a=1, b=1, Lambda=1)
system = vdw_system(params)          # S(U, V) = 3/2 ln(U + a/V) + ln(V - b)
g = induce_metric(system)            # pullback of the first-order GTD metric
closed = vdw_metric_closed(params)   # same metric written out by hand

print("g at (2, 3):\n", g.numeric((2.0, 3.0)))
print("closed form agrees:", np.allclose(g.numeric((2.0, 3.0)), closed.numeric((2.0, 3.0)), rtol=1e-12))

curv = riemann(closed)
for f, m in curv.singular_factors:   # zeros of these make R blow up
    print(f"  ({f})^{m}")
print("R(2, 3) =", scalar_curvature_at(closed, (2.0, 3.0)))

# walk toward the phase boundary at V = 3
U_star = phase_boundary_energy(3.0, params)
for gap in [1.0, 1e-2, 1e-4, 1e-6]:
    print(f"  U - U* = {gap:g}: R = {curv.scalar_value((U_star + gap, 3.0)):.4g}")

# the ideal gas is flat
print("ideal gas R:", riemann(vdw_metric_closed(VdwParams(0, 0))).scalar)

# roots of P V^3 - a V + 2ab at and below the critical pressure
for P in [1 / 27, 0.03, 0.75]:
    print(f"P = {P:.4g}:", [round(r.V, 6) for r in singular_locus(P, params).roots])
