from pathlib import Path

from geothermo.geodesic import incompleteness_report, integrate, shoot_batch, vdw_problem
from geothermo.svg import line_plot
from geothermo.vdw import VdwParams, phase_boundary_energy

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

# a = b = 1: V(0) = 0.1 sits below b, so the chart of S is relaxed and the
# rational metric is followed as is; every run ends on the phase boundary
params = VdwParams(1, 1, 1)
template = vdw_problem(params, 0.0, 0.1, 0.0, 1.0, enforce_domain=False)
items = shoot_batch(template, [10.0 * k for k in range(15)], params, workers=4)
for item in items:
    r = item.report
    print(f"U0={item.u0:5g}  {r.termination.value:17s}  end=({r.U_max:.4g}, {r.V_max:.4g})  "
          f"residual={r.residual:.2g}")

series = [[(V, U) for U, V in item.trajectory.position] for item in items]
labels = [f"U0={item.u0:g}" for item in items]
(out / "geodesics_relaxed.svg").write_text(line_plot(series, "V", "U", "geodesics, a = b = 1", labels))

# a = 1, b = 0.05 keeps V(0) = 0.1 inside the chart, but the boundary energy
# never exceeds ~3.7 there, so trajectories starting higher escape instead
small = VdwParams(1, 0.05, 1)
traj = integrate(vdw_problem(small, 10.0, 0.1))
print("a=1, b=0.05, U0=10:", incompleteness_report(traj, small).termination.value,
      "at tau", round(traj.tau_end, 3))
print("max boundary energy:", max(phase_boundary_energy(0.051 + 0.001 * k, small) for k in range(5000)))
