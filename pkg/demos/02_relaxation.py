"""Evolve exp(-r^2) with positivity-guarded forward Euler and watch the invariants.

Mass and energy stay put up to quadrature error; the entropy integral moves in
one direction only. The kernel is built once (a few seconds) and reused.
"""

from wavekin.diagnostics import conservation_report, recorder
from wavekin.dispersion import make_dispersion
from wavekin.grid import make_grid, sample_function
from wavekin.stepper import SimulationConfig, default_provider, safe_dt, simulate

disp = make_dispersion("schrodinger")
grid = make_grid("gauss-composite", 64, 8.0)
kernel = default_provider(grid, disp)
f0 = sample_function(grid, "gaussian", (1.0,))

dt = safe_dt(f0, provider=kernel) / 4
traj = simulate(f0, SimulationConfig(T=0.1, dt=dt), disp, provider=kernel, record=recorder(disp))

print("      t        mass      energy     entropy      min f")
for rec in traj.records:
    print(f"{rec.t:7.4f}  {rec.mass:10.6f}  {rec.energy:10.6f}  {rec.entropy:10.3f}  {rec.min_value:10.3e}")

rep = conservation_report(traj)
print(f"\nrelative mass drift   {rep['mass_drift']:.2e}")
print(f"relative energy drift {rep['energy_drift']:.2e}")
print(f"entropy               {rep['entropy_verdict']}")
