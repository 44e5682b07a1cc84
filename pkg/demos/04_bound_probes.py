"""Probe ||T1(f, g, h)|| / (||f|| ||g|| ||h||) over random smooth states.

If the trilinear bound holds, the largest observed ratio stays put as the grid
is refined. A small run: 20 samples on grids of 32 and 64 nodes.
"""

from wavekin.bound_probe import probe_bound
from wavekin.dispersion import make_dispersion
from wavekin.grid import NormSpec, make_grid

disp = make_dispersion("schrodinger")
grid = make_grid("gauss-composite", 32, 16.0)
spec_in = NormSpec("sup_weighted", 2.5)
spec_out = NormSpec("sup_weighted", 2.5, 0.25)

rep = probe_bound(1, spec_in, spec_out, 20, grid, disp, sizes=(32, 64))
for n, v in sorted(rep.series.items()):
    print(f"n = {n:3d}: max ratio {v:.4f}")
print(f"growth {rep.growth:.3f}")
