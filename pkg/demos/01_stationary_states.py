"""Rayleigh-Jeans states 1/(mu + xi r^2) are stationary on the whole space.

On a truncated ball they are only nearly stationary: the residual
||Q|| / (||T1|| + ||T2|| + 2||T3||) shrinks as the cutoff grows. A gaussian,
for contrast, is not stationary at all.
"""

from wavekin.dispersion import make_dispersion
from wavekin.diagnostics import stationarity_residual
from wavekin.grid import make_grid, sample_function

disp = make_dispersion("schrodinger")

print("cutoff   residual of 1/(1 + r^2)")
for r_max in (8.0, 16.0, 32.0):
    grid = make_grid("gauss-composite", 128, r_max)
    f = sample_function(grid, "rayleigh_jeans", (1.0, 1.0), disp)
    print(f"{r_max:6.0f}   {stationarity_residual(f, disp):.4f}")

grid = make_grid("gauss-composite", 128, 32.0)
g = sample_function(grid, "gaussian", (1.0,))
print(f"\nexp(-r^2) at cutoff 32: {stationarity_residual(g, disp):.4f}")
