"""For omega = r^2 the collision operator has two independent evaluations.

The general path integrates over the resonant manifold in (r1, mu, u); the
reduced path uses the closed-form kernel p2 p3 min(p, p1, p2, p3) / p. Their
pointwise ratio is the constant 4 pi^2.
"""

import numpy as np

from wavekin.collision_general import evaluate_Q_general
from wavekin.collision_schrodinger import CROSS_PATH_CONSTANT, evaluate_Q_1d
from wavekin.dispersion import make_dispersion
from wavekin.grid import make_grid, sample_function
from wavekin.quadrature import QuadOrders

disp = make_dispersion("schrodinger")
grid = make_grid("gauss-composite", 32, 8.0)
f = sample_function(grid, "gaussian", (1.0,))
quad = QuadOrders()

Qg = evaluate_Q_general(f, disp, quad).Q
Q1 = evaluate_Q_1d(f, quad).Q

print("     r        Q_general        Q_1d        ratio")
for r, a, b in zip(grid.nodes[::3], Qg[::3], Q1[::3]):
    print(f"{r:6.3f}  {a: .6e}  {b: .6e}  {a / b:9.4f}")
print(f"\n4 pi^2 = {CROSS_PATH_CONSTANT:.4f}; worst relative deviation "
      f"{np.max(np.abs(Qg / Q1 / CROSS_PATH_CONSTANT - 1)):.2e}")
