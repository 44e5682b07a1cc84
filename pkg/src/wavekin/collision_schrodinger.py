"""Reduced two-dimensional collision integral for omega = |p|^2.

With p1^2 = p2^2 + p3^2 - p^2 the operator reads

    Q(p) = int int K(p, p2, p3) [f2 f3 (f + f1) - f f1 (f2 + f3)] dp2 dp3,
    K = p2 p3 min{p, p1, p2, p3} / p,

over p2^2 + p3^2 >= p^2. It equals the three-dimensional operator up to the
factor 4 pi^2 (from dmu = rho drho / (p r1) and a rho-interval of length
2 min{p, p1, p2, p3}).
"""

from __future__ import annotations

import numpy as np

from .collision_general import CollisionResult, _fill_origin, _positive_nodes, parallel_map
from .grid import DistributionState, interpolate
from .quadrature import QuadOrders, breakpoints, gauss_pieces, panel_cuts

CROSS_PATH_CONSTANT = 4.0 * np.pi**2

# Orders for pointwise comparisons between the two paths. Near a sign change of
# Q the ratio is ill conditioned, so both sides need more than the default.
CROSS_CHECK_QUAD = QuadOrders(r1=6, mu=12, u=6, line=32)


def kernel_1d(p, p2, p3):
    """p2 p3 min{p, p1, p2, p3} / p, zero where p2^2 + p3^2 < p^2."""
    p, p2, p3 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p, p2, p3)))
    q = p2 * p2 + p3 * p3 - p * p
    p1 = np.sqrt(np.maximum(q, 0.0))
    k = p2 * p3 * np.minimum(np.minimum(p, p1), np.minimum(p2, p3)) / p
    out = np.where(q >= 0.0, k, 0.0)
    return out if out.ndim else float(out)


def _line_nodes(p: float, R: float, quad: QuadOrders):
    """Composite nodes (p2, p3) and weights including the kernel, split at every kink.

    p2 runs over [0, R]; p3 over [sqrt(max(0, p^2 - p2^2)), sqrt(R^2 + p^2)], the
    upper end being where p1 leaves [0, R] when p3 = R does not bind (loss term).
    """
    fixed = panel_cuts(R, quad)
    p3_top = np.sqrt(R * R + p * p)
    outer = np.concatenate([[p / np.sqrt(2.0), p, np.sqrt(2.0) * p, np.sqrt(0.5 * (R * R + p * p))], fixed])
    p2, w2 = gauss_pieces(breakpoints(0.0, R, outer), quad.line)
    P2 = p2[:, None]
    low = np.sqrt(np.maximum(p * p - p2 * p2, 0.0))
    marks = np.append(fixed, R)
    inner = np.concatenate([
        np.stack([np.full_like(p2, p), p2, np.full_like(p2, R),
                  np.sqrt(np.maximum(2 * p * p - p2 * p2, 0.0))], -1),
        np.broadcast_to(marks, (p2.size, marks.size)),
        np.sqrt(np.maximum(marks**2 + p * p - P2**2, 0.0)),      # p1 at a cut
    ], -1)
    p3, w3 = gauss_pieces(breakpoints(low, np.full_like(p2, p3_top), inner), quad.line)
    p1 = np.sqrt(np.maximum(P2 * P2 + p3 * p3 - p * p, 0.0))
    W = w2[:, None] * w3 * kernel_1d(p, P2, p3)
    return np.broadcast_to(P2, p3.shape), p3, p1, W


def _line_node(ctx, i):
    p = ctx["nodes"][i]
    p2, p3, p1, W = _line_nodes(p, ctx["R"], ctx["quad"])
    F = ctx["F"]
    f1, f2, f3 = F(p1), F(p2), F(p3)
    return float(np.sum(W * f1 * f2 * f3)), float(np.sum(W * f2 * f3)), float(np.sum(W * f1 * f2))


def evaluate_Q_1d(f: DistributionState, quad: QuadOrders = QuadOrders(), workers: int | None = 1) -> CollisionResult:
    """Reduced operator at every node, split as gain + f (Q2 - 2 Q3) like the general path.

    By the p2 <-> p3 symmetry, f f1 (f2 + f3) integrates to 2 f f1 f2.
    """
    grid = f.grid
    n = grid.n
    gain, Q2, Q3 = np.zeros(n), np.zeros(n), np.zeros(n)
    if f.values.any():
        ctx = dict(nodes=grid.nodes, R=grid.r_max, quad=quad, F=lambda r: interpolate(f, r))
        idx = _positive_nodes(grid)
        for i, (a, b, c) in zip(idx, parallel_map(_line_node, idx, ctx, workers)):
            gain[i], Q2[i], Q3[i] = a, b, c
        _fill_origin(grid, gain, Q2, Q3)
    return CollisionResult(f.values.copy(), gain, Q2, Q3)


def integrand_1d(f: DistributionState, p: float, p2, p3):
    """Bracketed integrand K [f2 f3 (f + f1) - f f1 (f2 + f3)] for brute-force checks."""
    p2 = np.asarray(p2, dtype=float)
    p3 = np.asarray(p3, dtype=float)
    p1 = np.sqrt(np.maximum(p2 * p2 + p3 * p3 - p * p, 0.0))
    F = lambda r: interpolate(f, r)
    fp, f1, f2, f3 = F(p), F(p1), F(p2), F(p3)
    return kernel_1d(p, p2, p3) * (f2 * f3 * (fp + f1) - fp * f1 * (f2 + f3))
