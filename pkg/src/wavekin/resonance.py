"""Geometry of the resonant set {z : Omega(|rho - z|) + Omega(|z|) = E}, rho = p + p1.

A slice is fixed by |p|, |p1| and the cosine mu between them. On the slice the
surface is parameterized by u = |z| and the azimuth around rho; the partner
radius w = |rho - z| is pinned by the energy constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import DispersionRelation
from .quadrature import bisect


class ResonanceError(ValueError):
    pass


@dataclass(frozen=True)
class ResonantSlice:
    p: float
    r1: float
    mu: float
    rho: float
    E: float


def make_slice(p: float, r1: float, mu: float, disp: DispersionRelation) -> ResonantSlice:
    if p < 0 or r1 < 0 or not -1.0 <= mu <= 1.0:
        raise ResonanceError(f"invalid slice p={p}, r1={r1}, mu={mu}")
    rho = float(np.sqrt(max(p * p + r1 * r1 + 2.0 * p * r1 * mu, 0.0)))
    return ResonantSlice(float(p), float(r1), float(mu), rho, float(disp.omega(p) + disp.omega(r1)))


def evaluate_G(sl: ResonantSlice, u, w, disp: DispersionRelation):
    """Energy mismatch Omega(w) + Omega(u) - E."""
    return disp.omega(w) + disp.omega(u) - sl.E


def pair_radius(sl: ResonantSlice, u, disp: DispersionRelation):
    u = np.asarray(u, dtype=float)
    rest = sl.E - disp.omega(u)
    if np.any(rest < -1e-12 * (1.0 + sl.E)):
        raise ResonanceError(f"Omega(u) exceeds slice energy E={sl.E}")
    return disp.inverse(np.maximum(rest, 0.0))


def _violation(sl: ResonantSlice, disp: DispersionRelation):
    """phi(u) <= 0 exactly on the feasible set (energy reachable and triangle closed)."""
    Om, rho, E = disp.omega, sl.rho, sl.E

    def phi(u):
        inner = Om(u) + Om(np.abs(rho - u)) - E
        outer = E - Om(u) - Om(rho + u)
        return np.maximum(inner, outer)
    return phi


def feasible_u_interval(sl: ResonantSlice, disp: DispersionRelation, scan: int = 64) -> tuple[float, float]:
    """[u_min, u_max] of radii u = |z| on the slice.

    u = p (partner w = r1) always lies on the set, so each end is bracketed
    between 0 or Omega^{-1}(E) and the anchor and found by bisection on the two
    boundary equations Omega(u) + Omega(|rho - u|) = E and Omega(u) + Omega(rho + u) = E.
    A coarse scan guards the single-interval assumption.
    """
    phi = _violation(sl, disp)
    a = min(sl.p, sl.r1)
    b = max(sl.p, sl.r1)
    top = float(disp.inverse(sl.E))
    if sl.E == 0.0:
        return 0.0, 0.0
    if sl.mu == 1.0 and sl.p == sl.r1:
        return sl.p, sl.p  # sphere of radius |p - p1| / 2 = 0; both boundary roots coincide
    for lo_, hi_ in ((0.0, a), (b, top)):
        if hi_ > lo_:
            s = np.sign(phi(np.linspace(lo_, hi_, scan)) + 1e-14 * (1 + sl.E))
            if np.count_nonzero(np.diff(s)) > 1:
                raise ResonanceError("resonant slice has a non-interval feasible set for this dispersion")
    if phi(0.0) <= 0.0:
        u_min = 0.0
    else:
        u_min = float(bisect(phi, 0.0, a, iters=200)) if a > 0 else 0.0
    if phi(top) <= 0.0:
        u_max = top
    else:
        u_max = float(bisect(phi, b, top, iters=200))
    return u_min, u_max


def lower_u_boundary(disp: DispersionRelation, p, r1, rho, E, iters: int = 64) -> np.ndarray:
    """Vectorized u_min over many slices; u_max follows as pair radius of u_min."""
    Om = disp.omega

    def phi(u):
        return np.maximum(Om(u) + Om(np.abs(rho - u)) - E, E - Om(u) - Om(rho + u))
    a = np.broadcast_to(np.minimum(p, r1), np.shape(rho))
    zero = np.zeros(np.shape(rho))
    u = bisect(phi, zero, a, iters=iters)
    return np.where(phi(zero) <= 0.0, 0.0, u)


def measure_weight(sl: ResonantSlice, u, disp: DispersionRelation, check: bool = True):
    """Azimuth-integrated surface measure over |grad G| per unit du: 2 pi u w / (Omega'(w) rho)."""
    if sl.rho <= 0.0:
        raise ResonanceError("measure weight is undefined on the degenerate slice rho = 0")
    u = np.asarray(u, dtype=float)
    if check:
        lo, hi = feasible_u_interval(sl, disp)
        tol = 1e-12 * (1.0 + hi)
        if np.any(u < lo - tol) or np.any(u > hi + tol):
            raise ResonanceError(f"u outside feasible interval [{lo}, {hi}]")
    w = pair_radius(sl, u, disp)
    return 2.0 * np.pi * u * w / (disp.omega_prime(w) * sl.rho)
