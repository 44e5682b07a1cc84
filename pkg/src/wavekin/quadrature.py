"""Composite Gauss rules, breakpoint handling and vectorized bisection."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class QuadOrders:
    """Per-panel Gauss orders for the collision quadratures.

    r1, mu, u drive the general-dispersion path; ``line`` drives the 1D
    Schrodinger path. Every rule is composite: panels are split at the kinks of
    the truncated integrand plus ``panels`` uniform cuts of [0, r_max] and
    ``geo`` geometric refinements toward the origin.
    """
    r1: int = 4
    mu: int = 8
    u: int = 4
    line: int = 12
    panels: int = 16
    geo: int = 5

    def __post_init__(self):
        for name in ("r1", "mu", "u", "line"):
            if getattr(self, name) < 2:
                raise ValueError(f"quadrature order {name} must be >= 2")
        if self.panels < 1 or self.geo < 0:
            raise ValueError("panels must be >= 1 and geo >= 0")

    def as_tuple(self) -> tuple:
        return (self.r1, self.mu, self.u, self.line, self.panels, self.geo)


@lru_cache(maxsize=None)
def gauss(m: int):
    x, w = leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_cuts(r_max: float, quad: QuadOrders) -> np.ndarray:
    """Fixed interior cuts: uniform panels plus geometric refinement near 0."""
    h = r_max / quad.panels
    geo = h * 2.0 ** -np.arange(1, quad.geo + 1)
    return np.unique(np.concatenate([np.arange(1, quad.panels) * h, geo]))


def breakpoints(lo, hi, cuts) -> np.ndarray:
    """Sorted breakpoints (..., C+2) made of lo, hi and the cuts clipped into [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c = np.clip(cuts, lo[..., None], hi[..., None])
    return np.sort(np.concatenate([lo[..., None], c, hi[..., None]], axis=-1), axis=-1)


def gauss_pieces(bps: np.ndarray, m: int):
    """Nodes and weights (..., K*m) of the composite rule on breakpoints (..., K+1)."""
    x, w = gauss(m)
    a = bps[..., :-1, None]
    b = bps[..., 1:, None]
    X = 0.5 * (b - a) * x + 0.5 * (b + a)
    W = 0.5 * (b - a) * w
    shape = bps.shape[:-1] + ((bps.shape[-1] - 1) * m,)
    return X.reshape(shape), W.reshape(shape)


def bisect(fun, lo, hi, iters: int = 64) -> np.ndarray:
    """Vectorized bisection for a sign change of ``fun`` on [lo, hi]."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)
