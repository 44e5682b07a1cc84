"""Radial grids, isotropic states, monotone interpolation and weighted norms.

Convention: for radial g, the integral over R^3 is 4 pi int_0^r_max g(r) r^2 dr.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss

from .dispersion import DispersionRelation

SCHEMES = ("uniform-composite", "gauss-composite")
SPACES = ("sup_weighted", "l2_weighted", "energy_l1")
FAMILIES = ("gaussian", "rayleigh_jeans", "weighted_power")


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray
    r_max: float
    scheme: str
    panel_order: int = 0

    @property
    def n(self) -> int:
        return self.nodes.size

    def key(self) -> str:
        h = hashlib.sha256()
        h.update(self.scheme.encode())
        h.update(np.float64(self.r_max).tobytes())
        h.update(self.nodes.tobytes())
        h.update(self.weights.tobytes())
        return h.hexdigest()[:16]

    def scaled(self, factor: float) -> "RadialGrid":
        """Same grid with all radii multiplied by ``factor``."""
        return RadialGrid(_frozen(self.nodes * factor), _frozen(self.weights * factor),
                          self.r_max * factor, self.scheme, self.panel_order)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DistributionState:
    grid: RadialGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.n,):
            raise GridError(f"state has {v.size} values for a grid of {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise GridError("state values must be finite")
        object.__setattr__(self, "values", v)

    def with_values(self, values, t: float | None = None) -> "DistributionState":
        return DistributionState(self.grid, values, self.t if t is None else t)

    def scaled(self, a: float) -> "DistributionState":
        return replace(self, values=a * self.values)

    def to_csv(self, path, header: str | None = None) -> None:
        lines = [] if header is None else [header]
        lines.append("r,f")
        lines += [f"{r:.17g},{f:.17g}" for r, f in zip(self.grid.nodes, self.values)]
        Path(path).write_text("\n".join(lines) + "\n")


def read_state_csv(path, grid: RadialGrid, t: float = 0.0) -> DistributionState:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    if rows[0].replace(" ", "") != "r,f":
        raise GridError(f"{path}: expected header 'r,f'")
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    if data.shape[0] != grid.n or not np.allclose(data[:, 0], grid.nodes, rtol=1e-14, atol=0):
        raise GridError(f"{path}: radii do not match the grid")
    return DistributionState(grid, data[:, 1], t)


@dataclass(frozen=True)
class NormSpec:
    space: str
    s: float = 0.0
    gamma: float | None = None

    def __post_init__(self):
        if self.space not in SPACES:
            raise GridError(f"unknown norm space {self.space!r}")
        if self.s < 0:
            raise GridError("norm exponent s must be >= 0")
        if self.gamma is not None and self.gamma < 0:
            raise GridError("gamma must be >= 0")

    @property
    def exponent(self) -> float:
        return self.s + (self.gamma or 0.0)

    def label(self) -> str:
        g = "" if self.gamma is None else f"+{self.gamma:g}"
        return f"{self.space}(s={self.s:g}{g})"


def make_grid(scheme: str, n: int, r_max: float, panel_order: int = 8) -> RadialGrid:
    """Composite Simpson on uniform nodes, or Gauss-Legendre panels of ``panel_order`` nodes."""
    if scheme not in SCHEMES:
        raise GridError(f"unknown grid scheme {scheme!r}")
    if n < 8:
        raise GridError(f"grid needs n >= 8, got {n}")
    if not r_max > 0:
        raise GridError(f"r_max must be positive, got {r_max}")
    if scheme == "uniform-composite":
        x = np.linspace(0.0, r_max, n)
        w = _simpson_weights(n) * (r_max / (n - 1))
        return RadialGrid(_frozen(x), _frozen(w), float(r_max), scheme)
    if n % panel_order:
        raise GridError(f"gauss-composite needs n divisible by panel order {panel_order}, got {n}")
    g, gw = leggauss(panel_order)
    edges = np.linspace(0.0, r_max, n // panel_order + 1)
    a, b = edges[:-1, None], edges[1:, None]
    x = (0.5 * (b - a) * g + 0.5 * (b + a)).ravel()
    w = (0.5 * (b - a) * gw).ravel()
    return RadialGrid(_frozen(x), _frozen(w), float(r_max), scheme, panel_order)


def _simpson_weights(n: int) -> np.ndarray:
    w = np.zeros(n)
    m = n if n % 2 else n - 3  # odd count handled by Simpson, rest by the 3/8 rule
    w[:m:2] += 2.0 / 3.0
    w[1:m:2] += 4.0 / 3.0
    w[0] -= 1.0 / 3.0
    w[m - 1] -= 1.0 / 3.0
    if m < n:
        w[m - 1:] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def japanese(r):
    return np.sqrt(1.0 + np.asarray(r, dtype=float) ** 2)


def integrate_moment(state: DistributionState, disp: DispersionRelation, moment: str) -> float:
    g = state.grid
    f = state.values
    if moment == "mass":
        arg = f
    elif moment == "energy":
        arg = disp.omega(g.nodes) * f
    elif moment == "entropy_arg":
        if np.any(f <= 0):
            raise GridError("entropy needs strictly positive values")
        arg = np.log(f)
    elif moment == "momentum":
        return 0.0
    else:
        raise GridError(f"unknown moment {moment!r}")
    return float(4.0 * np.pi * np.sum(g.weights * g.nodes**2 * arg))


def weighted_norm(state: DistributionState, spec: NormSpec, disp: DispersionRelation | None = None) -> float:
    g = state.grid
    f = state.values
    s = spec.exponent
    if spec.space == "sup_weighted":
        return float(np.max(japanese(g.nodes) ** s * np.abs(f)))
    if spec.space == "l2_weighted":
        return float(np.sqrt(4.0 * np.pi * np.sum(g.weights * g.nodes**2 * japanese(g.nodes) ** (2 * s) * f * f)))
    if disp is None:
        raise GridError("energy_l1 norm needs a dispersion relation")
    return float(4.0 * np.pi * np.sum(g.weights * g.nodes**2 * (1.0 + disp.omega(g.nodes)) ** s * np.abs(f)))


# ---------------------------------------------------------------- interpolation

SLOPE_STENCIL = 5


@lru_cache(maxsize=64)
def _slope_weights(nodes: bytes):
    """Finite-difference weights for f'(x_i) from the quartic through 5 neighbouring nodes."""
    x = np.frombuffer(nodes)
    n = x.size
    start = np.clip(np.arange(n) - SLOPE_STENCIL // 2, 0, n - SLOPE_STENCIL)
    idx = start[:, None] + np.arange(SLOPE_STENCIL)
    h = np.diff(x).mean()
    dx = (x[idx] - x[:, None]) / h
    V = dx[:, None, :] ** np.arange(SLOPE_STENCIL)[None, :, None]   # V[i, k, j] = dx_j^k
    rhs = np.zeros((n, SLOPE_STENCIL))
    rhs[:, 1] = 1.0 / h
    return np.linalg.solve(V, rhs[..., None])[..., 0], idx


def node_slopes(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Fourth-order slope estimates limited to keep each cubic piece monotone.

    Slopes are clipped to 3 * min(|left secant|, |right secant|) and set to 0
    where the secants change sign (Fritsch-Carlson region, Hyman filter), so the
    interpolant never leaves the range of the two bracketing node values.
    """
    y = np.asarray(values, dtype=float)
    W, idx = _slope_weights(grid.nodes.tobytes())
    d = np.sum(W * y[idx], axis=1)
    delta = np.diff(y) / np.diff(grid.nodes)
    left = np.concatenate([[delta[0]], delta])
    right = np.concatenate([delta, [delta[-1]]])
    bound = 3.0 * np.minimum(np.abs(left), np.abs(right))
    ok = (left * right > 0) & (d * left > 0)
    return np.where(ok, np.sign(d) * np.minimum(np.abs(d), bound), 0.0)


@dataclass(frozen=True)
class Stencil:
    """Location of radii relative to the grid: segment index and local coordinate.

    Segment ``n - 1`` is a sentinel whose right end carries the value 0, used for
    radii beyond r_max.
    """
    k: np.ndarray
    t: np.ndarray


def locate(grid: RadialGrid, r) -> Stencil:
    x = grid.nodes
    r = np.asarray(r, dtype=float)
    k = np.clip(np.searchsorted(x, r, side="right") - 1, 0, x.size - 2)
    h = x[k + 1] - x[k]
    t = np.clip((r - x[k]) / h, 0.0, 1.0)
    out = r > grid.r_max
    k = np.where(out, x.size - 1, k).astype(np.int32)
    t = np.where(out, 1.0, t)
    return Stencil(k, t)


def extended_tables(grid: RadialGrid, values: np.ndarray):
    """(y, d, h) padded with the zero sentinel segment for Hermite evaluation."""
    y = np.append(values, 0.0)
    d = np.append(node_slopes(grid, values), 0.0)
    h = np.append(np.diff(grid.nodes), 1.0)
    return y, d, h


def hermite_basis(h: np.ndarray, k: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Columns multiplying y[k], y[k+1], d[k], d[k+1] in the cubic Hermite form."""
    t2 = t * t
    t3 = t2 * t
    hk = h[k]
    return np.stack([2.0 * t3 - 3.0 * t2 + 1.0, 3.0 * t2 - 2.0 * t3,
                     hk * (t3 - 2.0 * t2 + t), hk * (t3 - t2)], axis=-1)


def hermite(tables, k: np.ndarray, t: np.ndarray) -> np.ndarray:
    y, d, h = tables
    B = hermite_basis(h, k, t)
    return y[k] * B[..., 0] + y[k + 1] * B[..., 1] + d[k] * B[..., 2] + d[k + 1] * B[..., 3]


def interpolate(state: DistributionState, r):
    """Monotone cubic interpolant; f(r_0) below r_0, f(r_last) up to r_max, 0 beyond r_max."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise GridError("interpolate needs r >= 0")
    st = locate(state.grid, r)
    out = hermite(extended_tables(state.grid, state.values), st.k, st.t)
    return out if out.ndim else float(out)


class Interpolant:
    """Reusable evaluator for one state (tables computed once)."""

    def __init__(self, state: DistributionState):
        self.grid = state.grid
        self.tables = extended_tables(state.grid, state.values)

    def __call__(self, r):
        st = locate(self.grid, r)
        return hermite(self.tables, st.k, st.t)


# ---------------------------------------------------------------- test families

def sample_function(grid: RadialGrid, family: str, params=(), disp: DispersionRelation | None = None,
                    t: float = 0.0) -> DistributionState:
    """gaussian(a): exp(-a r^2); rayleigh_jeans(mu, xi): 1/(mu + xi omega(r)); weighted_power(s): <r>^-s."""
    r = grid.nodes
    params = tuple(float(p) for p in params)
    if family == "gaussian":
        (a,) = params or (1.0,)
        f = np.exp(-a * r * r)
    elif family == "rayleigh_jeans":
        if disp is None:
            raise GridError("rayleigh_jeans needs a dispersion relation")
        mu, xi = params or (1.0, 1.0)
        den = mu + xi * disp.omega(r)
        if np.any(den <= 0):
            raise GridError("rayleigh_jeans denominator mu + xi*omega(r) must be positive on the grid")
        f = 1.0 / den
    elif family == "weighted_power":
        (s,) = params
        f = japanese(r) ** (-s)
    else:
        raise GridError(f"unknown family {family!r}")
    return DistributionState(grid, f, t)
