"""Empirical operator-norm probes for the trilinear pieces T1, T2, T3 in weighted spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision_general import build_kernel, parallel_map
from .dispersion import DispersionRelation
from .grid import DistributionState, NormSpec, RadialGrid, japanese, make_grid, weighted_norm
from .quadrature import QuadOrders

N_BUMPS = 12
ENVELOPE_EPS = 0.1


def envelope_exponent(spec: NormSpec) -> float:
    """Decay rate q of the envelope <r>^-q that keeps the state inside ``spec``."""
    s = spec.exponent
    if spec.space == "sup_weighted":
        return s + ENVELOPE_EPS
    if spec.space == "l2_weighted":
        return s + 1.5 + ENVELOPE_EPS
    return 2.0 * s + 3.0 + ENVELOPE_EPS


def random_state(spec: NormSpec, R: float, seed: int, grid: RadialGrid,
                 disp: DispersionRelation | None = None) -> DistributionState:
    """Positive smooth state: <r>^-q times 12 random Gaussian bumps, rescaled to norm R.

    Centers are log-uniform in [r_max / 1000, r_max], widths proportional to
    max(center, 1), coefficients uniform in (0, 1].
    """
    if not R > 0:
        raise ValueError(f"norm bound R must be positive, got {R}")
    rng = np.random.default_rng(seed)
    r = grid.nodes
    lo = np.log(grid.r_max * 1e-3)
    c = np.exp(rng.uniform(lo, np.log(grid.r_max), N_BUMPS))
    width = np.maximum(c, 1.0) * rng.uniform(0.15, 0.6, N_BUMPS)
    a = 1.0 - rng.uniform(0.0, 1.0, N_BUMPS)
    bumps = a[:, None] * np.exp(-0.5 * ((r[None, :] - c[:, None]) / width[:, None]) ** 2)
    f = japanese(r) ** -envelope_exponent(spec) * bumps.sum(axis=0)
    state = DistributionState(grid, f)
    return state.scaled(R / weighted_norm(state, spec, disp))


@dataclass
class ProbeReport:
    j: int
    spec_in: NormSpec
    spec_out: NormSpec
    n_samples: int
    ratios: np.ndarray
    max_ratio: float
    series: dict = field(default_factory=dict)

    @property
    def growth(self) -> float:
        ns = sorted(self.series)
        first = self.series[ns[0]]
        return float(self.series[ns[-1]] / first) if first > 0 else float("nan")

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "spec_in": self.spec_in.label(),
            "spec_out": self.spec_out.label(),
            "n_samples": self.n_samples,
            "max_ratio": self.max_ratio,
            "series": {str(k): v for k, v in sorted(self.series.items())},
            "growth": self.growth,
        }


def trilinear_ratio(K, j: int, f, g, h, spec_in: NormSpec, spec_out: NormSpec, disp) -> float:
    den = weighted_norm(f, spec_in, disp) * weighted_norm(g, spec_in, disp) * weighted_norm(h, spec_in, disp)
    if den == 0.0:
        return 0.0
    out = f.with_values(K.apply_T(j, f, g, h))
    return float(weighted_norm(out, spec_out, disp) / den)


def _sample(ctx, k):
    grid, spec = ctx["grid"], ctx["spec_in"]
    f, g, h = (random_state(spec, 1.0, ctx["seed"] + 3 * k + i, grid, ctx["disp"]) for i in range(3))
    return trilinear_ratio(ctx["K"], ctx["j"], f, g, h, spec, ctx["spec_out"], ctx["disp"])


def _check(spec_in: NormSpec, disp: DispersionRelation, n_samples: int):
    if n_samples < 20:
        raise ValueError("bound probes need n_samples >= 20")
    if spec_in.space == "sup_weighted" and not spec_in.s > 2:
        raise ValueError("sup-weighted probes need s > 2")
    if spec_in.space == "l2_weighted" and not spec_in.s > 0.5:
        raise ValueError("l2-weighted probes need s > 1/2")


def probe_ratios(j: int, spec_in: NormSpec, spec_out: NormSpec, n_samples: int, grid: RadialGrid,
                 disp: DispersionRelation, quad: QuadOrders = QuadOrders(), seed: int = 0,
                 workers: int | None = 1, kernel=None) -> np.ndarray:
    K = kernel if kernel is not None else build_kernel(grid, disp, quad, workers=workers)
    ctx = dict(K=K, j=j, grid=grid, spec_in=spec_in, spec_out=spec_out, disp=disp, seed=seed)
    return np.array(parallel_map(_sample, range(n_samples), ctx, workers))


def probe_bound(j: int, spec_in: NormSpec, spec_out: NormSpec, n_samples: int, grid: RadialGrid,
                disp: DispersionRelation, quad: QuadOrders = QuadOrders(), sizes=(64, 128, 256),
                seed: int = 0, workers: int | None = 1) -> ProbeReport:
    """Max of ||T_j(f,g,h)||_out / (||f|| ||g|| ||h||)_in over random unit states.

    The refinement series repeats the same seeds on grids of each size with the
    scheme and r_max of ``grid``.
    """
    if j not in (1, 2, 3):
        raise ValueError(f"operator index must be 1, 2 or 3, got {j}")
    _check(spec_in, disp, n_samples)
    ratios = probe_ratios(j, spec_in, spec_out, n_samples, grid, disp, quad, seed, workers)
    series = {}
    for n in sizes:
        if n == grid.n:
            series[n] = float(ratios.max())
            continue
        gn = make_grid(grid.scheme, n, grid.r_max, grid.panel_order or 8)
        series[n] = float(probe_ratios(j, spec_in, spec_out, n_samples, gn, disp, quad, seed, workers).max())
    return ProbeReport(j, spec_in, spec_out, n_samples, ratios, float(ratios.max()), series)
