"""Forward Euler with a positivity-preserving step cap, and Picard iteration.

A *provider* is any callable ``f -> CollisionResult``; the default is the cached
kernel of the general path. The loss part of Q is f * (Q2 - 2 Q3) with Q2 >= 0,
so a step dt <= theta / (2 max Q3) gives f' >= (1 - theta) f + dt * gain >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .collision_general import CollisionResult, build_kernel
from .dispersion import DispersionRelation
from .grid import DistributionState, NormSpec, weighted_norm
from .quadrature import QuadOrders

Provider = Callable[[DistributionState], CollisionResult]

EPS_FLOOR = 1e-300


class SimulationError(RuntimeError):
    pass


class SimulationAborted(SimulationError):
    """Raised on NaN/Inf or a norm-guard trip; carries the trajectory up to the failure."""

    def __init__(self, message: str, step: int, trajectory: "Trajectory"):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


@dataclass(frozen=True)
class SimulationConfig:
    scheme: str = "euler"
    T: float = 0.1
    dt: float | None = None
    n_steps: int | None = None
    positivity_guard: bool = True
    theta: float = 0.5
    cadence: int = 1
    quad: QuadOrders = QuadOrders()
    seed: int = 0
    a_s: float = 10.0
    linf_s: float = 2.5
    l2_s: float = 0.75
    norm_guard: bool = True

    def __post_init__(self):
        if self.scheme not in ("euler", "picard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps is not None and self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")

    def nominal_steps(self) -> int:
        if self.n_steps is not None:
            return self.n_steps
        if self.dt is not None:
            return max(1, int(np.ceil(self.T / self.dt - 1e-9)))
        return 1

    def guard_norm(self, disp: DispersionRelation) -> NormSpec:
        if disp.kind == "schrodinger":
            return NormSpec("l2_weighted", self.l2_s)
        return NormSpec("sup_weighted", self.linf_s)

    def horizon(self, R: float) -> float:
        """Heuristic local existence time 1 / (a_s R^2)."""
        return np.inf if R == 0 else 1.0 / (self.a_s * R * R)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: int = 0

    def append(self, state: DistributionState, record=None):
        if self.times and not state.t > self.times[-1]:
            raise SimulationError("trajectory times must increase strictly")
        self.times.append(state.t)
        self.states.append(state)
        self.records.append(record)

    def __len__(self):
        return len(self.times)

    def min_value(self) -> float:
        return float(min(s.values.min() for s in self.states))

    def at(self, t: float, tol: float = 1e-12) -> DistributionState:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return self.states[i]


def default_provider(grid, disp: DispersionRelation, quad: QuadOrders = QuadOrders(),
                     workers: int | None = 1, cache_dir=None) -> Provider:
    return build_kernel(grid, disp, quad, workers=workers, cache_dir=cache_dir)


def safe_dt(f: DistributionState, disp: DispersionRelation | None = None, quad: QuadOrders = QuadOrders(),
            theta: float = 0.5, provider: Provider | None = None, eps_floor: float = EPS_FLOOR,
            result: CollisionResult | None = None) -> float:
    """theta / (2 max Q3[f] + eps_floor)."""
    if np.any(f.values < 0):
        raise SimulationError("safe_dt needs a nonnegative state")
    if result is None:
        if not f.values.any():
            return theta / eps_floor
        if provider is None:
            provider = default_provider(f.grid, disp, quad)
        result = provider(f)
    return float(theta / (2.0 * max(float(np.max(result.Q3)), 0.0) + eps_floor))


def euler_step(f: DistributionState, dt: float, provider: Provider,
               result: CollisionResult | None = None) -> DistributionState:
    """f + dt Q[f] with the time advanced by dt."""
    if not dt > 0:
        raise SimulationError(f"dt must be positive, got {dt}")
    if result is None:
        result = provider(f)
    return f.with_values(f.values + dt * result.Q, t=f.t + dt)


def _check_finite(values, step, traj):
    if not np.all(np.isfinite(values)):
        raise SimulationAborted(f"non-finite state at step {step}", step, traj)


def simulate(f0: DistributionState, cfg: SimulationConfig, disp: DispersionRelation,
             provider: Provider | None = None, record: Callable | None = None,
             workers: int | None = 1, cache_dir=None) -> Trajectory:
    """Integrate to cfg.T; snapshots every ``cadence`` nominal steps and at T.

    ``record(state) -> DiagnosticsRecord`` is evaluated at each snapshot. With the
    guard on, a nominal step is split into equal substeps no longer than safe_dt.
    """
    if cfg.scheme != "euler":
        raise SimulationError("simulate integrates with euler; use picard_solve for the Picard scheme")
    if cfg.positivity_guard and np.any(f0.values < 0):
        raise SimulationError("positivity guard needs a nonnegative initial state")
    if provider is None:
        provider = default_provider(f0.grid, disp, cfg.quad, workers=workers, cache_dir=cache_dir)
    rec = record or (lambda s: None)
    f = replace(f0, t=0.0)
    traj = Trajectory()
    traj.append(f, rec(f))
    if not f.values.any():
        f = f.with_values(f.values, t=cfg.T)
        traj.append(f, rec(f))
        return traj

    spec = cfg.guard_norm(disp)
    bound = 2.0 * weighted_norm(f0, spec, disp)
    n = cfg.nominal_steps()
    step = 0
    for k in range(1, n + 1):
        t_end = cfg.T * k / n
        while True:
            res = provider(f)
            _check_finite(res.Q, step + 1, traj)
            dt = t_end - f.t
            if cfg.positivity_guard:
                cap = safe_dt(f, theta=cfg.theta, result=res)
                if cap < dt:
                    dt = dt / np.ceil(dt / cap)
            last = t_end - f.t - dt <= 1e-12 * cfg.T
            step += 1
            traj.steps = step
            _check_finite(f.values + dt * res.Q, step, traj)
            g = euler_step(f, dt, provider, result=res)
            f = g.with_values(g.values, t=t_end) if last else g
            if cfg.norm_guard and weighted_norm(f, spec, disp) > bound:
                raise SimulationAborted(
                    f"{spec.label()} norm exceeded twice its initial value at t={f.t:.6g} (step {step})",
                    step, traj)
            if last:
                break
        if k % cfg.cadence == 0 or k == n:
            traj.append(f, rec(f))
    return traj


@dataclass(frozen=True)
class PicardResult:
    state: DistributionState
    kappa: float
    converged: bool
    iterations: int
    diffs: tuple


def picard_solve(f0: DistributionState, T: float, tol: float, max_iter: int, disp: DispersionRelation,
                 provider: Provider | None = None, m: int = 16, quad: QuadOrders = QuadOrders()) -> PicardResult:
    """Iterate f <- f0 + int_0^t Q(f) on m uniform substeps of [0, T] (cumulative trapezoid).

    The difference norm is the sup over substeps of the sup over nodes. kappa is
    the last ratio of successive difference norms (nan before two iterations).
    """
    if not T > 0 or m < 1 or max_iter < 1:
        raise SimulationError("picard_solve needs T > 0, m >= 1 and max_iter >= 1")
    if provider is None:
        provider = default_provider(f0.grid, disp, quad)
    h = T / m
    F = np.repeat(f0.values[None, :], m + 1, axis=0)
    diffs: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Q = np.array([provider(f0.with_values(F[k])).Q for k in range(m + 1)])
        acc = np.concatenate([np.zeros((1, F.shape[1])), np.cumsum(0.5 * h * (Q[1:] + Q[:-1]), axis=0)])
        G = f0.values[None, :] + acc
        if not np.all(np.isfinite(G)):
            break
        diffs.append(float(np.max(np.abs(G - F))))
        F = G
        if diffs[-1] < tol:
            converged = True
            break
    kappa = diffs[-1] / diffs[-2] if len(diffs) >= 2 and diffs[-2] > 0 else float("nan")
    return PicardResult(f0.with_values(F[-1], t=f0.t + T), float(kappa), converged, it, tuple(diffs))


def scaling_covariance(f0: DistributionState, cfg: SimulationConfig, disp: DispersionRelation, lam: float,
                       times=(0.025, 0.05, 0.1), workers: int | None = 1) -> dict:
    """Compare the run from f0 with the run from lam^2 f0(lam r) on the grid scaled by 1/lam.

    For omega = r^2 the second run should equal lam^2 f(t, lam r) at every t. Errors
    are sup-relative: max |g - lam^2 f| / max |lam^2 f| over the nodes.
    """
    if disp.kind != "schrodinger":
        raise SimulationError("scaling covariance holds for the Schrodinger law only")
    if not lam > 0:
        raise SimulationError("scaling factor must be positive")
    T = max(times)
    cfg = replace(cfg, T=T)
    g0 = DistributionState(f0.grid.scaled(1.0 / lam), lam * lam * f0.values)
    ref = simulate(f0, cfg, disp, workers=workers)
    run = simulate(g0, cfg, disp, workers=workers)
    errors = {}
    for t in times:
        a = lam * lam * ref.at(t).values
        b = run.at(t).values
        errors[repr(float(t))] = float(np.max(np.abs(b - a)) / np.max(np.abs(a)))
    return {"lambda": float(lam), "times": [float(t) for t in times], "sup_rel_error": errors,
            "max_error": max(errors.values())}
