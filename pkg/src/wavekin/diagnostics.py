"""Conserved quantities, entropy, norms and stationarity residuals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision_general import CollisionResult, build_kernel
from .dispersion import DispersionRelation
from .grid import DistributionState, NormSpec, integrate_moment, weighted_norm
from .quadrature import QuadOrders

VERDICTS = ("monotone-increasing", "monotone-decreasing", "non-monotone", "indeterminate")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    momentum: float
    energy: float
    entropy: float
    min_value: float
    norms: dict = field(default_factory=dict)
    stationarity_residual: float | None = None

    def row(self, linf: NormSpec, l2: NormSpec) -> list:
        return [self.t, self.mass, self.energy, self.entropy, self.min_value,
                self.norms.get(linf.label(), np.nan), self.norms.get(l2.label(), np.nan)]


def entropy(state: DistributionState) -> float:
    """int log f dp over the truncated ball; nan unless f > 0 at every node."""
    if np.any(state.values <= 0):
        return float("nan")
    return integrate_moment(state, None, "entropy_arg")


def compute_record(state: DistributionState, disp: DispersionRelation, norms=(),
                   residual: float | None = None) -> DiagnosticsRecord:
    return DiagnosticsRecord(
        t=float(state.t),
        mass=integrate_moment(state, disp, "mass"),
        momentum=0.0,
        energy=integrate_moment(state, disp, "energy"),
        entropy=entropy(state),
        min_value=float(state.values.min()),
        norms={spec.label(): weighted_norm(state, spec, disp) for spec in norms},
        stationarity_residual=residual,
    )


def recorder(disp: DispersionRelation, norms=()):
    return lambda state: compute_record(state, disp, norms)


def _drift(values: np.ndarray):
    """(max drift, relative?) of a series against its first value."""
    ref = values[0]
    d = np.max(np.abs(values - ref)) if values.size else 0.0
    if ref == 0.0:
        return float(d), False
    return float(d / abs(ref)), True


def entropy_verdict(S: np.ndarray, tol: float) -> tuple[str, int, int]:
    """Sign pattern of successive differences outside the band [-tol, tol]."""
    if S.size < 2 or not np.all(np.isfinite(S)):
        return "indeterminate", 0, 0
    dS = np.diff(S)
    up = int(np.count_nonzero(dS > tol))
    down = int(np.count_nonzero(dS < -tol))
    if up and down:
        return "non-monotone", up, down
    if up:
        return "monotone-increasing", up, down
    if down:
        return "monotone-decreasing", up, down
    return "indeterminate", up, down


def conservation_report(traj) -> dict:
    """Drifts of mass and energy against t=0 and the entropy verdict.

    The entropy band is tol_S = 10 * max per-snapshot relative mass change * |S(0)|,
    i.e. the quadrature error level of the mass budget carried over to S.
    """
    recs = traj.records
    if not recs or recs[0] is None:
        raise ValueError("trajectory has no diagnostics records")
    M = np.array([r.mass for r in recs])
    E = np.array([r.energy for r in recs])
    S = np.array([r.entropy for r in recs])
    mass_drift, mass_rel = _drift(M)
    energy_drift, energy_rel = _drift(E)
    step_mass = float(np.max(np.abs(np.diff(M)))) / abs(M[0]) if M.size > 1 and M[0] != 0 else 0.0
    tol_S = 10.0 * step_mass * (abs(S[0]) if np.isfinite(S[0]) else 0.0)
    verdict, up, down = entropy_verdict(S, tol_S)
    return {
        "mass_drift": mass_drift,
        "mass_drift_kind": "relative" if mass_rel else "absolute",
        "energy_drift": energy_drift,
        "energy_drift_kind": "relative" if energy_rel else "absolute",
        "momentum_drift": 0.0,
        "entropy_verdict": verdict,
        "entropy_tol": tol_S,
        "entropy_increments_up": up,
        "entropy_increments_down": down,
        "min_value": float(min(r.min_value for r in recs)),
        "n_snapshots": len(recs),
        "t_final": float(recs[-1].t),
    }


def _l2(state: DistributionState, values) -> float:
    return weighted_norm(state.with_values(values), NormSpec("l2_weighted", 0.0))


def residual_from(state: DistributionState, res: CollisionResult) -> float:
    den = _l2(state, res.T1) + _l2(state, res.T2) + 2.0 * _l2(state, res.T3)
    return 0.0 if den == 0.0 else _l2(state, res.Q) / den


def stationarity_residual(f: DistributionState, disp: DispersionRelation, quad: QuadOrders = QuadOrders(),
                          provider=None, workers: int | None = 1) -> float:
    """||Q[f]|| / (||T1|| + ||T2|| + 2 ||T3||) in unweighted L2 on the truncated ball.

    The ratio is scale free, so the Schrodinger law can use the reduced 1D path.
    """
    if not np.all(np.isfinite(f.values)):
        raise ValueError("stationarity_residual needs a finite state")
    if not f.values.any():
        return 0.0
    if provider is not None:
        res = provider(f)
    elif disp.kind == "schrodinger":
        from .collision_schrodinger import evaluate_Q_1d
        res = evaluate_Q_1d(f, quad, workers)
    else:
        res = build_kernel(f.grid, disp, quad, workers=workers).apply(f)
    return residual_from(f, res)
