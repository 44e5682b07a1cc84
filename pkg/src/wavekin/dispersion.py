"""Radial dispersion laws omega(p) = Omega(|p|) and their admissibility checks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

KINDS = ("schrodinger", "bogoliubov", "modified_bogoliubov", "low_temp_poly", "custom")

_N_PARAMS = {"schrodinger": 0, "bogoliubov": 2, "modified_bogoliubov": 3, "low_temp_poly": 3}

ArrayFn = Callable[[np.ndarray], np.ndarray]


class DispersionError(ValueError):
    pass


@dataclass(frozen=True)
class AssumptionReport:
    c1_est: float
    c2_est: float
    pass_iii: bool
    pass_iv: bool
    samples: np.ndarray = field(repr=False)
    note: str = "pass on sampled range"

    def to_dict(self) -> dict:
        return {
            "c1_est": self.c1_est,
            "c2_est": self.c2_est,
            "pass_iii": self.pass_iii,
            "pass_iv": self.pass_iv,
            "n_samples": int(self.samples.size),
            "sample_min": float(self.samples[0]),
            "sample_max": float(self.samples[-1]),
            "note": self.note,
        }


@dataclass(frozen=True, eq=False)
class DispersionRelation:
    """A normalized radial law. ``omega(0) == 0`` and all maps act elementwise on arrays."""

    kind: str
    params: tuple
    offset: float
    _omega: ArrayFn = field(repr=False)
    _omega_prime: ArrayFn = field(repr=False)
    _inverse: ArrayFn | None = field(repr=False, default=None)
    c1: float = float("nan")
    c2: float = float("nan")

    def omega(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r == 0.0, 0.0, self._omega(r))
        return out if out.ndim else float(out)

    def omega_prime(self, r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(self._omega_prime(r), dtype=float)
        return out if out.ndim else float(out)

    def inverse(self, E):
        """Vectorized Omega^{-1}; closed form for built-in laws, bisection otherwise."""
        E = np.asarray(E, dtype=float)
        if self._inverse is not None:
            r = self._inverse(np.maximum(E, 0.0))
        else:
            r = _bisect_inverse(self.omega, np.maximum(E, 0.0))
        r = np.asarray(r, dtype=float).reshape(E.shape)
        return r if r.ndim else float(r)

    def key(self) -> str:
        """Stable identity used in cache keys."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(np.asarray(self.params, dtype=float).tobytes())
        probe = np.geomspace(1e-3, 1e3, 64)
        h.update(np.asarray(self.omega(probe), dtype=float).round(12).tobytes())
        return h.hexdigest()[:16]


def _bisect_inverse(omega: ArrayFn, E: np.ndarray, rtol: float = 1e-15) -> np.ndarray:
    E = np.atleast_1d(E).astype(float)
    lo = np.zeros_like(E)
    hi = np.ones_like(E)
    for _ in range(2100):
        short = omega(hi) < E
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
        lo = np.where(short, hi / 2.0, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = omega(mid) < E
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * np.maximum(hi, 1e-300)):
            break
    r = 0.5 * (lo + hi)
    return np.where(E == 0.0, 0.0, r)


def _require_positive(kind, params, names):
    for name, v in zip(names, params):
        if not np.isfinite(v) or v <= 0:
            raise DispersionError(f"{kind}: coefficient {name} must be strictly positive, got {v}")


def make_dispersion(kind: str, params: Sequence[float] = (), *, omega: ArrayFn | None = None,
                    omega_prime: ArrayFn | None = None, certify: bool = True) -> DispersionRelation:
    """Build a dispersion law.

    Built-in kinds take coefficient lists: bogoliubov [t1, t2], modified_bogoliubov
    [t0, t1, t2], low_temp_poly [l0, l1, l2]. ``custom`` takes either callables
    ``omega``/``omega_prime`` or a polynomial coefficient list a_0, a_1, ... for
    sum a_k r^k. The raw value at 0 is subtracted so omega(0) = 0.
    """
    if kind not in KINDS:
        raise DispersionError(f"unknown dispersion kind {kind!r}; expected one of {', '.join(KINDS)}")
    params = tuple(float(p) for p in params)
    if kind in _N_PARAMS and len(params) != _N_PARAMS[kind]:
        raise DispersionError(f"{kind} takes {_N_PARAMS[kind]} coefficients, got {len(params)}")

    inverse = None
    norm = None
    if kind == "schrodinger":
        raw = lambda r: r * r
        raw_prime = lambda r: 2.0 * r
        inverse = lambda E: np.sqrt(E)
    elif kind == "bogoliubov":
        _require_positive(kind, params, ("theta1", "theta2"))
        t1, t2 = params
        raw = lambda r: np.sqrt(t1 * r * r + t2 * r**4)
        raw_prime = lambda r: _safe_div((t1 + 2.0 * t2 * r * r) * r, np.sqrt(t1 * r * r + t2 * r**4), np.sqrt(t1))

        def inverse(E):
            y = 2.0 * E * E / (t1 + np.sqrt(t1 * t1 + 4.0 * t2 * E * E))
            return np.sqrt(y)
    elif kind == "modified_bogoliubov":
        _require_positive(kind, params, ("theta0", "theta1", "theta2"))
        t0, t1, t2 = params
        raw = lambda r: np.sqrt(t0 + t1 * r * r + t2 * r**4)
        # cancellation-free form of raw(r) - sqrt(t0)
        norm = lambda r: (t1 * r * r + t2 * r**4) / (np.sqrt(t0 + t1 * r * r + t2 * r**4) + np.sqrt(t0))
        raw_prime = lambda r: (t1 + 2.0 * t2 * r * r) * r / np.sqrt(t0 + t1 * r * r + t2 * r**4)

        def inverse(E):
            c = E * E + 2.0 * E * np.sqrt(t0)
            y = 2.0 * c / (t1 + np.sqrt(t1 * t1 + 4.0 * t2 * c))
            return np.sqrt(y)
    elif kind == "low_temp_poly":
        _require_positive(kind, params, ("lambda0", "lambda1", "lambda2"))
        l0, l1, l2 = params
        raw = lambda r: l0 + l1 * r * r + l2 * r**4
        norm = lambda r: l1 * r * r + l2 * r**4
        raw_prime = lambda r: 2.0 * l1 * r + 4.0 * l2 * r**3

        def inverse(E):
            y = 2.0 * E / (l1 + np.sqrt(l1 * l1 + 4.0 * l2 * E))
            return np.sqrt(y)
    else:
        if omega is None:
            if not params:
                raise DispersionError("custom: supply omega callable or polynomial coefficients")
            coef = np.array(params)
            raw = lambda r: np.polynomial.polynomial.polyval(r, coef)
            dcoef = np.polynomial.polynomial.polyder(coef)
            raw_prime = lambda r: np.polynomial.polynomial.polyval(r, dcoef) + 0.0 * r
        else:
            raw = lambda r: np.asarray(omega(r), dtype=float)
            raw_prime = omega_prime if omega_prime is not None else _central_difference(raw)

    offset = float(raw(np.array(0.0)))
    if norm is None:
        norm = lambda r: raw(r) - offset
    disp = DispersionRelation(kind, params, offset, norm, raw_prime, inverse)
    if certify:
        rep = validate_assumptions(disp, 2000, 1e4)
        disp = DispersionRelation(kind, params, offset, norm, raw_prime, inverse, rep.c1_est, rep.c2_est)
    return disp


def _safe_div(num, den, limit):
    den = np.asarray(den, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = num / den
    return np.where(den > 0, q, limit)


def _central_difference(fn: ArrayFn) -> ArrayFn:
    def d(r):
        r = np.asarray(r, dtype=float)
        h = 1e-6 * np.maximum(r, 1e-3)
        lo = np.maximum(r - h, 0.0)
        return (fn(r + h) - fn(lo)) / (r + h - lo)
    return d


def invert_omega(disp: DispersionRelation, E: float) -> float:
    """Radius r >= 0 with omega(r) = E."""
    if np.any(np.asarray(E) < 0):
        raise DispersionError(f"invert_omega needs E >= 0, got {E}")
    return disp.inverse(E)


def c2_ladder(k_max: int = 160) -> np.ndarray:
    return 2.0 ** (np.arange(1, k_max + 1) / 8.0)


def validate_assumptions(disp: DispersionRelation, n_samples: int = 10_000, r_max: float = 1e6,
                         r_min: float = 1e-6) -> AssumptionReport:
    """Empirical certificates for Omega'(x) >= c1 x and Omega(x) <= Omega(c2 x)/2."""
    if n_samples < 2:
        raise DispersionError("n_samples must be >= 2")
    if r_max <= 0:
        raise DispersionError("r_max must be positive")
    r = np.geomspace(min(r_min, r_max / 10), r_max, n_samples)
    om = disp.omega(r)
    dom = disp.omega_prime(r)
    if not (np.all(np.isfinite(om)) and np.all(np.isfinite(dom))):
        raise DispersionError(f"{disp.kind}: non-finite omega on sampled radii")
    c1 = float(np.min(dom / r))
    c2 = float("nan")
    for c in c2_ladder():
        big = disp.omega(c * r)
        if not np.all(np.isfinite(big)):
            break
        if np.all(om <= 0.5 * big * (1.0 + 1e-12)):
            c2 = float(c)
            break
    return AssumptionReport(c1, c2, bool(c1 > 0), bool(np.isfinite(c2)), r)
