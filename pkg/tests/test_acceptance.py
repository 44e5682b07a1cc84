"""Acceptance criteria 1-10, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed as the
tests run (visible with ``-s``) and collected again in the terminal summary.
"""

import time

import numpy as np
import pytest

from oracles import smoothed_T1, sphere_interval
from wavekin.bound_probe import probe_bound, random_state
from wavekin.collision_general import evaluate_Q_general, evaluate_T
from wavekin.collision_schrodinger import CROSS_CHECK_QUAD, CROSS_PATH_CONSTANT, evaluate_Q_1d
from wavekin.diagnostics import conservation_report, recorder, stationarity_residual
from wavekin.grid import NormSpec, make_grid, sample_function
from wavekin.resonance import feasible_u_interval, make_slice, pair_radius
from wavekin.stepper import SimulationConfig, picard_solve, safe_dt, scaling_covariance, simulate

VERDICTS: dict = {}


def verdict(k, ok, detail):
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[k] = line
    print(line)
    return ok


def test_criterion_01_stationarity(schr):
    t0 = time.perf_counter()
    res = {}
    for R in (8.0, 16.0, 32.0):
        g = make_grid("gauss-composite", 128, R)
        res[R] = stationarity_residual(sample_function(g, "rayleigh_jeans", (1, 1), schr), schr)
    elapsed = time.perf_counter() - t0
    ok = res[32.0] < 0.05 and res[8.0] > res[16.0] > res[32.0] and elapsed < 60
    detail = ", ".join(f"r_max={R:g}: {v:.4f}" for R, v in res.items()) + f"; {elapsed:.1f} s"
    assert verdict(1, ok, detail), detail


@pytest.fixture(scope="module")
def conservation_runs(schr, kernels):
    g = make_grid("gauss-composite", 128, 16.0)
    K = kernels(g, schr)
    f0 = sample_function(g, "gaussian", (1,))
    dt = safe_dt(f0, provider=K) / 4
    runs = {}
    for h in (dt, dt / 2):
        t0 = time.perf_counter()
        tr = simulate(f0, SimulationConfig(T=0.1, dt=h), schr, provider=K, record=recorder(schr))
        runs[h] = (tr, conservation_report(tr), time.perf_counter() - t0)
    return dt, runs


def test_criterion_02_conservation(conservation_runs):
    dt, runs = conservation_runs
    (_, a, ta), (_, b, tb) = runs[dt], runs[dt / 2]
    small = max(a["mass_drift"], a["energy_drift"]) < 1e-3
    ratio_m = a["mass_drift"] / b["mass_drift"]
    ratio_e = a["energy_drift"] / b["energy_drift"]
    halving = min(ratio_m, ratio_e) >= 1.8
    ok = small and halving and ta + tb < 120
    detail = (f"dt={dt:.4g}: mass {a['mass_drift']:.3e}, energy {a['energy_drift']:.3e}; "
              f"dt/2: mass {b['mass_drift']:.3e}, energy {b['energy_drift']:.3e}; "
              f"halving ratios {ratio_m:.3f}/{ratio_e:.3f} (need >= 1.8); {ta + tb:.1f} s")
    assert verdict(2, ok, detail), detail


def _cross_error(f, schr):
    Qg = evaluate_Q_general(f, schr, CROSS_CHECK_QUAD).Q
    Q1 = evaluate_Q_1d(f, CROSS_CHECK_QUAD).Q
    return float(np.max(np.abs(Qg / Q1 / CROSS_PATH_CONSTANT - 1.0)))


def test_criterion_03_cross_path_constant(schr):
    ga = _cross_error(sample_function(make_grid("gauss-composite", 128, 8.0), "gaussian", (1,)), schr)
    rj = _cross_error(sample_function(make_grid("gauss-composite", 128, 32.0), "rayleigh_jeans", (1, 1), schr),
                      schr)
    ok = max(ga, rj) < 5e-3
    detail = f"max |ratio/4pi^2 - 1|: gaussian {ga:.2e}, rayleigh_jeans {rj:.2e} (tol 5e-3)"
    assert verdict(3, ok, detail), detail


def test_criterion_04_sphere_oracle(schr):
    rng = np.random.default_rng(2024)
    worst_int = worst_pair = 0.0
    for _ in range(1000):
        p, r1 = rng.uniform(0.0, 10.0, 2)
        mu = rng.uniform(-1.0, 1.0)
        sl = make_slice(p, r1, mu, schr)
        lo, hi = feasible_u_interval(sl, schr)
        a, b = sphere_interval(p, r1, mu)
        worst_int = max(worst_int, abs(lo - a), abs(hi - b))
        u = np.linspace(lo, hi, 7)
        w = pair_radius(sl, u, schr)
        worst_pair = max(worst_pair, float(np.max(np.abs(u * u + w * w - sl.E))))
    ok = worst_int < 1e-10 and worst_pair < 1e-10
    detail = f"1000 slices: interval error {worst_int:.1e}, u^2+w^2-E error {worst_pair:.1e}"
    assert verdict(4, ok, detail), detail


def test_criterion_05_smoothed_delta_oracle(schr, bog, grid128):
    f = sample_function(grid128, "gaussian", (1,))
    worst = {}
    for disp in (schr, bog):
        errs = []
        for p in (0.3, 0.7, 1.2, 2.0, 3.0):
            ref = smoothed_T1(p, lambda r: np.exp(-r * r), disp.omega, eps=1e-3)
            errs.append(abs(evaluate_T(1, f, f, f, p, disp) / ref - 1.0))
        worst[disp.kind] = max(errs)
    ok = max(worst.values()) < 0.02
    detail = ", ".join(f"{k} max rel error {v:.2e}" for k, v in worst.items()) + " (tol 2e-2)"
    assert verdict(5, ok, detail), detail


def test_criterion_06_positivity(schr, kernels):
    g = make_grid("gauss-composite", 64, 16.0)
    K = kernels(g, schr)
    spec = NormSpec("sup_weighted", 2.5)
    mins = []
    for seed in range(20):
        f0 = random_state(spec, 1.0, seed, g, schr)
        tr = simulate(f0, SimulationConfig(T=0.1, n_steps=10, norm_guard=False), schr, provider=K)
        mins.append(tr.min_value())
    ok = min(mins) >= 0.0
    detail = f"20 states, T=0.1: smallest snapshot value {min(mins):.3e}"
    assert verdict(6, ok, detail), detail


def test_criterion_07_scaling_covariance(schr):
    g = make_grid("gauss-composite", 128, 16.0)
    f0 = sample_function(g, "gaussian", (1,))
    rep = scaling_covariance(f0, SimulationConfig(n_steps=40, cadence=10), schr, 2.0, (0.025, 0.05, 0.1))
    ok = rep["max_error"] < 0.01
    detail = "sup-relative error " + ", ".join(f"t={t}: {e:.1e}" for t, e in rep["sup_rel_error"].items())
    assert verdict(7, ok, detail), detail


def test_criterion_08_local_time_scaling(schr, kernels):
    g = make_grid("gauss-composite", 64, 16.0)
    K = kernels(g, schr)
    spec = NormSpec("sup_weighted", 2.5)
    T = 0.1
    factors = []
    for seed in range(5):
        f0 = random_state(spec, 1.0, seed, g, schr)
        a = picard_solve(f0, T, 0.0, 5, schr, provider=K)
        b = picard_solve(f0.scaled(2.0), T / 4, 0.0, 5, schr, provider=K)
        factors.append(max(a.kappa, b.kappa) / min(a.kappa, b.kappa))
    ok = all(np.isfinite(factors)) and max(factors) <= 1.5
    detail = f"5 seeds, kappa(R, T) vs kappa(2R, T/4): largest factor {max(factors):.6f} (limit 1.5)"
    assert verdict(8, ok, detail), detail


def test_criterion_09_bound_probes(schr):
    g = make_grid("gauss-composite", 128, 32.0)
    cases = {
        "sup s=2.5 gamma=0.25": (NormSpec("sup_weighted", 2.5), NormSpec("sup_weighted", 2.5, 0.25)),
        "l2 s=0.75": (NormSpec("l2_weighted", 0.75), NormSpec("l2_weighted", 0.75)),
    }
    growth = {}
    for name, (si, so) in cases.items():
        for j in (1, 2, 3):
            rep = probe_bound(j, si, so, 50, g, schr, sizes=(64, 128, 256))
            growth[f"{name} T{j}"] = rep.growth
    ok = all(np.isfinite(v) and v < 2.0 for v in growth.values())
    detail = "growth n=64->256: " + ", ".join(f"{k} {v:.3f}" for k, v in growth.items())
    assert verdict(9, ok, detail), detail


def test_criterion_10_entropy_sign(conservation_runs):
    dt, runs = conservation_runs
    rep = runs[dt][1]
    ok = rep["entropy_verdict"] in ("monotone-increasing", "monotone-decreasing")
    detail = (f"verdict {rep['entropy_verdict']} ({rep['entropy_increments_up']} up, "
              f"{rep['entropy_increments_down']} down, band {rep['entropy_tol']:.3g})")
    assert verdict(10, ok, detail), detail
