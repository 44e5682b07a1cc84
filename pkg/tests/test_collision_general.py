import numpy as np
import pytest

from wavekin.collision_general import (CollisionError, build_kernel, evaluate_Q_general, evaluate_T, load_kernel,
                                       save_kernel, kernel_cache_path)
from wavekin.collision_schrodinger import CROSS_CHECK_QUAD, CROSS_PATH_CONSTANT, evaluate_Q_1d
from wavekin.grid import DistributionState, make_grid, sample_function
from wavekin.quadrature import QuadOrders

# Smoothed-delta brute force (eps = 1e-3, analytic exp(-r^2), r_max = 8); see oracles.smoothed_T1
ORACLE_T1 = {
    "schrodinger": {0.3: 2.3878993824509225, 0.7: 1.9626509036011637, 1.2: 1.0313102562708856,
                    2.0: 0.12036078843780773, 3.0: 0.0011765091393604343},
    "bogoliubov": {0.3: 2.0081053042087533, 0.7: 1.752300932576743, 1.2: 0.9734468711637717,
                   2.0: 0.1220228236891922, 3.0: 0.0012527741599283918},
}


def test_zero_inputs(schr, grid64, kernels):
    z = sample_function(grid64, "gaussian", (1,)).scaled(0.0)
    f = sample_function(grid64, "gaussian", (1,))
    for j in (1, 2, 3):
        assert evaluate_T(j, z, z, z, 1.0, schr) == 0.0
        assert evaluate_T(j, f, z, f, 1.0, schr) == 0.0
    assert not evaluate_Q_general(z, schr).Q.any()
    assert not kernels(grid64, schr).apply(z).Q.any()


@pytest.mark.parametrize("kind", ["schrodinger", "bogoliubov"])
def test_smoothed_delta_oracle(kind, schr, bog, grid128):
    disp = schr if kind == "schrodinger" else bog
    f = sample_function(grid128, "gaussian", (1,))
    for p, ref in ORACLE_T1[kind].items():
        assert evaluate_T(1, f, f, f, p, disp) == pytest.approx(ref, rel=2e-2)
        assert evaluate_T(1, f, f, f, p, disp) == pytest.approx(ref, rel=2e-3)  # observed margin


def test_Q2_Q3_positive(schr, grid64):
    one = DistributionState(grid64, np.ones(64))
    g = sample_function(grid64, "gaussian", (0.5,))
    for p in (0.2, 1.0, 3.0):
        assert evaluate_T(2, one, g, g, p, schr) > 0
        assert evaluate_T(3, one, g, g, p, schr) > 0


def test_T_combination_matches_Q(schr, grid64):
    f = sample_function(grid64, "gaussian", (1,))
    Q = evaluate_Q_general(f, schr).Q
    i = 20
    p = grid64.nodes[i]
    parts = [evaluate_T(j, f, f, f, p, schr) for j in (1, 2, 3)]
    assert parts[0] + parts[1] - 2 * parts[2] == pytest.approx(Q[i], rel=1e-10)


def test_cross_path_at_one(schr):
    g = make_grid("uniform-composite", 129, 8.0)
    f = sample_function(g, "gaussian", (1,))
    quad = QuadOrders()
    Q = sum(c * evaluate_T(j, f, f, f, 1.0, schr, quad) for j, c in ((1, 1), (2, 1), (3, -2)))
    assert Q / evaluate_Q_1d(f, quad).Q[16] == pytest.approx(CROSS_PATH_CONSTANT, rel=5e-3)


def test_cross_path_invariant_masked(schr):
    # pointwise where the reduced value exceeds 1e-10 of its max
    g = make_grid("gauss-composite", 64, 16.0)
    f = sample_function(g, "gaussian", (1,))
    Qg = evaluate_Q_general(f, schr, CROSS_CHECK_QUAD).Q
    Q1 = evaluate_Q_1d(f, CROSS_CHECK_QUAD).Q
    mask = np.abs(Q1) > 1e-10 * np.abs(Q1).max()
    assert np.max(np.abs(Qg[mask] / Q1[mask] / CROSS_PATH_CONSTANT - 1)) < 5e-3


@pytest.mark.parametrize("family,params", [("rayleigh_jeans", (1, 1)), ("gaussian", (1,))])
@pytest.mark.parametrize("kind", ["schrodinger", "bogoliubov"])
def test_kernel_matches_direct(kind, family, params, schr, bog, grid64, kernels):
    disp = schr if kind == "schrodinger" else bog
    f = sample_function(grid64, family, params, disp)
    a = kernels(grid64, disp).apply(f)
    b = evaluate_Q_general(f, disp)
    for x, y in ((a.Q, b.Q), (a.gain, b.gain), (a.Q2, b.Q2), (a.Q3, b.Q3)):
        assert np.max(np.abs(x - y)) <= 1e-6 * np.max(np.abs(y))


def test_kernel_weights_positive(schr, bog, grid64, kernels):
    for d in (schr, bog):
        K = kernels(grid64, d)
        assert np.all(K.weight > 0) and np.all(K.g_w > 0)


def test_kernel_deterministic(schr, grid64, kernels):
    K = kernels(grid64, schr)
    f = sample_function(grid64, "gaussian", (1,))
    first = K.apply(f).Q
    for _ in range(100):
        assert np.array_equal(K.apply(f).Q, first)


def test_build_worker_invariance(bog, grid64, kernels):
    a = kernels(grid64, bog)
    b = build_kernel(grid64, bog, workers=2)
    for name in ("g_node", "g_w", "g_k", "g_t", "pt_group", "s_k", "s_t", "t_k", "t_t", "weight"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    f = sample_function(grid64, "gaussian", (1,))
    assert np.array_equal(evaluate_Q_general(f, bog, workers=2).Q, evaluate_Q_general(f, bog, workers=1).Q)


def test_exchange_symmetry(bog, grid64, kernels):
    from wavekin.bound_probe import random_state
    from wavekin.grid import NormSpec
    K = kernels(grid64, bog)
    spec = NormSpec("sup_weighted", 2.5)
    for seed in range(5):
        f, g, h = (random_state(spec, 1.0, 3 * seed + i, grid64) for i in range(3))
        a, b = K.apply_T(1, f, g, h), K.apply_T(1, f, h, g)
        assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


def test_split_parts_nonnegative(bog, grid64, kernels):
    from wavekin.bound_probe import random_state
    from wavekin.grid import NormSpec
    for seed in range(5):
        f = random_state(NormSpec("sup_weighted", 2.5), 1.0, seed, grid64)
        res = kernels(grid64, bog).apply(f)
        assert np.all(res.gain >= 0) and np.all(res.Q2 >= 0) and np.all(res.Q3 >= 0)


def _budget(res, grid, phi):
    w = 4 * np.pi * grid.weights * grid.nodes**2
    scale = np.sum(w * phi * (np.abs(res.T1) + np.abs(res.T2) + 2 * np.abs(res.T3)))
    return abs(np.sum(w * phi * res.Q)) / scale


def test_weak_form_conservation_tightens(bog, grid64, kernels):
    f = sample_function(grid64, "gaussian", (1,))
    coarse = kernels(grid64, bog, QuadOrders(r1=2, mu=2, u=2))
    fine = kernels(grid64, bog)
    for phi in (np.ones(64), bog.omega(grid64.nodes)):
        assert _budget(fine.apply(f), grid64, phi) < _budget(coarse.apply(f), grid64, phi)
        assert _budget(fine.apply(f), grid64, phi) < 1e-4


def test_kernel_cache_round_trip(tmp_path, schr, grid64, kernels):
    K = kernels(grid64, schr)
    path = save_kernel(K, kernel_cache_path(tmp_path, grid64, schr, K.quad))
    L = load_kernel(path, grid64, schr)
    f = sample_function(grid64, "gaussian", (1,))
    assert np.array_equal(L.apply(f).Q, K.apply(f).Q)
    with pytest.raises(CollisionError):
        load_kernel(path, make_grid("gauss-composite", 64, 9.0), schr)


def test_grid_mismatch(schr, grid64, grid128, kernels):
    with pytest.raises(CollisionError):
        kernels(grid64, schr).apply(sample_function(grid128, "gaussian", (1,)))
    f = sample_function(grid64, "gaussian", (1,))
    g = sample_function(grid128, "gaussian", (1,))
    with pytest.raises(CollisionError):
        evaluate_T(1, f, g, f, 1.0, schr)
    with pytest.raises(CollisionError):
        kernels(grid64, schr).apply_T(4, f, f, f)
