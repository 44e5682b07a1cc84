"""Collision operator Q = T1 + T2 - 2 T3 for isotropic states and a general radial law.

Quadrature layout for one output radius p
-----------------------------------------
Outer variables are r1 = |p1| and the cosine mu, integrated in the equivalent
variable rho = |p + p1| (dmu = rho drho / (p r1)). On each slice the resonant set
is parameterized by u = |z| with partner w(u) = Omega^{-1}(E - Omega(u)) and
measure 2 pi u w / (Omega'(w) rho) du. The factor 1/rho cancels the Jacobian,
so with u* = Omega^{-1}(E / 2) every slice integral is

    int_{u_min(rho)}^{u_max(rho)} F(u, w) dmeas = (2/rho) int_{u_min(rho)}^{u*} sym F ...

and all slices of one r1 share a single table of Gauss panels in u on
[0, u*]: panels above u_min(rho) are reused by every slice, and only the panel
holding u_min(rho) needs slice-specific nodes. The u <-> w exchange maps the
upper half onto the lower one, which is how the symmetry of the u-integrand is
used. Radii beyond r_max contribute through the zero extension of the
interpolant.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing as mp
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix

from .dispersion import DispersionRelation
from .grid import (DistributionState, Interpolant, RadialGrid, extended_tables, hermite_basis,
                   interpolate, locate)
from .quadrature import QuadOrders, bisect, breakpoints, gauss, gauss_pieces, panel_cuts
from .resonance import lower_u_boundary

TWO_PI = 2.0 * np.pi


class CollisionError(ValueError):
    pass


@dataclass(frozen=True)
class CollisionResult:
    """Node-wise split: Q = gain + f * (Q2 - 2 Q3) with gain = T1, T2 = f Q2, T3 = f Q3."""
    f: np.ndarray
    gain: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray

    @property
    def T1(self):
        return self.gain

    @property
    def T2(self):
        return self.f * self.Q2

    @property
    def T3(self):
        return self.f * self.Q3

    @property
    def loss_part(self):
        return self.f * (self.Q2 - 2.0 * self.Q3)

    @property
    def Q(self):
        return self.gain + self.loss_part


@dataclass
class NodePlan:
    """Quadrature points for one output radius; see module docstring."""
    p: float
    r1: np.ndarray      # (N1,)
    w1: np.ndarray      # (N1,)
    s: np.ndarray       # (N1, M) table nodes in [0, u*]
    t: np.ndarray       # (N1, M) partner radii w(s)
    alpha: np.ndarray   # (N1, M) slice-summed weights times 2 pi s t / Omega'(t)


# ---------------------------------------------------------------- geometry

def _rho_cuts(disp, p, r1, R):
    E = disp.omega(p) + disp.omega(r1)
    a = np.where(E > disp.omega(R), disp.inverse(np.maximum(E - disp.omega(R), 0.0)), 0.0)
    return np.stack([disp.inverse(E), R - a, R + a, a - R], -1)


def _r1_crossings(disp, p, R, hi, nscan=512):
    """r1 values where a rho-cut meets an end of the rho interval [|p - r1|, p + r1]."""
    def diffs(r1):
        c = _rho_cuts(disp, p, r1, R)
        e = np.stack([np.abs(p - r1), p + r1], -1)
        return (c[..., :, None] - e[..., None, :]).reshape(np.shape(r1) + (8,))
    xs = np.linspace(hi * 1e-9, hi, nscan)
    s = np.sign(diffs(xs))
    idx, col = np.nonzero(s[:-1] * s[1:] < 0)
    if idx.size == 0:
        return np.empty(0)
    cols = np.arange(col.size)
    root = bisect(lambda r: diffs(r)[cols, col], xs[idx], xs[idx + 1], iters=60)
    return root


def node_plan(disp: DispersionRelation, p: float, R: float, quad: QuadOrders) -> NodePlan:
    if not p > 0:
        raise CollisionError("output radius must be positive")
    Om = disp.omega
    fixed = panel_cuts(R, quad)
    hi = float(disp.inverse(2.0 * Om(R) - Om(p)))
    cuts = [np.array([p, R]), fixed, R + fixed[fixed < hi - R], _r1_crossings(disp, p, R, hi)]
    if Om(R) > Om(p):
        cuts.append(np.atleast_1d(disp.inverse(Om(R) - Om(p))))
    r1, w1 = gauss_pieces(breakpoints(0.0, hi, np.concatenate(cuts)), quad.r1)
    keep = w1 > 0
    r1, w1 = r1[keep], w1[keep]
    n1 = r1.size

    E = Om(p) + Om(r1)
    us = disp.inverse(E / 2.0)
    a = np.where(E > Om(R), disp.inverse(np.maximum(E - Om(R), 0.0)), 0.0)
    a = np.minimum(a, us)

    # u table on [0, u*]: cut at a (partner reaches r_max), the fixed cuts and their partner images
    marks = np.append(fixed, R)
    images = disp.inverse(np.maximum(E[:, None] - Om(marks)[None, :], 0.0))
    tcuts = np.concatenate([a[:, None], np.broadcast_to(fixed, (n1, fixed.size)), images], 1)
    edges = breakpoints(np.zeros(n1), us, tcuts)
    A, B = edges[:, :-1], edges[:, 1:]
    npan = A.shape[1]
    xg, wg = gauss(quad.u)
    half = 0.5 * (B - A)
    S = (half[..., None] * xg + (0.5 * (A + B))[..., None]).reshape(n1, -1)

    # rho slices
    rho, wr = gauss_pieces(breakpoints(np.abs(p - r1), p + r1, _rho_cuts(disp, p, r1, R)), quad.mu)
    lo = lower_u_boundary(disp, p, r1[:, None], rho, E[:, None])
    lo = np.minimum(lo, us[:, None])
    om = TWO_PI * r1[:, None] * wr / p

    # table weights: panels lying wholly above u_min(rho) collect the slice weights;
    # the panel holding u_min gets its own Gauss rule on [u_min, panel end]
    full = (lo[:, None, :] <= A[:, :, None])                                  # (N1, K, Nrho)
    W = ((np.einsum("ikr,ir->ik", full, om) * half)[..., None] * wg).reshape(n1, -1)
    j = np.clip(np.sum(lo[:, None, :] > A[:, :, None], axis=1) - 1, 0, npan - 1)
    Bj = np.take_along_axis(B, j, 1)
    inside = lo < Bj
    plen = np.where(inside, 0.5 * (Bj - lo), 0.0)
    S2 = (plen[..., None] * (xg + 1.0) + lo[..., None]).reshape(n1, -1)
    W2 = ((om * plen)[..., None] * wg).reshape(n1, -1)
    S = np.concatenate([S, S2], 1)
    W = np.concatenate([W, W2], 1)

    T = disp.inverse(np.maximum(E[:, None] - Om(S), 0.0))
    alpha = W * TWO_PI * S * T / disp.omega_prime(T)
    return NodePlan(float(p), r1, w1, S, T, alpha)


# ---------------------------------------------------------------- evaluation on plans

def _sym(G, H, s, t):
    return G(s) * H(t) + G(t) * H(s)


def _eval_plan(plan: NodePlan, j: int, F, G, H, fp: float) -> float:
    if j == 1:
        inner = np.sum(plan.alpha * _sym(G, H, plan.s, plan.t), axis=1)
        return float(np.sum(plan.w1 * F(plan.r1) * inner))
    if j == 2:
        inner = np.sum(plan.alpha * _sym(G, H, plan.s, plan.t), axis=1)
        return float(fp * np.sum(plan.w1 * inner))
    if j == 3:
        inner = np.sum(plan.alpha * (H(plan.s) + H(plan.t)), axis=1)
        return float(fp * np.sum(plan.w1 * G(plan.r1) * inner))
    raise CollisionError(f"operator index must be 1, 2 or 3, got {j}")


def _check_grids(*states):
    g0 = states[0].grid
    for s in states[1:]:
        if s.grid is not g0 and s.grid.key() != g0.key():
            raise CollisionError("states live on different grids")


def evaluate_T(j: int, f: DistributionState, g: DistributionState, h: DistributionState, p: float,
               disp: DispersionRelation, quad: QuadOrders = QuadOrders()) -> float:
    """Direct quadrature of T_j(f, g, h) at radius p."""
    _check_grids(f, g, h)
    if not (f.values.any() and g.values.any() and h.values.any()):
        return 0.0
    plan = node_plan(disp, p, f.grid.r_max, quad)
    F, G, H = (lambda r, s=s: interpolate(s, r) for s in (f, g, h))
    return _eval_plan(plan, j, F, G, H, float(interpolate(f, p)))


# ---------------------------------------------------------------- parallel map over output nodes

_CTX: dict = {}


def _init_worker(ctx):
    _CTX.clear()
    _CTX.update(ctx)


def _ctx_call(args):
    fn, item = args
    return fn(_CTX, item)


def parallel_map(fn, items, ctx: dict, workers: int | None = 1):
    """Order-preserving map; forked workers inherit ``ctx`` without pickling it."""
    items = list(items)
    workers = os.cpu_count() if workers is None else workers
    if workers <= 1 or len(items) < 2 or "fork" not in mp.get_all_start_methods():
        return [fn(ctx, it) for it in items]
    with mp.get_context("fork").Pool(workers, initializer=_init_worker, initargs=(ctx,)) as pool:
        return pool.map(_ctx_call, [(fn, it) for it in items], chunksize=1)


def _positive_nodes(grid: RadialGrid) -> np.ndarray:
    return np.flatnonzero(grid.nodes > 0)


def _fill_origin(grid: RadialGrid, *arrays):
    if grid.nodes[0] == 0.0:
        for a in arrays:
            a[0] = a[1]


def _direct_node(ctx, i):
    plan = node_plan(ctx["disp"], ctx["nodes"][i], ctx["R"], ctx["quad"])
    F = ctx["F"]
    inner12 = np.sum(plan.alpha * 2.0 * F(plan.s) * F(plan.t), axis=1)
    inner3 = np.sum(plan.alpha * (F(plan.s) + F(plan.t)), axis=1)
    fr = F(plan.r1)
    return (float(np.sum(plan.w1 * fr * inner12)), float(np.sum(plan.w1 * inner12)),
            float(np.sum(plan.w1 * fr * inner3)))


def evaluate_Q_general(f: DistributionState, disp: DispersionRelation, quad: QuadOrders = QuadOrders(),
                       workers: int | None = 1) -> CollisionResult:
    """Direct (uncached) evaluation of Q at every grid node."""
    grid = f.grid
    n = grid.n
    gain, Q2, Q3 = np.zeros(n), np.zeros(n), np.zeros(n)
    if f.values.any():
        ctx = dict(disp=disp, nodes=grid.nodes, R=grid.r_max, quad=quad,
                   F=lambda r: interpolate(f, r))
        idx = _positive_nodes(grid)
        for i, (a, b, c) in zip(idx, parallel_map(_direct_node, idx, ctx, workers)):
            gain[i], Q2[i], Q3[i] = a, b, c
        _fill_origin(grid, gain, Q2, Q3)
    return CollisionResult(f.values.copy(), gain, Q2, Q3)


# ---------------------------------------------------------------- cached kernel

@dataclass(eq=False)
class KernelTensor:
    """Quadrature points of all output nodes projected onto interpolation stencils.

    Groups are (output node, r1 node) pairs; points belong to groups. Each point
    carries the stencils of its u and w radii and a nonnegative weight, each group
    the stencil of r1 and its outer weight.
    """
    grid: RadialGrid
    disp: DispersionRelation
    quad: QuadOrders
    g_node: np.ndarray
    g_w: np.ndarray
    g_k: np.ndarray
    g_t: np.ndarray
    pt_group: np.ndarray
    s_k: np.ndarray
    s_t: np.ndarray
    t_k: np.ndarray
    t_t: np.ndarray
    weight: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_entries(self) -> int:
        return int(self.weight.size)

    def key(self) -> str:
        return kernel_key(self.grid, self.disp, self.quad)

    def _tables(self, state: DistributionState):
        if state.grid is not self.grid and state.grid.key() != self.grid.key():
            raise CollisionError("state grid does not match kernel grid")
        return extended_tables(self.grid, state.values)

    def _basis(self):
        """Sparse maps from stacked (values, slopes) tables to the u, w and r1 points.

        Each row holds the four cubic Hermite weights of one point; built once per kernel.
        """
        b = self.__dict__.get("_basis_cache")
        if b is None:
            h = np.append(np.diff(self.grid.nodes), 1.0)
            n1 = self.grid.n + 1  # tables carry the zero sentinel
            b = []
            for k, t in ((self.s_k, self.s_t), (self.t_k, self.t_t), (self.g_k, self.g_t)):
                k = np.asarray(k, dtype=np.int64)
                cols = np.stack([k, k + 1, n1 + k, n1 + k + 1], axis=-1).ravel()
                indptr = np.arange(0, 4 * k.size + 1, 4)
                b.append(csr_matrix((hermite_basis(h, k, t).ravel(), cols, indptr), shape=(k.size, 2 * n1)))
            b = tuple(b)
            self.__dict__["_basis_cache"] = b
        return b

    def _interp_many(self, states):
        """Values of each state at the u, w and r1 points, each of shape (points, len(states))."""
        tabs = [self._tables(x) for x in states]
        Z = np.concatenate([np.stack([t[0] for t in tabs], 1), np.stack([t[1] for t in tabs], 1)])
        return [M @ Z for M in self._basis()]

    def _node_sum(self, x):
        out = np.bincount(self.g_node, weights=x, minlength=self.grid.n)
        _fill_origin(self.grid, out)
        return out

    def _group_sum(self, x):
        return np.bincount(self.pt_group, weights=x, minlength=self.g_w.size)

    def apply(self, f: DistributionState) -> CollisionResult:
        FS, FT, FR = (a[:, 0] for a in self._interp_many([f]))
        a12 = 2.0 * self._group_sum(self.weight * FS * FT)
        a3 = self._group_sum(self.weight * (FS + FT))
        gain = self._node_sum(self.g_w * FR * a12)
        Q2 = self._node_sum(self.g_w * a12)
        Q3 = self._node_sum(self.g_w * FR * a3)
        return CollisionResult(f.values.copy(), gain, Q2, Q3)

    def apply_T(self, j: int, f: DistributionState, g: DistributionState, h: DistributionState) -> np.ndarray:
        """T_j(f, g, h) at all nodes."""
        if j not in (1, 2, 3):
            raise CollisionError(f"operator index must be 1, 2 or 3, got {j}")
        S, T, Rr = self._interp_many([f, g, h])
        Gs, Ht, Gt, Hs = S[:, 1], T[:, 2], T[:, 1], S[:, 2]
        Fr, Gr = Rr[:, 0], Rr[:, 1]
        if j == 3:
            a = self._group_sum(self.weight * (Hs + Ht))
            return f.values * self._node_sum(self.g_w * Gr * a)
        a = self._group_sum(self.weight * (Gs * Ht + Gt * Hs))
        if j == 1:
            return self._node_sum(self.g_w * Fr * a)
        return f.values * self._node_sum(self.g_w * a)

    def __call__(self, f: DistributionState) -> CollisionResult:
        return self.apply(f)


def kernel_key(grid: RadialGrid, disp: DispersionRelation, quad: QuadOrders) -> str:
    h = hashlib.sha256(f"{grid.key()}|{disp.key()}|{quad.as_tuple()}".encode())
    return h.hexdigest()[:20]


def _kernel_node(ctx, i):
    grid = ctx["grid"]
    plan = node_plan(ctx["disp"], grid.nodes[i], grid.r_max, ctx["quad"])
    gi, pj = np.nonzero(plan.alpha > 0)
    st = locate(grid, plan.s[gi, pj])
    tt = locate(grid, plan.t[gi, pj])
    rt = locate(grid, plan.r1)
    return dict(g_w=plan.w1, g_k=rt.k, g_t=rt.t, pt_group=gi.astype(np.int32),
                s_k=st.k, s_t=st.t, t_k=tt.k, t_t=tt.t, weight=plan.alpha[gi, pj])


def build_kernel(grid: RadialGrid, disp: DispersionRelation, quad: QuadOrders = QuadOrders(),
                 workers: int | None = 1, cache_dir=None) -> KernelTensor:
    """Precompute the collision quadrature of every output node; optionally cached on disk."""
    if cache_dir is not None:
        path = kernel_cache_path(cache_dir, grid, disp, quad)
        if path.exists():
            return load_kernel(path, grid, disp)
    idx = _positive_nodes(grid)
    parts = parallel_map(_kernel_node, idx, dict(grid=grid, disp=disp, quad=quad), workers)
    offs = np.cumsum([0] + [p["g_w"].size for p in parts])
    cat = lambda k: np.concatenate([p[k] for p in parts])
    K = KernelTensor(
        grid=grid, disp=disp, quad=quad,
        g_node=np.concatenate([np.full(p["g_w"].size, i, np.int32) for i, p in zip(idx, parts)]),
        g_w=cat("g_w"), g_k=cat("g_k"), g_t=cat("g_t"),
        pt_group=np.concatenate([p["pt_group"] + o for p, o in zip(parts, offs[:-1])]).astype(np.int32),
        s_k=cat("s_k"), s_t=cat("s_t"), t_k=cat("t_k"), t_t=cat("t_t"), weight=cat("weight"),
        meta=dict(quad=list(quad.as_tuple()), n_nodes=int(grid.n), n_groups=int(offs[-1]),
                  grid_key=grid.key(), disp_key=disp.key()),
    )
    K.meta["n_entries"] = K.n_entries
    if cache_dir is not None:
        save_kernel(K, kernel_cache_path(cache_dir, grid, disp, quad))
    return K


def apply_kernel(K: KernelTensor, f: DistributionState) -> CollisionResult:
    return K.apply(f)


_ARRAYS = ("g_node", "g_w", "g_k", "g_t", "pt_group", "s_k", "s_t", "t_k", "t_t", "weight")


def kernel_cache_path(cache_dir, grid, disp, quad) -> Path:
    return Path(cache_dir) / f"kernel-{kernel_key(grid, disp, quad)}.npz"


def save_kernel(K: KernelTensor, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(K.meta, key=K.key())
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, meta=np.array(json.dumps(meta, sort_keys=True)), **{k: getattr(K, k) for k in _ARRAYS})
    os.replace(tmp, path)
    return path


def load_kernel(path, grid: RadialGrid, disp: DispersionRelation) -> KernelTensor:
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        arrays = {k: z[k] for k in _ARRAYS}
    quad = QuadOrders(*meta["quad"])
    if meta["key"] != kernel_key(grid, disp, quad):
        raise CollisionError(f"{path}: kernel was built for a different grid, dispersion or quadrature")
    return KernelTensor(grid=grid, disp=disp, quad=quad, meta=meta, **arrays)
