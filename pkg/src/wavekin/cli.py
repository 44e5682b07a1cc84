"""Batch front end: flat ``key = value`` configs, subcommands, reproducible outputs.

Example config::

    # comments start with '#'
    dispersion.kind = schrodinger
    grid.n = 128
    grid.r_max = 16
    initial.family = gaussian
    initial.params = 1
    sim.T = 0.1
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bound_probe import probe_bound
from .collision_general import evaluate_Q_general
from .collision_schrodinger import CROSS_CHECK_QUAD, CROSS_PATH_CONSTANT, evaluate_Q_1d
from .diagnostics import compute_record, conservation_report, stationarity_residual
from .dispersion import KINDS, make_dispersion, validate_assumptions
from .grid import FAMILIES, NormSpec, make_grid, sample_function
from .quadrature import QuadOrders
from .stepper import SimulationAborted, SimulationConfig, scaling_covariance, simulate

COMMANDS = ("simulate", "validate-dispersion", "cross-check", "equilibrium-test", "probe-bounds", "scaling-test")
TRAJ_HEADER = "# wavekin-traj v1"
TRAJ_COLUMNS = ("t", "mass", "energy", "entropy", "min_f", "linf_s", "l2_s")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        loc = "".join([f"line {line}: " if line else "", f"{key}: " if key else ""])
        super().__init__(loc + message)
        self.key = key
        self.line = line


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    return lambda text: None if text.strip().lower() in ("", "none") else conv(text)


# key -> (converter, default)
SCHEMA = {
    "command": (str, "simulate"),
    "seed": (int, 0),
    "dispersion.kind": (str, "schrodinger"),
    "dispersion.params": (_floats, ()),
    "grid.scheme": (str, "gauss-composite"),
    "grid.n": (int, 128),
    "grid.r_max": (float, 16.0),
    "grid.panel_order": (int, 8),
    "initial.family": (str, "gaussian"),
    "initial.params": (_floats, ()),
    "sim.scheme": (str, "euler"),
    "sim.T": (float, 0.1),
    "sim.dt": (_opt(float), None),
    "sim.n_steps": (_opt(int), None),
    "sim.positivity_guard": (_bool, True),
    "sim.theta": (float, 0.5),
    "sim.cadence": (int, 1),
    "sim.a_s": (float, 10.0),
    "sim.linf_s": (float, 2.5),
    "sim.l2_s": (float, 0.75),
    "quad.r1": (int, QuadOrders.r1),
    "quad.mu": (int, QuadOrders.mu),
    "quad.u": (int, QuadOrders.u),
    "quad.line": (int, QuadOrders.line),
    "quad.panels": (int, QuadOrders.panels),
    "quad.geo": (int, QuadOrders.geo),
    "cross.r1": (int, CROSS_CHECK_QUAD.r1),
    "cross.mu": (int, CROSS_CHECK_QUAD.mu),
    "cross.u": (int, CROSS_CHECK_QUAD.u),
    "cross.line": (int, CROSS_CHECK_QUAD.line),
    "cross.tol": (float, 5e-3),
    "equilibrium.r_max": (_floats, (8.0, 16.0, 32.0)),
    "probe.j": (int, 1),
    "probe.space": (str, "sup_weighted"),
    "probe.s": (float, 2.5),
    "probe.gamma": (_opt(float), 0.25),
    "probe.n_samples": (int, 50),
    "probe.sizes": (_ints, (64, 128, 256)),
    "scaling.lambda": (float, 2.0),
    "scaling.times": (_floats, (0.025, 0.05, 0.1)),
    "scaling.n_steps": (int, 40),
    "validate.n_samples": (int, 10_000),
    "validate.r_max": (float, 1e6),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict
    out: Path = Path("out")
    workers: int | None = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def command(self) -> str:
        return self.values["command"]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def quad(self) -> QuadOrders:
        v = self.values
        return QuadOrders(v["quad.r1"], v["quad.mu"], v["quad.u"], v["quad.line"], v["quad.panels"], v["quad.geo"])

    def cross_quad(self) -> QuadOrders:
        v = self.values
        return QuadOrders(v["cross.r1"], v["cross.mu"], v["cross.u"], v["cross.line"], v["quad.panels"], v["quad.geo"])

    def sim(self) -> SimulationConfig:
        v = self.values
        return SimulationConfig(scheme=v["sim.scheme"], T=v["sim.T"], dt=v["sim.dt"], n_steps=v["sim.n_steps"],
                                positivity_guard=v["sim.positivity_guard"], theta=v["sim.theta"],
                                cadence=v["sim.cadence"], quad=self.quad(), seed=v["seed"], a_s=v["sim.a_s"],
                                linf_s=v["sim.linf_s"], l2_s=v["sim.l2_s"])

    def canonical(self) -> str:
        return "\n".join(f"{k}={_fmt(self.values[k])}" for k in sorted(self.values)) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def parse_text(text: str, source: str = "<config>") -> dict:
    """Raw key/value pairs; rejects malformed lines, unknown and duplicate keys."""
    raw: dict = {}
    for i, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"{source}: expected 'key = value'", line=i)
        k, v = (x.strip() for x in s.split("=", 1))
        if k not in SCHEMA:
            raise ConfigError(f"{source}: unknown key", key=k, line=i)
        if k in raw:
            raise ConfigError(f"{source}: duplicate key", key=k, line=i)
        raw[k] = (v, i)
    return raw


def parse_config(path=None, overrides: dict | None = None, out=None, workers=None) -> RunConfig:
    """Validated RunConfig from a config file plus ``overrides`` (already typed)."""
    raw = parse_text(Path(path).read_text(), str(path)) if path is not None else {}
    values = {}
    for k, (conv, default) in SCHEMA.items():
        if k in raw:
            text, line = raw[k]
            try:
                values[k] = conv(text)
            except ValueError as e:
                raise ConfigError(str(e), key=k, line=line) from None
        else:
            values[k] = default
    for k, v in (overrides or {}).items():
        if k not in SCHEMA:
            raise ConfigError("unknown key", key=k)
        values[k] = v
    cfg = RunConfig(values, Path(out) if out is not None else Path("out"), workers)
    _validate(cfg, raw)
    return cfg


def _validate(cfg: RunConfig, raw: dict):
    def where(k):
        return raw.get(k, (None, None))[1]
    v = cfg.values
    checks = [
        ("command", v["command"] in COMMANDS, f"unknown subcommand {v['command']!r}"),
        ("dispersion.kind", v["dispersion.kind"] in KINDS, f"unknown dispersion kind {v['dispersion.kind']!r}"),
        ("initial.family", v["initial.family"] in FAMILIES, f"unknown initial family {v['initial.family']!r}"),
    ]
    for k, ok, msg in checks:
        if not ok:
            raise ConfigError(msg, key=k, line=where(k))
    for section, build in (("sim", cfg.sim), ("quad", cfg.quad), ("cross", cfg.cross_quad)):
        try:
            build()
        except ValueError as e:
            keys = [k for k in raw if k.startswith(section + ".")]
            raise ConfigError(str(e), key=section, line=where(keys[0]) if keys else None) from None


# ---------------------------------------------------------------- outputs

def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default, allow_nan=True) + "\n",
                    encoding="utf-8")
    return path


def _row(values) -> str:
    return ",".join(f"{x:.17g}" for x in values)


def write_trajectory_csv(path: Path, records, cfg: RunConfig) -> Path:
    sim = cfg.sim()
    linf, l2 = NormSpec("sup_weighted", sim.linf_s), NormSpec("l2_weighted", sim.l2_s)
    lines = [TRAJ_HEADER, f"# config_hash={cfg.hash()} seed={cfg.seed}", ",".join(TRAJ_COLUMNS)]
    lines += [_row(r.row(linf, l2)) for r in records]
    path.write_text("\n".join(lines) + "\n")
    return path


def _setup(cfg: RunConfig):
    v = cfg.values
    disp = make_dispersion(v["dispersion.kind"], v["dispersion.params"])
    grid = make_grid(v["grid.scheme"], v["grid.n"], v["grid.r_max"], v["grid.panel_order"])
    return disp, grid


def _initial(cfg: RunConfig, grid, disp):
    return sample_function(grid, cfg["initial.family"], cfg["initial.params"], disp)


def _base(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "command": cfg.command}


# ---------------------------------------------------------------- subcommands

def run_simulate(cfg: RunConfig) -> dict:
    disp, grid = _setup(cfg)
    sim = cfg.sim()
    norms = (NormSpec("sup_weighted", sim.linf_s), NormSpec("l2_weighted", sim.l2_s))
    f0 = _initial(cfg, grid, disp)
    rec = lambda s: compute_record(s, disp, norms)
    aborted = None
    try:
        traj = simulate(f0, sim, disp, record=rec, workers=cfg.workers, cache_dir=cfg.out / "cache")
    except SimulationAborted as e:
        traj, aborted = e.trajectory, str(e)
    write_trajectory_csv(cfg.out / "trajectory.csv", traj.records, cfg)
    snap = cfg.out / "snapshots"
    snap.mkdir(exist_ok=True)
    for k, s in enumerate(traj.states):
        s.to_csv(snap / f"f_{k:04d}.csv", header=f"# wavekin-snapshot v1 config_hash={cfg.hash()} t={s.t:.17g}")
    report = dict(_base(cfg), **conservation_report(traj), steps=traj.steps, aborted=aborted,
                  residual_initial=stationarity_residual(f0, disp, sim.quad, workers=cfg.workers))
    write_json(cfg.out / "diagnostics.json", report)
    if aborted:
        raise RuntimeError(aborted)
    return report


def run_validate(cfg: RunConfig) -> dict:
    disp = make_dispersion(cfg["dispersion.kind"], cfg["dispersion.params"], certify=False)
    rep = validate_assumptions(disp, cfg["validate.n_samples"], cfg["validate.r_max"])
    out = dict(_base(cfg), kind=disp.kind, params=list(disp.params), **rep.to_dict())
    out["pass"] = bool(rep.pass_iii and rep.pass_iv)
    write_json(cfg.out / "assumptions.json", out)
    if not out["pass"]:
        raise RuntimeError(f"{disp.kind} fails the growth/doubling checks")
    return out


def run_cross_check(cfg: RunConfig) -> dict:
    disp, grid = _setup(cfg)
    if disp.kind != "schrodinger":
        raise ConfigError("cross-check compares against the reduced path and needs dispersion.kind = schrodinger",
                          key="dispersion.kind")
    f = _initial(cfg, grid, disp)
    quad = cfg.cross_quad()
    Qg = evaluate_Q_general(f, disp, quad, workers=cfg.workers).Q
    Q1 = evaluate_Q_1d(f, quad, workers=cfg.workers).Q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = Qg / Q1
    err = np.abs(ratio / CROSS_PATH_CONSTANT - 1.0)
    lines = [f"# wavekin-cross v1 config_hash={cfg.hash()}", "r,Q_general,Q_1d,ratio"]
    lines += [_row(x) for x in zip(grid.nodes, Qg, Q1, ratio)]
    (cfg.out / "cross_check.csv").write_text("\n".join(lines) + "\n")
    worst = int(np.nanargmax(err))
    out = dict(_base(cfg), constant=CROSS_PATH_CONSTANT, max_rel_error=float(np.nanmax(err)),
               worst_r=float(grid.nodes[worst]), tol=cfg["cross.tol"], quad=list(quad.as_tuple()),
               median_ratio=float(np.nanmedian(ratio)))
    out["pass"] = bool(out["max_rel_error"] < cfg["cross.tol"])
    write_json(cfg.out / "cross_check.json", out)
    if not out["pass"]:
        raise RuntimeError(f"cross-path ratio off by {out['max_rel_error']:.3g} at r={out['worst_r']:.4g}")
    return out


def run_equilibrium(cfg: RunConfig) -> dict:
    disp, grid = _setup(cfg)
    rows = []
    for R in cfg["equilibrium.r_max"]:
        g = make_grid(grid.scheme, grid.n, R, grid.panel_order or 8)
        f = sample_function(g, "rayleigh_jeans", cfg["initial.params"] or (1.0, 1.0), disp)
        rows.append({"r_max": R, "residual": stationarity_residual(f, disp, cfg.quad(), workers=cfg.workers)})
    res = [r["residual"] for r in rows]
    out = dict(_base(cfg), rows=rows, decreasing=bool(all(a > b for a, b in zip(res, res[1:]))))
    write_json(cfg.out / "equilibrium.json", out)
    return out


def run_probe(cfg: RunConfig) -> dict:
    disp, grid = _setup(cfg)
    spec_in = NormSpec(cfg["probe.space"], cfg["probe.s"])
    spec_out = NormSpec(cfg["probe.space"], cfg["probe.s"], cfg["probe.gamma"])
    rep = probe_bound(cfg["probe.j"], spec_in, spec_out, cfg["probe.n_samples"], grid, disp, cfg.quad(),
                      sizes=cfg["probe.sizes"], seed=cfg.seed, workers=cfg.workers)
    lines = [f"# wavekin-probe v1 config_hash={cfg.hash()}", "sample,ratio"]
    lines += [f"{k},{x:.17g}" for k, x in enumerate(rep.ratios)]
    (cfg.out / "probe.csv").write_text("\n".join(lines) + "\n")
    out = dict(_base(cfg), **rep.to_dict())
    write_json(cfg.out / "probe.json", out)
    return out


def run_scaling(cfg: RunConfig) -> dict:
    disp, grid = _setup(cfg)
    f0 = _initial(cfg, grid, disp)
    sim = replace(cfg.sim(), n_steps=cfg["scaling.n_steps"], dt=None)
    rep = scaling_covariance(f0, sim, disp, cfg["scaling.lambda"], cfg["scaling.times"], workers=cfg.workers)
    out = dict(_base(cfg), **rep)
    write_json(cfg.out / "scaling.json", out)
    return out


RUNNERS = {
    "simulate": run_simulate,
    "validate-dispersion": run_validate,
    "cross-check": run_cross_check,
    "equilibrium-test": run_equilibrium,
    "probe-bounds": run_probe,
    "scaling-test": run_scaling,
}


def dispatch(cfg: RunConfig) -> int:
    """Run the configured subcommand; returns the exit status."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    start = time.time()
    status, error = 0, None
    try:
        RUNNERS[cfg.command](cfg)
    except Exception as e:  # surfaced as error JSON, never as a traceback
        status = 2 if isinstance(e, ConfigError) else 1
        error = {"error": type(e).__name__, "message": str(e), "command": cfg.command, "config_hash": cfg.hash()}
        write_json(cfg.out / "error.json", error)
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
    write_json(cfg.out / "metadata.json", {
        "command": cfg.command, "config_hash": cfg.hash(), "seed": cfg.seed, "status": status,
        "version": __version__, "workers": cfg.workers,
        "started": _dt.datetime.fromtimestamp(start, _dt.timezone.utc).isoformat(),
        "elapsed_s": round(time.time() - start, 3),
    })
    (cfg.out / "config.txt").write_text(f"# config_hash={cfg.hash()}\n" + cfg.canonical())
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavekin", description="Isotropic four-wave kinetic equation toolkit.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--workers", type=int, default=os.cpu_count())
    ap.add_argument("--quad-r1", type=int)
    ap.add_argument("--quad-mu", type=int)
    ap.add_argument("--quad-u", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    over = {"command": args.command}
    if args.seed is not None:
        over["seed"] = args.seed
    for name in ("r1", "mu", "u"):
        val = getattr(args, f"quad_{name}")
        if val is not None:
            over[f"quad.{name}"] = val
            over[f"cross.{name}"] = val
    try:
        cfg = parse_config(args.config, over, args.out, args.workers)
    except (ConfigError, OSError) as e:
        err = {"error": type(e).__name__, "message": str(e), "command": args.command}
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(args.out / "error.json", err)
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
