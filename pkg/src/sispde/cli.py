"""Command-line entry point.

Subcommands: steady, evolve, spectral, constants, delta, audit. Settings come
from an optional key-value config file (``--config``) overridden by flags.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, functionals, initial, output, spectral
from .errors import ConfigError, NumericalFailure
from .grid import Field, build_grid
from .model import ModelParams, big_F, log_F, omega, sis_general_coefficients, stationary
from .solver import SCHEMES, Trajectory, config_hash, evolve

COMMANDS = ("steady", "evolve", "spectral", "constants", "delta", "audit")
EVOLVE_FORMS = ("p_form", "z_form", "general")
OUTPUT_ROOT_ENV = "SISPDE_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
ORIGIN_WINDOW = 0.05


@dataclass
class RunConfig:
    """One experiment. ``snapshots`` is the cadence in steps (None: about 50
    snapshots per run)."""

    command: str = "evolve"
    r0: float = 2.0
    n: float = 200.0
    cells: int = 1000
    dt: float = 0.01
    t_end: float = 5.0
    snapshots: Optional[int] = None
    init: Optional[str] = None
    out: Optional[str] = None
    checkpoint: Optional[str] = None
    resume: bool = False
    delta_halfwidth: float = 0.05
    modes: int = 40
    sl_grid: int = 4000
    form: str = "p_form"
    scheme: str = "backward_euler"
    c_limit: float = 1.0
    chain: str = "exact"
    input: Optional[str] = None

    def hashed(self) -> dict:
        """Fields that determine the artifacts (paths and resume excluded)."""
        d = dataclasses.asdict(self)
        for k in ("out", "checkpoint", "resume"):
            d.pop(k)
        return d


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    t = _TYPES[key]
    if isinstance(raw, str) and raw.strip().lower() in ("none", "") and "Optional" in str(t):
        return None
    if "bool" in str(t):
        if isinstance(raw, bool):
            return raw
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if "int" in str(t):
        v = float(raw)
        if v != int(v):
            raise ValueError(f"{key} must be an integer")
        return int(v)
    if "float" in str(t):
        return float(raw)
    return str(raw).strip()


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out, bad = {}, []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", ["config"]) from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not eq or key not in _TYPES:
            bad.append(f"line {lineno}: {line!r}")
            continue
        out[key] = val.strip()
    if bad:
        raise ConfigError(f"{path}: unrecognised entries: " + "; ".join(bad), ["config"])
    return out


def build_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge defaults, config file and flags (flags win) and validate."""
    merged = {}
    if command == "delta":
        merged.update(r0=0.0, n=10.0, cells=2000, t_end=20.0, init="delta")
    if command == "spectral":
        merged.update(r0=0.0, n=100.0)
    merged.update(file_values)
    merged.update(flag_values)
    merged["command"] = command
    values, errors = {}, []
    for key, raw in merged.items():
        try:
            values[key] = _coerce(key, raw)
        except (TypeError, ValueError):
            errors.append((key, f"{key}: cannot parse {raw!r}"))
    cfg = RunConfig(**{k: v for k, v in values.items() if k in _TYPES})
    errors += validate(cfg)
    if errors:
        names = [k for k, _ in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(m for _, m in errors), names)
    return cfg


def validate(cfg: RunConfig):
    """Every violated field as (name, message); empty when valid."""
    errs = []

    def need(ok, key, msg):
        if not ok:
            errs.append((key, f"{key}: {msg}"))

    finite = lambda v: isinstance(v, (int, float)) and math.isfinite(v)
    need(cfg.command in COMMANDS, "command", f"must be one of {COMMANDS}")
    need(finite(cfg.r0) and cfg.r0 >= 0, "R0", f"R0 must be finite and >= 0 (got {cfg.r0})")
    need(finite(cfg.n) and cfg.n >= 1, "N", f"N must be finite and >= 1 (got {cfg.n})")
    need(cfg.cells >= 4, "cells", "needs at least 4 cells")
    if cfg.command == "delta":
        need(cfg.cells % 2 == 0, "cells", "the symmetrized grid needs an even cell count")
    need(finite(cfg.dt) and cfg.dt > 0, "dt", "must be positive")
    need(finite(cfg.t_end) and cfg.t_end >= 0, "t_end", "must be >= 0")
    need(cfg.snapshots is None or cfg.snapshots >= 1, "snapshots", "cadence must be >= 1")
    need(finite(cfg.delta_halfwidth) and cfg.delta_halfwidth > 0, "delta_halfwidth",
         "must be positive")
    need(cfg.modes >= 1, "modes", "must be >= 1")
    need(cfg.sl_grid >= 50 * cfg.modes, "sl_grid", f"must be >= 50*modes = {50 * cfg.modes}")
    need(cfg.form in EVOLVE_FORMS, "form", f"must be one of {EVOLVE_FORMS}")
    need(cfg.scheme in SCHEMES, "scheme", f"must be one of {SCHEMES}")
    need(finite(cfg.c_limit) and cfg.c_limit >= 0, "c_limit", "must be >= 0")
    need(cfg.chain in spectral.CHAINS, "chain", f"must be one of {spectral.CHAINS}")
    need(not cfg.resume or cfg.checkpoint, "resume", "needs --checkpoint")
    if cfg.command == "audit":
        need(cfg.input is not None, "input", "audit needs --input (a density CSV)")
    if cfg.init is not None:
        try:
            kind, opts = initial.parse_init(cfg.init)
            if kind == "mode":
                need(cfg.form != "general", "init", "mode data is defined for the SIS forms")
                need(0 <= opts.get("k", 0) < cfg.modes, "init", "mode index must be < modes")
        except ConfigError as exc:
            errs.append(("init", f"init: {exc}"))
    return errs


def _params(cfg):
    return ModelParams(N=cfg.n, R0=cfg.r0)


def _snap_every(cfg):
    if cfg.snapshots is not None:
        return cfg.snapshots
    return max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9) // 50)


def _initial_field(cfg, grid, params, kind_needed):
    desc = cfg.init or ("delta" if cfg.command == "delta" else "gaussian")
    kind, o = initial.parse_init(desc)
    if kind == "gaussian":
        fld = initial.gaussian(grid, o.get("center", initial.DEFAULT_CENTER),
                               o.get("width", initial.DEFAULT_WIDTH), o.get("mass", 1.0),
                               o.get("power", 0.0), mirror=grid.x_lo < 0)
    elif kind == "stationary":
        fld = initial.stationary_field(grid, params, o.get("C", cfg.c_limit))
    elif kind == "delta":
        fld = initial.delta_field(grid, o.get("mass", 1.0), o.get("width"))
    elif kind == "csv":
        fld = initial.load_csv(o["path"], grid)
    else:
        basis = spectral.eigensolve(params, cfg.modes, cfg.sl_grid, chain=cfg.chain)
        fld = initial.mode_field(grid, basis, o.get("k", 0), o.get("amplitude", 1.0))
    if kind_needed == "z" and fld.kind == "density":
        fld = initial.to_z(fld, params)
    elif kind_needed == "density" and fld.kind == "z":
        fld = initial.to_density(fld, params)
    return fld


def _profile_plot(traj, values, ylabel, title, max_lines=8):
    idx = np.unique(np.linspace(0, len(traj.times) - 1, min(max_lines, len(traj.times))).astype(int))
    x = traj.grid.centers
    series = [(f"t={traj.times[i]:g}", x, values[i]) for i in idx]
    return output.svg_plot(series, "x", ylabel, title)


def _trajectory_artifacts(traj, values=None, ylabel="p"):
    art = {"ledger.csv": output.ledger_csv(traj)}
    if traj.snapshots:
        vals = traj.values() if values is None else values
        art["density.csv"] = output.density_csv(traj, vals)
        art["density.svg"] = _profile_plot(traj, vals, ylabel, "density snapshots")
        art["mass.svg"] = output.svg_plot([("mass", traj.ledger_times, traj.mass_ledger)],
                                          "t", "mass", "mass ledger")
    return art


def _drift(traj):
    m = np.asarray(traj.mass_ledger)
    return float(np.max(np.abs(m - m[0])) / abs(m[0])) if len(m) and m[0] != 0 else 0.0


def _run_steady(cfg, params):
    g = build_grid(cfg.cells)
    x = g.centers
    ps = stationary(x, cfg.c_limit, params)
    rows = zip(x, omega(x, params), big_F(x, params), log_F(x, params), ps)
    art = {"steady.csv": output.csv_text(("x", "omega", "F", "log_F", "P_s"), rows)}
    with np.errstate(divide="ignore"):
        art["steady.svg"] = output.svg_plot([("log10 P_s", x, np.log10(np.abs(ps)))],
                                            "x", "log10 P_s", f"stationary solution C={cfg.c_limit:g}")
    return art, [f"stationary solution tabulated on {cfg.cells} cells, C={cfg.c_limit:g}"]


def _run_evolve(cfg, params):
    g = build_grid(cfg.cells)
    if cfg.form == "general":
        model, need = sis_general_coefficients(params), "density"
    else:
        model, need = params, ("z" if cfg.form == "z_form" else "density")
    f0 = _initial_field(cfg, g, params, need)
    traj = evolve(f0, model, cfg.form, cfg.t_end, cfg.dt, _snap_every(cfg), cfg.checkpoint,
                  scheme=cfg.scheme, resume=cfg.resume)
    dens = traj.values()
    if cfg.form == "z_form":
        dens = dens / np.asarray(omega(g.centers, params))[None, :]
    x = g.centers
    dx = g.dx
    rows = [(t, x[int(np.argmax(v))], float(v.max()), float(v.sum() * dx),
             float(v[x <= ORIGIN_WINDOW].sum() * dx) / max(float(v.sum() * dx), 1e-300))
            for t, v in zip(traj.times, dens)]
    art = _trajectory_artifacts(traj, dens)
    art["summary.csv"] = output.csv_text(("t", "argmax", "max", "mass", "origin_fraction"), rows)
    lines = [f"form={cfg.form} scheme={cfg.scheme} steps={traj.meta['step']}",
             f"relative mass drift {_drift(traj):.3e}",
             f"final argmax {rows[-1][1]:.6g}, origin fraction {rows[-1][4]:.6g}"]
    return art, lines


def _run_spectral(cfg, params):
    basis = spectral.eigensolve(params, cfg.modes, cfg.sl_grid, chain=cfg.chain)
    ks = np.arange(cfg.modes)
    lam = basis.eigenvalues
    asy, asy_x = basis.asymptote(ks), basis.asymptote_x(ks)
    rows = zip(ks, lam, asy, lam / asy, asy_x, lam / asy_x)
    art = {"eigenvalues.csv": output.csv_text(
        ("k", "lambda", "asymptote", "ratio", "asymptote_x", "ratio_x"), rows)}
    art["eigenvalues.svg"] = output.svg_plot([("ratio", ks, lam / asy), ("ratio_x", ks, lam / asy_x)],
                                             "k", "lambda_k / asymptote", "eigenvalue asymptote ratios")
    lines = [f"chain={cfg.chain} s1={basis.map.s1:.10g} lambda_0={lam[0]:.10g}",
             "asymptote = (pi/s1)^2 (k+1/2)^2; asymptote_x = (pi^2/N) (k+1/2)^2 (differ by 8 at R0=0)",
             "note: eigenfunction prefactor follows the transform chain P(s)^(-1/2), not exp(-N^(3/2) x)"]
    return art, lines


def _run_constants(cfg, params):
    rows, lines = [], []
    jobs = [("A", "plain", lambda: functionals.hardy_constant_A(params, "plain")),
            ("A", "psi", lambda: functionals.hardy_constant_A(params, "psi")),
            ("C_P", "plain", lambda: functionals.poincare_constant(params, "plain")),
            ("C_P", "phi", lambda: functionals.poincare_constant(params, "phi"))]
    for name, variant, fn in jobs:
        note = ""
        try:
            val = fn()
            if math.isinf(val):
                note = "divergent: 1/(f psi) is not integrable at the origin"
        except NumericalFailure as exc:
            val, note = math.nan, f"not computed: {exc}"
        rows.append((name, variant, val, note))
        lines.append(f"{name} ({variant}) = {output.fmt(val)} {note}".rstrip())
    for norm in ("omega_inverse", "F"):
        b, src = analysis.rate_bound(norm, params)
        rows.append(("rate_bound", norm, b, src))
    return {"constants.csv": output.csv_text(("name", "variant", "value", "note"), rows)}, lines


def _run_delta(cfg, params):
    g = build_grid(cfg.cells, (-1.0, 1.0))
    f0 = _initial_field(cfg, g, params, "density")
    traj = evolve(f0, params, "symmetrized", cfg.t_end, cfg.dt, _snap_every(cfg), cfg.checkpoint,
                  scheme=cfg.scheme, resume=cfg.resume)
    met = analysis.concentration_metrics(traj, cfg.delta_halfwidth)
    art = _trajectory_artifacts(traj)
    art["concentration.csv"] = output.csv_text(
        ("t", "mass", "first_abs_moment", "mass_fraction"),
        [(r.time, r.mass, r.first_abs_moment, r.mass_fraction) for r in met])
    mom = np.array([r.first_abs_moment for r in met])
    lines = [f"relative mass drift {_drift(traj):.3e}",
             f"first absolute moment strictly decreasing: {bool(np.all(np.diff(mom) < 0))}",
             f"final mass fraction in |x| <= {cfg.delta_halfwidth:g}: {met[-1].mass_fraction:.6g}"]
    return art, lines


def load_trajectory(path, params: Optional[ModelParams] = None) -> Trajectory:
    """Rebuild a density trajectory from a density CSV (uniform grid)."""
    blocks, order = {}, []
    try:
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            if not {"t", "x", "value"} <= set(rd.fieldnames or []):
                raise ConfigError(f"{path}: expected columns t, x, value", ["input"])
            for r in rd:
                t = float(r["t"])
                if t not in blocks:
                    blocks[t] = []
                    order.append(t)
                blocks[t].append((float(r["x"]), float(r["value"])))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}", ["input"]) from exc
    if not order:
        raise ConfigError(f"{path}: no data rows", ["input"])
    first = np.array(sorted(blocks[order[0]]))
    xs = first[:, 0]
    if len(xs) < 4:
        raise ConfigError(f"{path}: fewer than 4 cells", ["input"])
    dx = (xs[-1] - xs[0]) / (len(xs) - 1)
    lo, hi = xs[0] - dx / 2, xs[-1] + dx / 2
    g = build_grid(len(xs), (lo, hi))
    snaps = [initial.load_csv(path, g, t) for t in order]
    mass = np.array([s.values.sum() * g.dx for s in snaps])
    return Trajectory(np.array(order), snaps, np.arange(len(order)), np.array(order), mass,
                      "p_form", params)


def _run_audit(cfg, params):
    traj = load_trajectory(cfg.input, params)
    rows = []

    def add(check, value, verdict):
        rows.append((check, value, verdict))

    drift = _drift(traj)
    add("mass_drift", drift, "PASS" if drift < 1e-10 else "FAIL")
    g = traj.grid
    if g.x_lo == 0.0:
        sc = analysis.origin_scaling_audit(traj)
        add("origin_slope_min", float(np.min(sc.slopes)), "PASS" if sc.slope_pass else "FAIL")
        add("origin_u0_sq_max", float(np.max(sc.origin_sq)), "PASS" if sc.origin_pass else "FAIL")
        try:
            add("weak_residual", analysis.weak_residual(traj, params), "INFO")
        except ValueError as exc:
            add("weak_residual", math.nan, f"SKIP ({exc})")
        try:
            add("local_exponent_final", analysis.local_exponent(traj.snapshots[-1]), "INFO")
        except ValueError as exc:
            add("local_exponent_final", math.nan, f"SKIP ({exc})")
    met = analysis.concentration_metrics(traj, cfg.delta_halfwidth)
    add("final_mass_fraction", met[-1].mass_fraction, "INFO")
    mom = np.array([r.first_abs_moment for r in met])
    add("moment_decreasing", float(np.all(np.diff(mom) < 0)), "INFO")
    art = {"verdicts.csv": output.csv_text(("check", "value", "verdict"), rows)}
    return art, [f"{c}: {output.fmt(v)} {d}" for c, v, d in rows]


RUNNERS = {"steady": _run_steady, "evolve": _run_evolve, "spectral": _run_spectral,
           "constants": _run_constants, "delta": _run_delta, "audit": _run_audit}


def output_dir(cfg: RunConfig) -> Path:
    if cfg.out:
        return Path(cfg.out)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "sispde-output"))
    return root / f"{cfg.command}-{config_hash(cfg.hashed())[:12]}"


def run_experiment(cfg: RunConfig) -> dict:
    """Run one configured experiment and write its artifacts.

    Returns the manifest.
    """
    params = _params(cfg)
    art, lines = RUNNERS[cfg.command](cfg, params)
    art["summary.txt"] = "\n".join([f"command: {cfg.command}", f"N={cfg.n:g} R0={cfg.r0:g}"] + lines) + "\n"
    chash = config_hash(cfg.hashed())
    return output.write_outputs(art, output_dir(cfg), cfg.hashed(), chash)


def _sweep_one(cfg):
    try:
        run_experiment(cfg)
        return EXIT_OK, ""
    except ConfigError as exc:
        return EXIT_CONFIG, str(exc)
    except NumericalFailure as exc:
        return EXIT_NUMERICAL, str(exc)


def _sweep(cfg: RunConfig, spec: str, workers: int):
    key, eq, vals = spec.partition("=")
    key = key.strip().replace("-", "_")
    if not eq or key not in _TYPES or key in ("command", "out"):
        raise ConfigError(f"bad sweep specification {spec!r}", ["sweep"])
    base = output_dir(cfg)
    cfgs = []
    for raw in vals.split(","):
        c = dataclasses.replace(cfg, **{key: _coerce(key, raw)})
        errs = validate(c)
        if errs:
            raise ConfigError("; ".join(m for _, m in errs), [k for k, _ in errs])
        cfgs.append(dataclasses.replace(c, out=str(base / f"{key}={raw.strip()}")))
    # spawn avoids forking a parent that already runs BLAS threads
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
        results = list(ex.map(_sweep_one, cfgs))
    worst = max(code for code, _ in results)
    for c, (code, msg) in zip(cfgs, results):
        if code:
            print(f"{c.out}: {msg}", file=sys.stderr)
    return worst


def _parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    a = common.add_argument
    a("--config", help="key = value configuration file (flags override it)")
    a("--r0", help="basic reproductive factor R0 >= 0")
    a("--n", help="population size N >= 1")
    a("--cells", help="number of grid cells")
    a("--dt", help="time step")
    a("--t-end", dest="t_end", help="final time")
    a("--snapshots", help="snapshot cadence in steps")
    a("--init", help="gaussian[:center=..,width=..,mass=..,power=..] | stationary[:C=..] | "
                     "mode[:k=..] | delta[:mass=..] | csv:PATH")
    a("--out", help=f"output directory (default under ${OUTPUT_ROOT_ENV})")
    a("--checkpoint", help="checkpoint file")
    a("--resume", action="store_const", const=True, help="resume from --checkpoint")
    a("--delta-halfwidth", dest="delta_halfwidth", help="half-width of the concentration window")
    a("--modes", help="number of spectral modes")
    a("--sl-grid", dest="sl_grid", help="eigenproblem grid size")
    a("--form", help="p_form | z_form | general (evolve)")
    a("--scheme", help="backward_euler | crank_nicolson | bdf2")
    a("--c-limit", dest="c_limit", help="limit constant C of the stationary solution")
    a("--chain", help="exact | reduced eigenproblem potential")
    a("--input", help="density CSV to audit")
    a("--sweep", help="KEY=V1,V2,... run one experiment per value")
    a("--workers", help="concurrent workers for --sweep")
    p = argparse.ArgumentParser(prog="sispde", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    return p


def main(argv=None) -> int:
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    sweep = args.pop("sweep", None)
    workers = args.pop("workers", None)
    try:
        file_values = read_config_file(args.pop("config")) if "config" in args else {}
        cfg = build_config(command, file_values, args)
        if sweep:
            return _sweep(cfg, sweep, int(workers or os.cpu_count() or 1))
        manifest = run_experiment(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(manifest['files'])} files to {output_dir(cfg)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
