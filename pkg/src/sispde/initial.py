"""Initial data builders and the density CSV loader."""
from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ConfigError, NumericalFailure
from .grid import Field, Grid
from .model import ModelParams, omega, stationary

DEFAULT_CENTER = 0.7
DEFAULT_WIDTH = 0.1


def _normalise(values, grid: Grid, mass):
    if mass is None:
        return values
    total = float(np.sum(values) * grid.dx)
    if total <= 0:
        raise ConfigError("initial data has no mass to normalise", ["init"])
    return values * (mass / total)


def gaussian(grid: Grid, center=DEFAULT_CENTER, width=DEFAULT_WIDTH, mass=1.0, vanish_power=0.0,
             mirror=False) -> Field:
    """Gaussian bump, optionally multiplied by |x|^vanish_power so that the
    data vanishes at the origin, scaled to ``mass`` (None keeps peak 1).

    ``mirror`` evaluates the bump at |x|, giving even data on (-1, 1).
    """
    if not width > 0:
        raise ConfigError("width must be positive", ["width"])
    x = np.abs(grid.centers) if mirror else grid.centers
    v = np.exp(-0.5 * ((x - center) / width) ** 2)
    if vanish_power:
        v = v * np.abs(x) ** vanish_power
    return Field(grid, _normalise(v, grid, mass))


def stationary_field(grid: Grid, params: ModelParams, C=1.0) -> Field:
    """P_s = C/omega sampled on the cell centres."""
    return Field(grid, stationary(grid.centers, C, params))


def delta_field(grid: Grid, mass=1.0, width=None) -> Field:
    """Narrow Gaussian at the origin of width 4*dx (default), mass ``mass``."""
    w = 4 * grid.dx if width is None else width
    return gaussian(grid, center=0.0, width=w, mass=mass)


def mode_field(grid: Grid, basis, k: int, amplitude=1.0) -> Field:
    """z-field of the k-th spectral mode S_k sampled on the cell centres."""
    if not 0 <= k < len(basis.eigenvalues):
        raise ConfigError(f"mode index {k} outside 0..{len(basis.eigenvalues) - 1}", ["init"])
    return Field(grid, amplitude * basis.mode(k, grid.centers), kind="z")


def to_z(field: Field, params: ModelParams) -> Field:
    """Density field p -> z = omega*p."""
    if field.kind != "density":
        raise ValueError("expected a density field")
    with np.errstate(over="ignore"):
        z = np.asarray(omega(field.grid.centers, params)) * field.values
    if not np.all(np.isfinite(z)):
        raise NumericalFailure("z = omega p overflows; use the p_form for this N", step=0)
    return Field(field.grid, z, field.time, "z")


def to_density(field: Field, params: ModelParams) -> Field:
    if field.kind != "z":
        raise ValueError("expected a z field")
    return Field(field.grid, field.values / np.asarray(omega(field.grid.centers, params)),
                 field.time, "density")


def load_csv(path, grid: Grid, time=None) -> Field:
    """Read a density CSV (columns t, x, value) onto ``grid``.

    The block with t == ``time`` is used (the last block by default). Values
    are copied verbatim when the abscissae coincide with the cell centres and
    linearly interpolated otherwise.
    """
    rows = []
    try:
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            missing = {"t", "x", "value"} - set(rd.fieldnames or [])
            if missing:
                raise ConfigError(f"{path}: missing columns {sorted(missing)}", ["init"])
            for r in rd:
                rows.append((float(r["t"]), float(r["x"]), float(r["value"])))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}", ["init"]) from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows", ["init"])
    arr = np.array(rows)
    t_sel = arr[-1, 0] if time is None else float(time)
    blk = arr[np.abs(arr[:, 0] - t_sel) <= 1e-12 * max(1.0, abs(t_sel))]
    if len(blk) == 0:
        raise ConfigError(f"{path}: no rows at t={t_sel:g}", ["init"])
    xs, vs = blk[:, 1], blk[:, 2]
    order = np.argsort(xs, kind="stable")
    xs, vs = xs[order], vs[order]
    if len(xs) == grid.n_cells and np.allclose(xs, grid.centers, rtol=0, atol=1e-12):
        values = vs
    else:
        values = np.interp(grid.centers, xs, vs)
    return Field(grid, values, float(t_sel))


def parse_init(spec: str):
    """Parse an initial-data descriptor.

    Forms: ``gaussian``, ``gaussian:center=0.7,width=0.1,mass=1,power=2``,
    ``stationary:C=1``, ``mode:k=0``, ``delta:mass=1``, ``csv:path``.
    Returns (kind, options).
    """
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "csv":
        if not rest:
            raise ConfigError("csv initial data needs a path", ["init"])
        return kind, {"path": rest}
    allowed = {"gaussian": {"center", "width", "mass", "power"}, "stationary": {"C"},
               "mode": {"k", "amplitude"}, "delta": {"mass", "width"}}
    if kind not in allowed:
        raise ConfigError(f"unknown initial data {kind!r}", ["init"])
    opts = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq or key not in allowed[kind]:
            raise ConfigError(f"bad option {item!r} for {kind}", ["init"])
        try:
            opts[key] = float(val)
        except ValueError:
            raise ConfigError(f"option {key} must be numeric", ["init"]) from None
        if not math.isfinite(opts[key]):
            raise ConfigError(f"option {key} must be finite", ["init"])
    if "k" in opts:
        opts["k"] = int(opts["k"])
    return kind, opts
