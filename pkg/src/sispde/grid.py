"""Cell-centred uniform meshes and grid functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

NEG_TOL = 1e-12
FIELD_KINDS = ("density", "z")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred mesh on ``[x_lo, x_hi]``."""

    n_cells: int
    domain: tuple
    faces: np.ndarray = field(repr=False, compare=False)
    centers: np.ndarray = field(repr=False, compare=False)
    dx: float = 0.0

    @property
    def x_lo(self) -> float:
        return self.domain[0]

    @property
    def x_hi(self) -> float:
        return self.domain[1]

    def key(self):
        return (self.n_cells, float(self.domain[0]), float(self.domain[1]))


def build_grid(n_cells: int, domain=(0.0, 1.0)) -> Grid:
    """Uniform mesh with ``n_cells`` cells.

    Raises:
        ConfigError: fewer than 4 cells or a degenerate interval.
    """
    if int(n_cells) != n_cells or n_cells < 4:
        raise ConfigError(f"n_cells must be an integer >= 4, got {n_cells!r}", ["cells"])
    lo, hi = float(domain[0]), float(domain[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ConfigError(f"degenerate domain [{lo}, {hi}]", ["domain"])
    n = int(n_cells)
    dx = (hi - lo) / n
    faces = lo + dx * np.arange(n + 1)
    faces[-1] = hi
    centers = lo + dx * (np.arange(n) + 0.5)
    faces.setflags(write=False)
    centers.setflags(write=False)
    return Grid(n, (lo, hi), faces, centers, dx)


@dataclass
class Field:
    """Grid function at time ``time``.

    ``kind`` is ``"density"`` for p (or u of the general form) and ``"z"``
    for the transformed unknown omega*p.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    kind: str = "density"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        self.values = v

    def copy(self, values=None, time=None) -> "Field":
        return Field(self.grid, self.values.copy() if values is None else values,
                     self.time if time is None else time, self.kind)

    def min_ok(self, tol=NEG_TOL) -> bool:
        """Density fields must not undershoot below ``-tol``."""
        return self.kind != "density" or self.values.min() >= -tol


def total_mass(field: Field) -> float:
    """Midpoint-rule mass sum(values) * dx of a density field."""
    if field.kind != "density":
        raise ValueError("total_mass needs a density field")
    return float(np.sum(field.values) * field.grid.dx)
