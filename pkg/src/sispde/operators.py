"""Finite-volume assembly of the four problem forms.

Every form is written as du/dt = A u + rhs with A tridiagonal. Row i is
``sub[i] u[i-1] + main[i] u[i] + sup[i] u[i+1]``.

p_form
    Unknown p at cell centres, flux J = (1/2N)(f p)_x - g p written with
    u = f p as J = u_x/(2N) - (g/f) u. Faces use a centred difference for
    u_x and the face value of g/f times the average of u. The flux is zero
    at both ends, so columns sum to zero and mass is conserved exactly.
z_form
    omega^{-1} z_t = (1/2N)(F z_x)_x with z(0) given and z_x(1) = 0. The
    capacity of cell i is (1/x_i) int_cell x/omega, which is exact for z
    proportional to x (the behaviour at the Dirichlet end), and the face
    conductance is F/dx at the face (2F(0)/dx on the half cell at x = 0).
symmetrized
    The p_form on (-1, 1) with f(|x|) and the mirror-invariant drift
    sign(x) g(|x|); g/f is taken as 0 on the face at the origin.
general
    u_t = (D u_x + c u)_x + r u + forcing with D = x a0,
    c = a1 - a0 - x a0' and r = a2 - c'. At x = 0 no condition is imposed:
    the face flux is c(0) times the linear extrapolation of u. At x = l the
    third-kind condition b1 u_x + b2 u = psi fixes a boundary value.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CoefficientError, ConfigError
from .grid import Grid
from .model import GeneralCoefficients, ModelParams, coeffs, derivative, drift_ratio, log_F

FORMS = ("p_form", "z_form", "general", "symmetrized")


@dataclass(frozen=True)
class TridiagonalOperator:
    """Discrete generator ``A`` (three diagonals) plus affine part ``rhs``."""

    sub: np.ndarray
    main: np.ndarray
    sup: np.ndarray
    form: str
    rhs: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.main)

    def apply(self, u):
        """Linear part A u."""
        u = np.asarray(u, dtype=float)
        out = self.main * u
        out[1:] += self.sub[1:] * u[:-1]
        out[:-1] += self.sup[:-1] * u[1:]
        return out

    def column_sums(self):
        s = self.main.copy()
        s[:-1] += self.sub[1:]
        s[1:] += self.sup[:-1]
        return s

    def to_dense(self):
        n = self.n
        A = np.diag(self.main)
        A[np.arange(1, n), np.arange(n - 1)] = self.sub[1:]
        A[np.arange(n - 1), np.arange(1, n)] = self.sup[:-1]
        return A


def _gauss_cells(fun, faces, order=8):
    xi, w = np.polynomial.legendre.leggauss(order)
    a, b = faces[:-1], faces[1:]
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * xi[None, :]
    return 0.5 * (b - a) * (fun(x) @ w)


def _flux_form(n, face_lo, face_hi, fc, dx):
    """Rows from face coefficients of J = lo*u_left + hi*u_right, u = fc*p."""
    sup = np.zeros(n)
    sub = np.zeros(n)
    sup[:-1] = face_hi[1:-1] * fc[1:] / dx
    sub[1:] = -face_lo[1:-1] * fc[:-1] / dx
    # diagonal as minus the off-diagonal column entries: exact telescoping
    main = np.zeros(n)
    main[1:] -= sup[:-1]
    main[:-1] -= sub[1:]
    return sub, main, sup


def _assemble_p(params: ModelParams, grid: Grid, symmetric: bool):
    n, dx, N = grid.n_cells, grid.dx, params.N
    xc, xf = grid.centers, grid.faces
    if symmetric:
        fc, _ = coeffs(np.abs(xc), params)
        a = np.sign(xf) * drift_ratio(np.abs(xf), params)
        a[np.abs(xf) < 0.5 * dx] = 0.0
    else:
        fc, _ = coeffs(xc, params)
        a = np.asarray(drift_ratio(xf, params))
    hi = 1.0 / (2 * N * dx) - 0.5 * a      # multiplies u of the right cell
    lo = -1.0 / (2 * N * dx) - 0.5 * a     # multiplies u of the left cell
    hi[[0, -1]] = 0.0
    lo[[0, -1]] = 0.0
    return _flux_form(n, lo, hi, fc, dx)


def _assemble_z(params: ModelParams, grid: Grid, dirichlet_value: float):
    n, dx, N, R0 = grid.n_cells, grid.dx, params.N, params.R0
    xc, xf = grid.centers, grid.faces
    lc = np.asarray(log_F(xc, params))
    # capacity scaled by F(x_i) to keep exponents bounded
    def scaled(x):
        return np.exp(np.asarray(log_F(x, params)) - lc[:, None]) / (R0 + 1.0 - R0 * x)

    cap = _gauss_cells(scaled, xf) / xc
    lf = np.asarray(log_F(xf, params))
    # conductances divided by the capacity of the receiving cell
    right = np.exp(lf[1:] - lc) / (dx * cap * 2 * N)
    left = np.exp(lf[:-1] - lc) / (dx * cap * 2 * N)
    left[0] *= 2.0
    right[-1] = 0.0
    main = -(left + right)
    sup = np.zeros(n)
    sub = np.zeros(n)
    sup[:-1] = right[:-1]
    sub[1:] = left[1:]
    rhs = np.zeros(n)
    rhs[0] = left[0] * dirichlet_value
    return sub, main, sup, rhs


def check_h1(cf: GeneralCoefficients, grid: Grid, t: float = 0.0):
    """Sampled admissibility: a0 > 0, a1(0) > 0, b1(l) != 0.

    Raises:
        CoefficientError: naming the failed condition.
    """
    l = cf.domain_length
    xs = np.concatenate((grid.faces, grid.centers))
    a0 = np.asarray(cf.a0(xs, t), dtype=float)
    if not np.all(np.isfinite(a0)) or a0.min() <= 0:
        raise CoefficientError(f"a0 must be positive on [0, l] (min {a0.min():.3g} at t={t:g})")
    a10 = float(np.asarray(cf.a1(np.array([0.0]), t))[0])
    if not a10 > 0:
        raise CoefficientError(
            f"a1(0, t) = {a10:.3g} <= 0 at t={t:g}; a boundary condition at x=0 would be needed, "
            "which is not supported")
    b1l = float(np.asarray(cf.b1(np.array([l]), t))[0])
    if b1l == 0 or not np.isfinite(b1l):
        raise CoefficientError(f"b1(l, t) must be nonzero (got {b1l!r} at t={t:g})")


def general_parts(cf: GeneralCoefficients, x, t):
    """D, c, r of the conservative rewrite at positions ``x``."""
    l = cf.domain_length
    x = np.asarray(x, dtype=float)
    a0 = np.asarray(cf.a0(x, t), dtype=float)
    a1 = np.asarray(cf.a1(x, t), dtype=float)
    da0 = derivative(cf.a0, x, t, l, cf.da0)
    d2a0 = derivative(cf.a0, x, t, l, cf.d2a0, order=2)
    da1 = derivative(cf.a1, x, t, l, cf.da1)
    D = x * a0
    c = a1 - a0 - x * da0
    dc = da1 - 2 * da0 - x * d2a0
    r = np.asarray(cf.a2(x, t), dtype=float) - dc
    return D, c, r


def _assemble_general(cf: GeneralCoefficients, grid: Grid, t: float):
    check_h1(cf, grid, t)
    n, dx, l = grid.n_cells, grid.dx, cf.domain_length
    xf, xc = grid.faces, grid.centers
    D, c, _ = general_parts(cf, xf, t)
    _, _, r = general_parts(cf, xc, t)
    # J_k = lo_k u_{k-1} + hi_k u_k (+ const at the right end)
    lo = np.zeros(n + 1)
    hi = np.zeros(n + 1)
    lo[1:-1] = -D[1:-1] / dx + 0.5 * c[1:-1]
    hi[1:-1] = D[1:-1] / dx + 0.5 * c[1:-1]
    b1 = float(np.asarray(cf.b1(np.array([l]), t))[0])
    b2 = float(np.asarray(cf.b2(np.array([l]), t))[0])
    psi = float(cf.boundary_data(t))
    den = 2 * b1 / dx + b2
    if den == 0:
        raise CoefficientError("third-kind condition is degenerate on this grid (2 b1/dx + b2 = 0)")
    ub1 = 2 * b1 / (dx * den)
    ub0 = psi / den
    lo[-1] = (2 * D[-1] / dx) * (ub1 - 1.0) + c[-1] * ub1
    jconst = (2 * D[-1] / dx) * ub0 + c[-1] * ub0
    main = (lo[1:] - hi[:-1]) / dx + r
    sub = np.zeros(n)
    sup = np.zeros(n)
    sup[:-1] = hi[1:-1] / dx
    sub[1:] = -lo[1:-1] / dx
    # left face: J_0 = c(0) (3 u_0 - u_1)/2
    main[0] -= 1.5 * c[0] / dx
    sup[0] += 0.5 * c[0] / dx
    rhs = np.asarray(cf.forcing(xc, t), dtype=float) * np.ones(n)
    rhs[-1] += jconst / dx
    return sub, main, sup, rhs


def assemble_operator(model, grid: Grid, form: str, t: float = 0.0, *, dirichlet_value: float = 0.0):
    """Assemble the tridiagonal generator for ``form``.

    Args:
        model: ModelParams for p_form, z_form and symmetrized;
            GeneralCoefficients for general.
        dirichlet_value: z(0) for the z_form.
    """
    if form not in FORMS:
        raise ConfigError(f"unknown form {form!r}; choose from {FORMS}", ["form"])
    if form == "general":
        if not isinstance(model, GeneralCoefficients):
            raise ConfigError("general form needs GeneralCoefficients", ["model"])
        if abs(grid.x_lo) > 1e-14 or abs(grid.x_hi - model.domain_length) > 1e-12:
            raise ConfigError("general form needs the grid [0, l]", ["domain"])
        sub, main, sup, rhs = _assemble_general(model, grid, t)
        return TridiagonalOperator(sub, main, sup, form, rhs)
    if not isinstance(model, ModelParams):
        raise ConfigError(f"{form} needs ModelParams", ["model"])
    if form == "symmetrized":
        if grid.domain != (-1.0, 1.0):
            raise ConfigError("symmetrized form needs the domain [-1, 1]", ["domain"])
        if grid.n_cells % 2:
            raise ConfigError("symmetrized form needs an even number of cells", ["cells"])
        sub, main, sup = _assemble_p(model, grid, True)
        return TridiagonalOperator(sub, main, sup, form)
    if grid.domain != (0.0, 1.0):
        raise ConfigError(f"{form} needs the domain [0, 1]", ["domain"])
    if form == "p_form":
        sub, main, sup = _assemble_p(model, grid, False)
        return TridiagonalOperator(sub, main, sup, form)
    sub, main, sup, rhs = _assemble_z(model, grid, dirichlet_value)
    return TridiagonalOperator(sub, main, sup, form, rhs if dirichlet_value else None)
