"""Hardy and Poincare constants, auxiliary weights psi and phi, and
weighted norms of grid functions.

Notation: G(x) = int_0^x dy/F, I(x) = int_x^1 dy/omega. The integrand 1/omega
has a simple pole at the origin with residue 1/(R0+1); it is split into that
pole (integrated analytically) plus a smooth remainder that is tabulated.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import DivergentNormError, NumericalFailure, QuadratureError
from .model import ModelParams, coeffs, inv_omega, log_F, omega
from .quadrature import WeightTable

PSI_CUTOFF = 1e-10
NORM_KINDS = ("omega_inverse", "F", "psi", "phiF", "unity")


def _inv_F(x, params):
    return np.exp(-np.asarray(log_F(x, params)))


def _pole_remainder(x, params):
    """F/f - 1/((R0+1)x), smooth on [0, 1]."""
    x = np.asarray(x, dtype=float)
    R0 = params.R0
    lf = np.asarray(log_F(x, params))
    num = (R0 + 1.0) * np.expm1(lf) + R0 * x
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / (x * (R0 + 1.0) * (R0 + 1.0 - R0 * x))
    lim = (2 * params.N * (R0 - 1.0) + R0) / (R0 + 1.0) ** 2
    return np.where(x > 0, out, lim)


def _split_point(params: ModelParams) -> float:
    """Left end of the right-accumulated tail table."""
    return min(1e-2, 1.0 / (4.0 * params.N))


class WeightTables:
    """Cumulative tables for one parameter set.

    ``G`` is int_0^x 1/F. The inner integral int_x^1 dy/omega is accumulated
    from the right on [x_s, 1] (``tail``), which keeps full relative accuracy
    when it is exponentially small, and continued to the left of x_s through
    the pole split (``R``). The nested tables ``H``, ``Phi`` and ``Phi2`` are
    built on first use.
    """

    def __init__(self, params: ModelParams, n_panels: int, order: int = 16):
        self.params = params
        self.n_panels = n_panels
        self.order = order
        self.x_s = _split_point(params)
        kw = self._kw()
        self.G = WeightTable.build(lambda x: _inv_F(x, params),
                                   edge_values=lambda x: _inv_F(x, params), **kw)
        self.R = WeightTable.build(lambda x: _pole_remainder(x, params), a=0.0, b=self.x_s,
                                   n_panels=16, order=order,
                                   edge_values=lambda x: _pole_remainder(x, params))
        self.tail = WeightTable.build(lambda u: inv_omega(1.0 - u, params), a=0.0,
                                      b=1.0 - self.x_s, n_panels=n_panels, order=order)
        self._lazy = {}

    def _kw(self):
        return dict(a=0.0, b=1.0, n_panels=self.n_panels, order=self.order)

    def inner_I(self, x):
        """int_x^1 dy/omega for x in (0, 1]."""
        x = np.asarray(x, dtype=float)
        xs = self.x_s
        right = self.tail(np.clip(1.0 - x, 0.0, 1.0 - xs))
        xl = np.clip(x, 1e-300, xs)
        left = self.R.total - self.R(xl) - np.log(xl / xs) / (self.params.R0 + 1.0)
        return np.where(x >= xs, right, self.tail.total + left)

    def _nested(self, name, integrand):
        if name not in self._lazy:
            try:
                with np.errstate(over="raise"):
                    tab = WeightTable.build(integrand, **self._kw())
            except FloatingPointError as exc:
                raise NumericalFailure(
                    f"nested weight {name} overflows double precision for "
                    f"N={self.params.N:g}, R0={self.params.R0:g}"
                ) from exc
            if not np.isfinite(tab.total):
                raise NumericalFailure(f"nested weight {name} is not finite")
            self._lazy[name] = tab
        return self._lazy[name]

    @property
    def H(self) -> WeightTable:
        p = self.params
        return self._nested("H", lambda x: self.G(x) * _inv_F(x, p))

    @property
    def Phi(self) -> WeightTable:
        p = self.params
        H = self.H
        return self._nested("Phi", lambda x: 2.0 * H(x) * inv_omega(x, p))

    @property
    def Phi2(self) -> WeightTable:
        p = self.params
        Phi = self.Phi
        return self._nested("Phi2", lambda x: Phi(x) * _inv_F(x, p))


def default_panels(params: ModelParams) -> int:
    return int(max(64, math.ceil(4 * params.N)))


@lru_cache(maxsize=32)
def weight_tables(params: ModelParams, n_panels: int | None = None, order: int = 16) -> WeightTables:
    """Build (and cache) the weight tables for ``params``."""
    return WeightTables(params, n_panels or default_panels(params), order)


def inner_integral(x, params: ModelParams):
    """int_x^1 dy/omega(y) for x in (0, 1]."""
    return weight_tables(params).inner_I(x)


def _inner_quad(x, params, rtol):
    xs = _split_point(params)
    f = lambda y: float(inv_omega(y, params))
    if x >= xs:
        return _quad(f, x, 1.0, rtol)
    rem = _quad(lambda y: float(_pole_remainder(y, params)), x, xs, rtol)
    return _quad(f, xs, 1.0, rtol) + rem - math.log(x / xs) / (params.R0 + 1.0)


def psi_weight(x, params: ModelParams):
    """psi(x) = omega^{-1}(x) int_0^x dy/F; tends to 1/(1+R0) at the origin."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise ValueError("psi_weight needs x in (0, 1]")
    T = weight_tables(params)
    safe = np.maximum(xa, PSI_CUTOFF)
    val = np.asarray(inv_omega(safe, params)) * T.G(safe)
    val = np.where(xa < PSI_CUTOFF, 1.0 / (1.0 + params.R0), val)
    return float(val) if np.ndim(x) == 0 else val


def phi_weight(x, params: ModelParams):
    """phi(x) = 2 int_0^x omega^{-1} int_0^y F^{-1} int_0^v F^{-1}; ~ x^2/(2(R0+1))."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise ValueError("phi_weight needs x in [0, 1]")
    val = weight_tables(params).Phi(xa)
    return float(val) if np.ndim(x) == 0 else val


# --------------------------------------------------------------------------
# Hardy constant


@dataclass(frozen=True)
class HardyEstimate:
    """Supremum of the Hardy product and the two strategies that located it."""

    value: float
    argmax: float
    scan_value: float
    polish_value: float
    variant: str
    note: str = ""

    @property
    def agreement(self) -> float:
        if math.isinf(self.value):
            return 0.0
        return abs(self.scan_value - self.polish_value) / self.value


def _quad(fun, a, b, rtol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err, info = integrate.quad(fun, a, b, epsabs=0.0, epsrel=rtol, limit=400,
                                        full_output=1)[:3]
    if err > max(100 * rtol * abs(val), 1e-300) and info.get("last", 0) >= 400:
        raise QuadratureError(f"quadrature did not converge on [{a:.6g}, {b:.6g}]", (a, b))
    return val


def hardy_product(r, params: ModelParams, method="table", rtol=1e-12):
    """(int_0^r dx/F)(int_r^1 dx/omega) at r in (0, 1)."""
    if method == "table":
        T = weight_tables(params)
        r = np.asarray(r, dtype=float)
        return T.G(r) * T.inner_I(r)
    g = _quad(lambda x: float(_inv_F(x, params)), 0.0, r, rtol)
    return g * _inner_quad(r, params, rtol)


def hardy_sup(params: ModelParams, variant="plain", n_scan=10_000) -> HardyEstimate:
    """Locate sup_r of the Hardy product.

    The ``plain`` variant scans a log-uniform grid on the tabulated product
    (refined by a parabola through the best three samples) and then polishes
    with golden-section search on an adaptive-quadrature evaluation of the
    product. The ``psi`` variant pairs 1/(f psi) with psi; since f psi = F G
    grows only linearly at the origin, int_0^r dx/(f psi) = ln G(r) - ln G(0+)
    diverges and the supremum is infinite.
    """
    if variant in ("psi", "psi-weighted"):
        return HardyEstimate(math.inf, math.nan, math.inf, math.inf, "psi",
                             note="int_0^r dx/(f psi) diverges logarithmically at x=0")
    if variant != "plain":
        raise ValueError(f"unknown Hardy variant {variant!r}")
    lr = np.linspace(math.log(1e-12), 0.0, n_scan)[:-1]
    prod = hardy_product(np.exp(lr), params)
    k = int(np.clip(np.argmax(prod), 1, len(lr) - 2))
    y0, y1, y2 = prod[k - 1:k + 2]
    h = lr[1] - lr[0]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den < 0 else 0.0
    scan_val = y1 - 0.25 * (y0 - y2) * shift

    def neg(l):
        return -hardy_product(math.exp(l), params, method="quad")

    res = optimize.minimize_scalar(neg, bracket=(lr[k - 1], lr[k], lr[k + 1]),
                                   method="golden", options={"xtol": 1e-10})
    pol = -float(res.fun)
    return HardyEstimate(pol, math.exp(float(res.x)), float(scan_val), pol, "plain")


def hardy_constant_A(params: ModelParams, variant="plain") -> float:
    """Hardy constant A(R0) for the plain or psi-weighted pairing."""
    return hardy_sup(params, variant).value


# --------------------------------------------------------------------------
# Poincare constant


def poincare_constant(params: ModelParams, variant="plain", method="table", rtol=1e-10) -> float:
    """Poincare constant.

    plain: int_0^1 (1/F(x)) int_x^1 dy/omega dx. phi-weighted: the same with
    phi/F outside and 1/(omega phi) inside.

    ``method="table"`` swaps the order of integration (the plain value is
    int_0^1 psi and the weighted one int_0^1 (int_0^y phi/F)/(omega phi) dy),
    both of which have bounded integrands. ``method="nested"`` evaluates the
    nested form directly with adaptive quadrature, splitting at 1e-4 and
    treating the logarithmic part of the inner integral analytically.
    """
    if variant in ("phi", "phi-weighted"):
        variant = "phi"
    elif variant != "plain":
        raise ValueError(f"unknown Poincare variant {variant!r}")
    T = weight_tables(params)
    if method == "table":
        if variant == "plain":
            tab = WeightTable.build(lambda x: psi_weight(x, params), n_panels=len(T.G.edges) - 1)
        else:
            tab = WeightTable.build(
                lambda y: T.Phi2(y) * inv_omega(y, params) / T.Phi(y), n_panels=len(T.G.edges) - 1)
        return tab.total
    if method != "nested":
        raise ValueError(f"unknown method {method!r}")
    eps = 1e-4
    R0 = params.R0
    if variant == "plain":
        def inner(x):
            return _inner_quad(x, params, rtol)

        def outer(x):
            return float(_inv_F(x, params)) * inner(x)
    else:
        def inner(x):
            return _quad(lambda y: float(inv_omega(y, params)) / phi_weight(y, params), x, 1.0, rtol)

        def outer(x):
            return phi_weight(x, params) * float(_inv_F(x, params)) * inner(x)
    # the plain outer integrand has a log singularity at 0; QUADPACK's
    # extrapolation handles it on the short first piece
    return _quad(outer, 0.0, eps, rtol) + _quad(outer, eps, 1.0, rtol)


# --------------------------------------------------------------------------
# Weighted norms


def _centered_gradient(values, dx):
    if len(values) < 3:
        raise ValueError("need at least 3 cells for a gradient")
    return np.gradient(values, dx, edge_order=2)


def _origin_exponent(z, r, n=4):
    """Power-law exponent of |z| over the first ``n`` cells; inf when z
    vanishes or changes sign there (nothing to diverge)."""
    head = z[:n]
    if np.any(head == 0) or np.ptp(np.sign(head)) != 0:
        return math.inf
    return float(np.polyfit(np.log(r[:n]), np.log(np.abs(head)), 1)[0])


def weighted_norm(field, weight: str, params: ModelParams) -> float:
    """Squared weighted L2 norm of a grid function by the midpoint rule.

    Weights: ``omega_inverse`` (int z^2/omega), ``F`` (int F z'^2), ``psi``
    (int psi z^2), ``phiF`` (int phi F z'^2) and ``unity`` (int z^2).

    Raises:
        DivergentNormError: for ``omega_inverse`` when the field does not
            vanish at the origin (the integral of z(0)^2/x diverges).
    """
    if weight not in NORM_KINDS:
        raise ValueError(f"unknown weight {weight!r}; choose from {NORM_KINDS}")
    grid = field.grid
    x = grid.centers
    z = np.asarray(field.values, dtype=float)
    dx = grid.dx
    if not np.any(z):
        return 0.0
    if weight == "unity":
        return float(np.sum(z * z) * dx)
    if weight == "omega_inverse":
        if _origin_exponent(z, x - grid.x_lo) < 0.25:
            raise DivergentNormError(
                f"int z^2/omega diverges: field does not vanish at x=0 (z ~ {z[0]:.3g} there)"
            )
        # weight applied before squaring: z alone can reach e^{2N}
        return float(np.sum((z * np.sqrt(inv_omega(x, params))) ** 2) * dx)
    if weight == "psi":
        return float(np.sum(z * z * psi_weight(x, params)) * dx)
    dz = _centered_gradient(z, dx)
    sF = np.exp(0.5 * np.asarray(log_F(x, params)))
    if weight == "F":
        return float(np.sum((sF * dz) ** 2) * dx)
    return float(np.sum(phi_weight(x, params) * (sF * dz) ** 2) * dx)


__all__ = [
    "HardyEstimate", "WeightTables", "hardy_constant_A", "hardy_product", "hardy_sup",
    "phi_weight", "poincare_constant", "psi_weight", "weight_tables", "weighted_norm",
    "NORM_KINDS", "omega", "coeffs",
]
