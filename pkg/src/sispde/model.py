"""SIS model coefficients, integrating factor, stationary density and the
mapping of the SIS problem onto the general degenerate form.

All functions accept scalars or numpy arrays of positions in [0, 1]. The
integrating factor grows or decays like exp(+-2N x), so everything that
involves it is computed through its logarithm.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

_X_TOL = 1e-14
_SERIES_CUTOFF = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Population size ``N`` and basic reproductive factor ``R0``."""

    N: float
    R0: float

    def __post_init__(self):
        bad = []
        if not (isinstance(self.N, numbers.Real) and math.isfinite(self.N) and self.N >= 1):
            bad.append("N")
        if not (isinstance(self.R0, numbers.Real) and math.isfinite(self.R0) and self.R0 >= 0):
            bad.append("R0")
        if bad:
            raise ConfigError(
                "invalid model parameters: "
                + ", ".join(f"{k}={getattr(self, k)!r}" for k in bad)
                + " (need N >= 1, R0 >= 0)",
                fields=bad,
            )
        object.__setattr__(self, "N", float(self.N))
        object.__setattr__(self, "R0", float(self.R0))


def _check_unit(x, lo_open=False):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("position must be finite")
    lo = x.min(initial=0.5) if x.size else 0.5
    hi = x.max(initial=0.5) if x.size else 0.5
    if lo < -_X_TOL or hi > 1 + _X_TOL or (lo_open and lo <= 0):
        raise ValueError(f"position outside the unit interval: [{lo}, {hi}]")
    return np.clip(x, 0.0, 1.0)


def _out(v, like):
    return float(v) if np.ndim(like) == 0 else v


def coeffs(x, params: ModelParams):
    """Diffusion and drift coefficients.

    Returns:
        Tuple ``(f, g)`` with f = x(R0(1-x)+1) and g = x(R0(1-x)-1).
    """
    xa = _check_unit(x)
    r = params.R0 * (1.0 - xa)
    return _out(xa * (r + 1.0), x), _out(xa * (r - 1.0), x)


def drift_ratio(x, params: ModelParams):
    """g/f = 1 - 2/(R0(1-x)+1), finite up to and including x = 0."""
    xa = _check_unit(x)
    return _out(1.0 - 2.0 / (params.R0 * (1.0 - xa) + 1.0), x)


def log_F(x, params: ModelParams):
    """Natural log of the integrating factor F = exp(2N int_0^x g/f)."""
    xa = _check_unit(x)
    N, R0 = params.N, params.R0
    if R0 == 0.0:
        out = -2.0 * N * xa
    else:
        out = 2.0 * N * xa + (4.0 * N / R0) * np.log1p(-R0 * xa / (R0 + 1.0))
    return _out(out, x)


def big_F(x, params: ModelParams):
    """Integrating factor F(x); equals 1 at the origin."""
    return _out(np.exp(log_F(x, params)), x)


def omega(x, params: ModelParams):
    """Weight f/F, with the series slope (R0+1)x used for tiny x."""
    xa = _check_unit(x)
    f, _ = coeffs(xa, params)
    w = f * np.exp(-np.asarray(log_F(xa, params)))
    w = np.where(xa < _SERIES_CUTOFF, (params.R0 + 1.0) * xa, w)
    return _out(w, x)


def inv_omega(x, params: ModelParams):
    """F/f on (0, 1]; the singular weight of the transformed problem."""
    xa = _check_unit(x, lo_open=True)
    f, _ = coeffs(xa, params)
    return _out(np.exp(np.asarray(log_F(xa, params))) / f, x)


def stationary(x, C: float, params: ModelParams):
    """Stationary density P_s = C F/f.

    Raises:
        ValueError: C < 0, or x = 0 with C > 0 (P_s ~ C/((R0+1)x) there).
    """
    if C < 0:
        raise ValueError("C must be nonnegative")
    xa = _check_unit(x)
    if C == 0:
        return _out(np.zeros_like(xa), x)
    if np.any(xa <= 0):
        raise ValueError(
            f"stationary density is singular at x = 0 (behaves like C/((R0+1)x) with C={C})"
        )
    return _out(C * np.asarray(inv_omega(xa, params)), x)


Provider = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class GeneralCoefficients:
    """Coefficients of u_t = x a0 u_xx + a1 u_x + a2 u + forcing on (0, l)
    with b1 u_x + b2 u = boundary_data at x = l.

    Providers take ``(x, t)``; ``boundary_data`` takes ``t``. The optional
    derivative providers (``da0``, ``d2a0``, ``da1``) are used when present,
    otherwise finite differences are taken.
    """

    a0: Provider
    a1: Provider
    a2: Provider
    b1: Provider
    b2: Provider
    forcing: Provider
    boundary_data: Callable[[float], float]
    domain_length: float = 1.0
    da0: Optional[Provider] = None
    d2a0: Optional[Provider] = None
    da1: Optional[Provider] = None
    time_dependent: bool = False
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not (self.domain_length > 0 and math.isfinite(self.domain_length)):
            raise ConfigError("domain_length must be positive", fields=["domain_length"])


def _fd_step(l):
    return 1e-4 * l


def derivative(provider: Provider, x, t, l, exact: Optional[Provider] = None, order=1):
    """First or second x-derivative, analytic when available.

    Central differences are used in the interior and one-sided second-order
    stencils within one step of the endpoints.
    """
    x = np.asarray(x, dtype=float)
    if exact is not None:
        return np.asarray(exact(x, t), dtype=float) * np.ones_like(x)
    h = _fd_step(l)
    xc = np.clip(x, h, l - h)
    if order == 1:
        d = (provider(xc + h, t) - provider(xc - h, t)) / (2 * h)
        # shift correction to second order for clipped points
        d2 = (provider(xc + h, t) - 2 * provider(xc, t) + provider(xc - h, t)) / h**2
        return d + (x - xc) * d2
    if order == 2:
        return (provider(xc + h, t) - 2 * provider(xc, t) + provider(xc - h, t)) / h**2
    raise ValueError("order must be 1 or 2")


def sis_general_coefficients(params: ModelParams) -> GeneralCoefficients:
    """General-form coefficients of the SIS problem.

    The drift coefficient is a1 = (R0+1-2R0x)/N - x(R0-1-R0x), which is the
    value that makes x a0'' - a1' + 2a0' + a2 vanish identically.
    """
    N, R0 = params.N, params.R0

    def a0(x, t=0.0):
        return (R0 + 1 - R0 * np.asarray(x, float)) / (2 * N)

    def a1(x, t=0.0):
        x = np.asarray(x, float)
        return (R0 + 1 - 2 * R0 * x) / N - x * (R0 - 1 - R0 * x)

    def a2(x, t=0.0):
        x = np.asarray(x, float)
        return -R0 / N - R0 + 1 + 2 * R0 * x

    def b1(x, t=0.0):
        return np.asarray(x, float) * a0(x)

    def b2(x, t=0.0):
        x = np.asarray(x, float)
        return -a0(x) + x * R0 / (2 * N) + a1(x)

    def zero(x, t=0.0):
        return np.zeros_like(np.asarray(x, float))

    return GeneralCoefficients(
        a0=a0, a1=a1, a2=a2, b1=b1, b2=b2,
        forcing=zero,
        boundary_data=lambda t: 0.0,
        domain_length=1.0,
        da0=lambda x, t=0.0: np.full_like(np.asarray(x, float), -R0 / (2 * N)),
        d2a0=zero,
        da1=lambda x, t=0.0: -2 * R0 / N - (R0 - 1) + 2 * R0 * np.asarray(x, float),
        name=f"sis(N={N:g},R0={R0:g})",
    )
