"""Audits of computed trajectories: decay rates against the Hardy and
Poincare bounds, vanishing at the origin, weak-form residual, concentration
and local power laws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ZeroNormError
from .functionals import hardy_constant_A, poincare_constant, weight_tables, weighted_norm
from .grid import Field
from .model import ModelParams, log_F, omega

RATE_SLACK = 0.02


@dataclass
class DecayReport:
    """Exponential fit of a squared weighted norm.

    ``bound`` is the provable lower bound on the rate (None where the theory
    gives no positive bound for this norm).
    """

    norm: str
    times: np.ndarray
    values: np.ndarray
    rate: float
    r_squared: float
    bound: Optional[float]
    bound_source: str = ""

    @property
    def satisfies_bound(self) -> Optional[bool]:
        if self.bound is None:
            return None
        return self.rate >= self.bound * (1.0 - RATE_SLACK)


def rate_bound(norm: str, params: ModelParams):
    """Lower bound on the decay rate of a squared norm, and its origin."""
    N = params.N
    if norm == "omega_inverse":
        return 1.0 / (4.0 * N * hardy_constant_A(params, "plain")), "1/(4 N A)"
    if norm == "F":
        return 1.0 / (N * poincare_constant(params, "plain")), "1/(N C_P)"
    if norm == "psi":
        A = hardy_constant_A(params, "psi")
        if math.isinf(A):
            return None, "psi-weighted Hardy constant is infinite"
        return 1.0 / (4.0 * N * A), "1/(4 N A_psi)"
    return None, "no rate bound for this norm"


def fit_decay_rate(traj, norm: str, params: ModelParams, window=None, *, shift: float = 0.0) -> DecayReport:
    """Least-squares slope of -log(norm) against t over ``window``.

    Args:
        shift: constant subtracted from z before measuring (the limit value
            of omega p at the origin in the nonvanishing case).

    Raises:
        ZeroNormError: every norm value in the window is zero ("zero norm").
        ValueError: fewer than 5 snapshots or some non-positive values.
    """
    times = np.asarray(traj.times, dtype=float)
    lo, hi = (window if window is not None else (times[0], times[-1]))
    sel = [i for i, t in enumerate(times) if lo - 1e-12 <= t <= hi + 1e-12]
    if len(sel) < 5:
        raise ValueError(f"need at least 5 snapshots in the window, have {len(sel)}")
    vals = []
    for i in sel:
        snap = traj.snapshots[i]
        if shift:
            v = snap.values - shift
            # cancellation leaves round-off where z already equals the shift
            v[np.abs(v) <= 1e-12 * np.abs(snap.values).max()] = 0.0
            snap = snap.copy(values=v)
        vals.append(weighted_norm(snap, norm, params))
    vals = np.array(vals)
    t = times[sel]
    if not np.any(vals):
        raise ZeroNormError("zero norm: nothing to fit")
    if np.any(vals <= 0):
        bad = t[np.argmax(vals <= 0)]
        raise ValueError(f"non-positive norm value at t={bad:g}")
    y = np.log(vals)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    bound, src = rate_bound(norm, params)
    return DecayReport(norm, t, vals, float(-coef[0]), r2, bound, src)


@dataclass
class ScalingReport:
    """Per-snapshot slope of log Q(y) against log y and u(0)^2."""

    times: np.ndarray
    y_values: np.ndarray
    Q: np.ndarray
    slopes: np.ndarray
    origin_sq: np.ndarray
    slope_pass: bool
    origin_pass: bool
    origin_tol: float = 1e-6

    @property
    def verdict(self) -> str:
        return "PASS" if (self.slope_pass and self.origin_pass) else "FAIL"


def _partial_integral(values, grid, y):
    """int_{x_lo}^{y} of the piecewise-constant field."""
    faces = grid.faces
    j = min(int(np.searchsorted(faces, y, side="right")) - 1, grid.n_cells - 1)
    full = float(np.sum(values[:j]) * grid.dx)
    return full + float(values[j]) * (y - faces[j])


def origin_scaling_audit(traj, y_values: Sequence[float] = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5),
                         origin_tol: float = 1e-6) -> ScalingReport:
    """Smallness of the density near the origin.

    Q(y, t) = int_0^y u^2 dx at each snapshot; PASS when the log-log slope of
    Q in y exceeds 1 at every snapshot (Q identically 0 also passes) and the
    extrapolated u(0, t)^2 stays below ``origin_tol``.
    """
    y = np.asarray(sorted(y_values), dtype=float)
    if np.any(y <= 0) or np.any(y > 0.5):
        raise ValueError("cutoffs must lie in (0, 1/2]")
    Qs, slopes, u0sq = [], [], []
    for snap in traj.snapshots:
        u = np.asarray(snap.values)
        q = np.array([_partial_integral(u * u, snap.grid, yy) for yy in y])
        Qs.append(q)
        u0 = 1.5 * u[0] - 0.5 * u[1]
        u0sq.append(u0 * u0)
        if np.all(q == 0):
            slopes.append(math.inf)
        elif np.any(q <= 0):
            slopes.append(-math.inf)
        else:
            slopes.append(float(np.polyfit(np.log(y), np.log(q), 1)[0]))
    slopes = np.array(slopes)
    u0sq = np.array(u0sq)
    return ScalingReport(np.asarray(traj.times), y, np.array(Qs), slopes, u0sq,
                         bool(np.all(slopes > 1.0 + 1e-9)), bool(np.all(u0sq < origin_tol)),
                         origin_tol)


def weak_residual(traj, params: ModelParams, test_set: Optional[Sequence[int]] = None,
                  t_min: float = 0.0) -> float:
    """Maximum residual of the weak identity over interior snapshots.

    For each test function psi_m = sin(m pi x) and each interior snapshot the
    residual is int (p_t psi_m + J psi_m') dx with J = (1/2N)(f p)_x - g p,
    normalised by ||psi_m'||_2 = m pi / sqrt(2). J is evaluated as
    (F/2N) d(omega p)/dx, which vanishes identically on stationary states.
    p_t uses centred differences of the snapshots, which must be equally
    spaced.

    Args:
        t_min: only snapshots with t >= t_min enter. Sampled initial data
            carries O(dx^2) grid-scale content that relaxes on the time
            scale dx^2, so with dt ~ dx^2 the first steps converge below
            second order; a fixed t_min > 0 measures the smooth regime.
    """
    times = np.asarray(traj.times, dtype=float)
    keep = times >= t_min - 1e-12
    snaps = [s for s, k in zip(traj.snapshots, keep) if k]
    times = times[keep]
    if len(times) < 3:
        raise ValueError("need at least 3 snapshots")
    dts = np.diff(times)
    if np.ptp(dts) > 1e-9 * max(1.0, dts.max()):
        raise ValueError("weak_residual needs equally spaced snapshots")
    grid = snaps[0].grid
    x, dx = grid.centers, grid.dx
    ms = list(test_set) if test_set is not None else list(range(1, 9))
    lF = np.asarray(log_F(x, params))
    w = np.asarray(omega(x, params))
    P = np.array([s.values for s in snaps])
    if not np.any(P):
        return 0.0
    worst = 0.0
    for k in range(1, len(times) - 1):
        pt = (P[k + 1] - P[k - 1]) / (times[k + 1] - times[k - 1])
        z = w * P[k]
        J = np.exp(lF) * np.gradient(z, dx, edge_order=2) / (2 * params.N)
        for m in ms:
            ps = np.sin(m * math.pi * x)
            dps = m * math.pi * np.cos(m * math.pi * x)
            r = abs(float(np.sum(pt * ps + J * dps) * dx)) / (m * math.pi / math.sqrt(2))
            worst = max(worst, r)
    return worst


@dataclass
class ConcentrationRow:
    time: float
    mass: float
    first_abs_moment: float
    mass_fraction: float


def concentration_metrics(traj, delta: float = 0.05):
    """Mass, int |x| p dx and the mass within |x| <= delta per snapshot."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    rows = []
    for t, snap in zip(traj.times, traj.snapshots):
        x = snap.grid.centers
        v = np.asarray(snap.values)
        dx = snap.grid.dx
        rows.append(ConcentrationRow(float(t), float(v.sum() * dx),
                                     float(np.sum(np.abs(x) * v) * dx),
                                     float(v[np.abs(x) <= delta + 1e-14].sum() * dx)))
    return rows


def local_exponent(field: Field, fit_window=None) -> float:
    """Slope of log(value) against log(x - x_lo) over ``fit_window``
    (default [2 dx, 20 dx] from the left end).

    Raises:
        ValueError: non-positive values in the window.
    """
    g = field.grid
    lo, hi = fit_window if fit_window is not None else (2 * g.dx, 20 * g.dx)
    r = g.centers - g.x_lo
    sel = (r >= lo - 1e-14) & (r <= hi + 1e-14)
    if sel.sum() < 2:
        raise ValueError("fit window holds fewer than 2 cells")
    v = np.asarray(field.values)[sel]
    if np.any(v <= 0):
        raise ValueError("non-positive values in the fit window")
    return float(np.polyfit(np.log(r[sel]), np.log(v), 1)[0])


@dataclass
class PointwiseReport:
    variant: str
    worst_ratio: float
    passed: bool
    gradient_norm: float
    ratios: np.ndarray = field(repr=False, default=None)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def pointwise_bound_audit(traj, params: ModelParams, variant: str = "corrected",
                          slack: float = RATE_SLACK) -> PointwiseReport:
    """Check p(x,t) <= B(x) exp(-t/(2N C_P)) ||sqrt(F) z0'|| / omega(x).

    ``corrected`` uses B = G(x)^{1/2} with G = int_0^x dy/F, which follows
    from Cauchy-Schwarz and z(0) = 0. ``literal`` uses B = x^{1/2}, which only
    dominates G^{1/2} where F >= 1 near the origin.
    """
    if variant not in ("corrected", "literal"):
        raise ValueError("variant must be 'corrected' or 'literal'")
    if traj.form != "z_form":
        raise ValueError("pointwise_bound_audit needs a z_form trajectory")
    z0 = traj.snapshots[0]
    g = z0.grid
    x = g.centers
    gn = math.sqrt(weighted_norm(z0, "F", params))
    CP = poincare_constant(params, "plain")
    B = np.sqrt(weight_tables(params).G(x)) if variant == "corrected" else np.sqrt(x)
    w = np.asarray(omega(x, params))
    worst = 0.0
    ratios = []
    for t, snap in zip(traj.times, traj.snapshots):
        p = snap.values / w
        bound = B / w * math.exp(-t / (2 * params.N * CP)) * gn
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(bound > 0, p / bound, np.where(p > 0, np.inf, 0.0))
        ratios.append(r.max())
        worst = max(worst, float(r.max()))
    return PointwiseReport(variant, worst, worst <= 1.0 + slack, gn, np.array(ratios))
