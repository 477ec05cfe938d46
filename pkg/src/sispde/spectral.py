"""Sturm-Liouville decomposition of classical solutions of the transformed
problem.

With s = sqrt(2N) int_0^x dy/sqrt(f) the equation for z = omega p becomes
z_t = z_ss + L(s) z_s. The drift has two parts: l(s) = sqrt(2N) g/sqrt(f)
and the Jacobian part m(s) = -f'(x)/(2 sqrt(2N f)) coming from the change of
variables in the second derivative. With P = exp(int L) and U = P^{1/2} z
the problem becomes -U'' + q U = lambda U, q = (L' + L^2/2)/2.

``chain="exact"`` keeps both parts (and the Robin condition at s1 implied by
z_x(1) = 0); ``chain="reduced"`` keeps only l and uses U'(s1) = 0. Only the
exact chain reproduces the spectrum of the finite-volume z_form operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigError, EigenConvergenceError
from .model import ModelParams, omega

CHAINS = ("exact", "reduced")


@dataclass(frozen=True)
class CoordinateMap:
    """x <-> s for the given parameters."""

    params: ModelParams

    @property
    def k(self) -> float:
        """Angular rate: theta = k s with x = ((R0+1)/R0) sin^2(theta)."""
        R0, N = self.params.R0, self.params.N
        return 0.5 * math.sqrt(R0 / (2 * N)) if R0 > 0 else 0.0

    @property
    def s1(self) -> float:
        return float(self.forward(1.0))

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        R0, N = self.params.R0, self.params.N
        if R0 == 0:
            out = 2 * np.sqrt(2 * N * x)
        else:
            out = np.arcsin(np.sqrt(np.clip(R0 / (R0 + 1) * x, 0, 1))) / self.k
        return float(out) if out.ndim == 0 else out

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        R0, N = self.params.R0, self.params.N
        if R0 == 0:
            out = s * s / (8 * N)
        else:
            out = (R0 + 1) / R0 * np.sin(self.k * s) ** 2
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


def coordinate_map(params: ModelParams) -> CoordinateMap:
    return CoordinateMap(params)


def _scalar(v, like):
    return float(v) if np.ndim(like) == 0 else v


def drift_l(s, params: ModelParams):
    """l(s) = sqrt(2N) g/sqrt(f) in closed form.

    For R0 > 0 with theta = k s: l = sqrt(2N/R0)((R0+1) sin(theta) cos(theta)
    - 2 tan(theta)); for R0 = 0: l = -s/2.
    """
    sa = np.asarray(s, dtype=float)
    R0, N = params.R0, params.N
    if R0 == 0:
        return _scalar(-0.5 * sa, s)
    th = CoordinateMap(params).k * sa
    out = math.sqrt(2 * N / R0) * ((R0 + 1) * np.sin(th) * np.cos(th) - 2 * np.tan(th))
    return _scalar(out, s)


def drift_l_prime(s, params: ModelParams):
    """Analytic derivative l'(s) = ((R0+1) cos(2 theta) - 2 sec^2(theta))/2."""
    sa = np.asarray(s, dtype=float)
    R0 = params.R0
    if R0 == 0:
        return _scalar(np.full_like(sa, -0.5), s)
    th = CoordinateMap(params).k * sa
    return _scalar(0.5 * ((R0 + 1) * np.cos(2 * th) - 2 / np.cos(th) ** 2), s)


def int_drift_l(s, params: ModelParams):
    """int_0^s l; equals log F(x(s))."""
    sa = np.asarray(s, dtype=float)
    R0, N = params.R0, params.N
    if R0 == 0:
        return _scalar(-0.25 * sa * sa, s)
    th = CoordinateMap(params).k * sa
    out = (4 * N / R0) * (2 * np.log(np.cos(th)) + 0.5 * (R0 + 1) * np.sin(th) ** 2)
    return _scalar(out, s)


def potential_q(s, params: ModelParams):
    """q = (l' + l^2/2)/2 built from l alone; s^2/16 - 1/4 when R0 = 0."""
    l = np.asarray(drift_l(s, params))
    out = 0.5 * (np.asarray(drift_l_prime(s, params)) + 0.5 * l * l)
    return _scalar(out, s)


def jacobian_drift(s, params: ModelParams):
    """m(s) = -f'(x)/(2 sqrt(2N f)) = -2k cot(2ks) (R0 > 0), -1/s (R0 = 0)."""
    sa = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        if params.R0 == 0:
            out = -1.0 / sa
        else:
            k = CoordinateMap(params).k
            out = -2 * k / np.tan(2 * k * sa)
    return _scalar(out, s)


def jacobian_drift_prime(s, params: ModelParams):
    sa = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        if params.R0 == 0:
            out = 1.0 / (sa * sa)
        else:
            k = CoordinateMap(params).k
            out = 4 * k * k / np.sin(2 * k * sa) ** 2
    return _scalar(out, s)


def full_drift(s, params: ModelParams):
    """Total first-order coefficient L = l + m of the z equation in s."""
    return _scalar(np.asarray(drift_l(s, params)) + np.asarray(jacobian_drift(s, params)), s)


def full_potential(s, params: ModelParams):
    """Liouville potential of the exact chain; ~ 3/(4 s^2) at the origin."""
    L = np.asarray(drift_l(s, params)) + np.asarray(jacobian_drift(s, params))
    Lp = np.asarray(drift_l_prime(s, params)) + np.asarray(jacobian_drift_prime(s, params))
    return _scalar(0.5 * (Lp + 0.5 * L * L), s)


def log_multiplier(s, params: ModelParams, chain="exact"):
    """log P(s), P = exp(int L); the exact chain is normalised so that
    P ~ 1/s at the origin."""
    sa = np.asarray(s, dtype=float)
    out = np.asarray(int_drift_l(sa, params), dtype=float)
    if chain == "exact":
        with np.errstate(divide="ignore"):
            if params.R0 == 0:
                out = out - np.log(sa)
            else:
                k = CoordinateMap(params).k
                out = out - np.log(np.sin(2 * k * sa) / (2 * k))
    return _scalar(out, s)


@dataclass(frozen=True)
class SpectralBasis:
    """Lowest eigenpairs on the uniform s-grid (node 0 is s = 0).

    ``U`` rows are trapezoid-orthonormal; ``S`` rows are the matching z-space
    eigenfunctions P^{-1/2} U (with S(0) = 0).
    """

    s: np.ndarray
    eigenvalues: np.ndarray
    U: np.ndarray
    S: np.ndarray
    log_p: np.ndarray
    q: np.ndarray
    map: CoordinateMap
    chain: str

    @property
    def h(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def trapezoid_weights(self):
        w = np.full(self.s.shape, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def inner(self, a, b) -> float:
        return float(np.sum(self.trapezoid_weights * a * b))

    def asymptote(self, k):
        """(pi/s1)^2 (k+1/2)^2."""
        k = np.asarray(k, dtype=float)
        return (math.pi / self.map.s1) ** 2 * (k + 0.5) ** 2

    def asymptote_x(self, k):
        """(pi^2/N)(k+1/2)^2, the x-coordinate form of the asymptote."""
        k = np.asarray(k, dtype=float)
        return math.pi ** 2 / self.map.params.N * (k + 0.5) ** 2

    def mode(self, k: int, x):
        """S_k(s(x)) by linear interpolation on the s-grid."""
        return np.interp(self.map.forward(np.asarray(x, dtype=float)), self.s, self.S[k])


def _backward_modes(lam, q, logp, h, beta):
    """z-space eigenfunctions by recurrence from s1 towards the origin.

    The rows are those of the Liouville matrix written for z = P^{-1/2} U;
    in this direction the growing companion solution is damped.
    """
    n = len(q) - 1
    rp = 0.5 * logp
    z = np.empty(n + 1)
    z[n] = 1.0
    # boundary row: (-2 U_{n-1} + (2 - 2 h beta) U_n)/h^2 + q_n U_n = lam U_n
    z[n - 1] = 0.5 * ((2 - 2 * h * beta) + h * h * (q[n] - lam)) * math.exp(rp[n] - rp[n - 1])
    for i in range(n - 1, 1, -1):
        z[i - 1] = ((2 + h * h * (q[i] - lam)) * math.exp(rp[i] - rp[i - 1]) * z[i]
                    - math.exp(rp[i + 1] - rp[i - 1]) * z[i + 1])
    z[0] = 0.0
    return z


def eigensolve(params: ModelParams, n_modes: int = 40, n_grid: int = 4000, *, chain: str = "exact",
               potential: Optional[Callable] = None) -> SpectralBasis:
    """Lowest ``n_modes`` eigenpairs of -U'' + q U = lambda U on (0, s1).

    Second-order differences with U(0) = 0. At s1 a mirrored ghost node gives
    U' = beta U, with beta = L(s1)/2 for the exact chain and beta = 0
    otherwise. The boundary row is symmetrised with the trapezoid weight 1/2,
    and the symmetric tridiagonal problem is solved by bisection and inverse
    iteration (LAPACK stebz/stein through scipy).

    Args:
        potential: optional override q(s) (uses U'(s1) = 0 and P = 1).
    """
    if chain not in CHAINS:
        raise ConfigError(f"unknown chain {chain!r}", ["chain"])
    if int(n_modes) != n_modes or n_modes < 1:
        raise ConfigError("n_modes must be a positive integer", ["modes"])
    if n_grid < 50 * n_modes:
        raise ConfigError(f"n_grid must be >= 50 * n_modes = {50 * n_modes}", ["sl-grid"])
    cmap = CoordinateMap(params)
    s1 = cmap.s1
    n = int(n_grid)
    s = np.linspace(0.0, s1, n + 1)
    h = s[1] - s[0]
    si = s[1:]
    if potential is not None:
        q = np.asarray(potential(si), dtype=float) * np.ones_like(si)
        beta = 0.0
        logp = np.zeros(n + 1)
    elif chain == "exact":
        q = np.asarray(full_potential(si, params))
        beta = 0.5 * float(full_drift(s1, params))
        logp = np.concatenate(([np.inf], np.asarray(log_multiplier(si, params, "exact"))))
    else:
        q = np.asarray(potential_q(si, params))
        beta = 0.0
        logp = np.asarray(log_multiplier(s, params, "reduced"))
    d = 2.0 / h ** 2 + q
    d[-1] -= 2.0 * beta / h
    e = np.full(n - 1, -1.0 / h ** 2)
    e[-1] *= math.sqrt(2.0)
    try:
        lam, V = eigh_tridiagonal(d, e, select="i", select_range=(0, n_modes - 1))
    except np.linalg.LinAlgError as exc:
        idx = int("".join(ch for ch in str(exc) if ch.isdigit()) or -1)
        raise EigenConvergenceError(f"eigenpair did not converge: {exc}", idx) from exc
    if not np.all(np.isfinite(lam)) or not np.all(np.isfinite(V)):
        bad = int(np.argmax(~np.isfinite(lam))) if not np.all(np.isfinite(lam)) else -1
        raise EigenConvergenceError("eigensolver returned non-finite values", bad)
    # undo the symmetrisation of the last row, scale to unit trapezoid norm
    V = V.T.copy()
    V[:, -1] *= math.sqrt(2.0)
    V /= math.sqrt(h)
    U = np.zeros((n_modes, n + 1))
    U[:, 1:] = V
    for k in range(n_modes):
        nz = np.flatnonzero(np.abs(U[k]) > 1e-12 * np.abs(U[k]).max())
        if U[k, nz[0]] < 0:
            U[k] = -U[k]
    qfull = np.concatenate(([q[0]], q))
    S = np.zeros_like(U)
    half = np.where(np.isfinite(logp), -0.5 * logp, 0.0)
    for k in range(n_modes):
        direct = np.exp(half) * U[k]
        direct[0] = 0.0
        back = _backward_modes(lam[k], qfull, logp, h, beta)
        i_star = int(np.argmax(np.abs(U[k])))
        if back[i_star] == 0 or not np.all(np.isfinite(back)):
            S[k] = direct
            continue
        back *= direct[i_star] / back[i_star]
        S[k] = np.where(np.arange(n + 1) <= i_star, direct, back)
    return SpectralBasis(s=s, eigenvalues=lam, U=U, S=S, log_p=logp,
                         q=qfull, map=cmap, chain=chain if potential is None else "custom")


def _weighted_p(basis: SpectralBasis):
    w = np.zeros_like(basis.s)
    fin = np.isfinite(basis.log_p)
    w[fin] = np.exp(basis.log_p[fin])
    w[0] = 0.0
    return w * basis.trapezoid_weights


def project_initial(z0, basis: SpectralBasis, *, tol: float = 1e-3):
    """Coefficients c_k = <P^{1/2} z0, U_k> = int P z0 S_k ds.

    Args:
        z0: Field of kind ``z`` on [0, 1] (its density z/omega is linearly
            interpolated to the s-grid and held constant beyond the outer
            cell centres), or a callable z0(x).
        tol: Dirichlet compatibility tolerance relative to max |z0|.

    Raises:
        ValueError: z0 does not vanish at the origin.
    """
    xs = basis.map.inverse(basis.s)
    if callable(z0):
        zs = np.asarray(z0(xs), dtype=float)
        z_at_0 = float(np.asarray(z0(np.array([0.0])))[0])
        scale = np.abs(zs).max()
    else:
        x = z0.grid.centers
        v = np.asarray(z0.values, dtype=float)
        scale = np.abs(v).max()
        z_at_0 = 1.5 * v[0] - 0.5 * v[1]
        # interpolate the density z/omega, which is smooth even when z grows
        # like exp(2N x)
        params = basis.map.params
        pv = v / np.asarray(omega(x, params))
        zs = np.asarray(omega(xs, params)) * np.interp(xs, x, pv)
    if scale == 0:
        return np.zeros(len(basis.eigenvalues))
    if abs(z_at_0) > tol * scale:
        raise ValueError(f"initial data is not compatible with z(0) = 0 (z(0) ~ {z_at_0:.3g})")
    w = _weighted_p(basis)
    return basis.S @ (w * zs)


def evaluate_series(basis: SpectralBasis, coeffs, x, t: float, quantity: str = "z"):
    """Truncated series sum c_k exp(-lambda_k t) S_k(s(x)); ``quantity="p"``
    divides by omega(x)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    c = np.asarray(coeffs, dtype=float)
    amp = c * np.exp(-basis.eigenvalues[:len(c)] * t)
    xa = np.asarray(x, dtype=float)
    sx = basis.map.forward(xa)
    prof = basis.S[:len(c)].T @ amp
    z = np.interp(sx, basis.s, prof)
    if quantity == "z":
        return z
    if quantity == "p":
        return z / np.asarray(omega(xa, basis.map.params))
    raise ValueError("quantity must be 'z' or 'p'")
