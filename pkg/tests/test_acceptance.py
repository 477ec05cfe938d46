"""Acceptance criteria 1 to 12. Each test prints one PASS/FAIL line.

Criteria 6(b) and 12 fail with the default eigenproblem (see README); the
tests state the targets unchanged and report the measured values.
"""
import math

import numpy as np
import pytest

from sispde.analysis import (concentration_metrics, fit_decay_rate, local_exponent,
                             origin_scaling_audit, weak_residual)
from sispde.conservation import check_conservation_conditions
from sispde.functionals import weighted_norm
from sispde.grid import Field, build_grid
from sispde.initial import gaussian, mode_field, stationary_field, to_z
from sispde.model import GeneralCoefficients, ModelParams, inv_omega, sis_general_coefficients
from sispde.solver import Trajectory, evolve
from sispde.spectral import eigensolve, evaluate_series, potential_q, project_initial


def _fraction_near_origin(traj, delta=0.05):
    return concentration_metrics(traj, delta)[-1].mass_fraction


def test_c01_mass_conservation(verdict):
    p = ModelParams(N=100, R0=0)
    g = build_grid(2000)
    tr = evolve(gaussian(g), p, "p_form", 10.0, 1e-3, snapshot_every=10_000)
    assert tr.ledger_steps[-1] == 10_000
    drift = np.ptp(tr.mass_ledger) / tr.mass_ledger[0]
    assert verdict("1 mass conservation", drift < 1e-10, f"relative drift {drift:.2e} (< 1e-10)")


def test_c02_stationary_fixed_point(verdict):
    p = ModelParams(N=50, R0=2)
    rel, absolute, dxs = [], [], []
    for n in (100, 200, 400):
        g = build_grid(n)
        ps = stationary_field(g, p, 1.0)
        tr = evolve(ps, p, "p_form", 1.0, 0.01, snapshot_every=100)
        change = np.abs(tr.snapshots[-1].values - ps.values).max()
        absolute.append(change)
        rel.append(change / np.abs(ps.values).max())
        dxs.append(g.dx)
    # P_s peaks near 1.3e4, so the change is measured relative to max P_s
    small = all(r < 5 * dx ** 2 for r, dx in zip(rel, dxs))
    ratios = [rel[0] / rel[1], rel[1] / rel[2]]
    fourfold = all(abs(r / 4 - 1) < 0.1 for r in ratios)
    detail = (f"relative change / dx^2 = {', '.join(f'{r / dx ** 2:.3f}' for r, dx in zip(rel, dxs))} (< 5); "
              f"halving ratios {ratios[0]:.3f}, {ratios[1]:.3f} (~4); "
              f"absolute change / dx^2 = {absolute[-1] / dxs[-1] ** 2:.4g}")
    assert verdict("2 stationary fixed point", small and fourfold, detail)


def test_c03_metastable_hump(verdict):
    p = ModelParams(N=200, R0=2)
    g = build_grid(1000)
    tr = evolve(gaussian(g, center=0.7), p, "p_form", 20.0, 0.01, snapshot_every=50)
    mid = [(t, g.centers[np.argmax(s.values)]) for t, s in zip(tr.times, tr.snapshots) if t >= 2.0]
    worst = max(abs(a - 0.5) for _, a in mid)
    assert verdict("3 meta-stable hump", worst < 0.05,
                   f"max |argmax - 0.5| = {worst:.4f} over t in [2, 20] (< 0.05)")


@pytest.mark.parametrize("R0,cells,t_end", [(0.0, 2000, 50.0), (0.5, 4000, 100.0), (1.0, 20000, 200.0)])
def test_c04_origin_blow_up(verdict, R0, cells, t_end):
    p = ModelParams(N=100, R0=R0)
    g = build_grid(cells)
    tr = evolve(gaussian(g), p, "p_form", t_end, 0.02, snapshot_every=1000)
    frac = _fraction_near_origin(tr)
    drift = np.ptp(tr.mass_ledger) / tr.mass_ledger[0]
    assert verdict(f"4 origin blow-up R0={R0:g}", frac > 0.9 and drift < 1e-10,
                   f"mass fraction in [0, 0.05] = {frac:.4f} at t={t_end:g} (> 0.9); "
                   f"mass drift {drift:.1e}")


@pytest.mark.parametrize("N", [100, 200])
@pytest.mark.parametrize("R0", [0.0, 0.5, 2.0])
def test_c05_decay_rate_sandwich(verdict, R0, N):
    p = ModelParams(N=N, R0=R0)
    g = build_grid(1000)
    z0 = to_z(gaussian(g), p)
    z0 = z0.copy(values=z0.values / math.sqrt(weighted_norm(z0, "omega_inverse", p)))
    tr = evolve(z0, p, "z_form", 20.0, 0.01, snapshot_every=100, scheme="bdf2")
    rep = fit_decay_rate(tr, "omega_inverse", p)
    assert verdict(f"5 decay rate R0={R0:g} N={N}", bool(rep.satisfies_bound),
                   f"fitted rate {rep.rate:.4g} >= 0.98 * {rep.bound:.4g} = {rep.bound_source}")


def test_c06_spectral_consistency(verdict):
    parts = {}
    p = ModelParams(N=100, R0=0)

    # (a) q = 0 with U(0) = 0, U'(s1) = 0: lambda_k = (pi/s1)^2 (k+1/2)^2
    errs = []
    for n in (2000, 4000):
        b = eigensolve(p, 5, n, potential=lambda s: 0.0)
        exact = (math.pi / b.map.s1) ** 2 * (np.arange(5) + 0.5) ** 2
        errs.append(np.abs(b.eigenvalues / exact - 1).max())
    order = math.log2(errs[0] / errs[1])
    parts["a"] = (abs(order - 2) < 0.1 and errs[1] < 1e-5, f"order {order:.3f}")

    # (b) asymptote ratio for k = 8..15 with the default eigenproblem
    b = eigensolve(p, 40, 4000)
    k = np.arange(8, 16)
    r = b.eigenvalues[k] / b.asymptote(k)
    rx = b.eigenvalues[k] / b.asymptote_x(k)
    parts["b"] = (np.abs(r - 1).max() < 0.02,
                  f"ratio {r.min():.4f}..{r.max():.4f}, x-form ratio {rx.min():.4f}..{rx.max():.4f}")

    # (c) closed form of q for R0 = 0
    s = np.linspace(0, b.map.s1, 2001)
    dq = np.abs(potential_q(s, p) - (s ** 2 / 16 - 0.25)).max()
    parts["c"] = (dq < 1e-10, f"max |q - (s^2/16 - 1/4)| {dq:.1e}")

    # (d) FV evolution of the first mode decays at 2 lambda_0
    pd = ModelParams(N=100, R0=0.5)
    bd = eigensolve(pd, 4, 8000)
    g = build_grid(2000)
    tr = evolve(mode_field(g, bd, 0), pd, "z_form", 5.0, 0.005, snapshot_every=100, scheme="bdf2")
    rate = fit_decay_rate(tr, "omega_inverse", pd).rate
    dev = rate / (2 * bd.eigenvalues[0]) - 1
    parts["d"] = (abs(dev) < 0.01, f"rate / 2 lambda_0 - 1 = {dev:.1e}")

    ok = all(v for v, _ in parts.values())
    detail = "; ".join(f"({key}) {'ok' if v else 'FAIL'} {d}" for key, (v, d) in parts.items())
    assert verdict("6 spectral consistency", ok, detail)


def test_c07_spectral_vs_finite_volume(verdict):
    p = ModelParams(N=100, R0=0)
    g = build_grid(2000)
    z0 = to_z(gaussian(g), p)
    t_end = 0.5 * p.N
    fv = evolve(z0, p, "z_form", t_end, 1e-3, snapshot_every=10 ** 6, scheme="bdf2").snapshots[-1].values
    b = eigensolve(p, 40, 32000)
    series = evaluate_series(b, project_initial(z0, b), g.centers, t_end)
    diff = np.linalg.norm(series - fv) / np.linalg.norm(fv)
    w = np.asarray(inv_omega(g.centers, p))
    wdiff = math.sqrt(np.sum(w * (series - fv) ** 2) / np.sum(w * fv ** 2))
    assert verdict("7 spectral vs finite volume", diff < 1e-3,
                   f"relative L2 difference {diff:.2e} (< 1e-3); omega^-1 weighted {wdiff:.2e}")


def test_c08_delta_attractor(verdict):
    p = ModelParams(N=10, R0=0)
    finals = {}
    detail = ""
    ok = True
    for n in (2000, 4000, 8000):
        g = build_grid(n, (-1.0, 1.0))
        tr = evolve(gaussian(g, mirror=True), p, "symmetrized", 20.0, 0.01, snapshot_every=50)
        rows = concentration_metrics(tr, 0.05)
        finals[n] = rows[-1].mass_fraction
        if n == 4000:
            drift = np.ptp(tr.mass_ledger)
            mom = np.array([r.first_abs_moment for r in rows])
            frac = np.array([r.mass_fraction for r in rows])
            dec = bool(np.all(np.diff(mom) < 0))
            inc = bool(np.all(np.diff(frac) > 0))
            ok = drift < 1e-8 and dec and inc and frac[-1] > 0.95
            detail = (f"mass drift {drift:.1e}; moment decreasing {dec}; fraction increasing {inc}; "
                      f"fraction at t=20 {frac[-1]:.4f}")
    grows = finals[2000] < finals[4000] < finals[8000]
    detail += "; under refinement " + ", ".join(f"{v:.4f}" for v in finals.values())
    assert verdict("8 delta attractor", ok and grows, detail)


def test_c09_conservation_conditions(verdict):
    cf = sis_general_coefficients(ModelParams(N=200, R0=2))
    rep = check_conservation_conditions(cf, build_grid(200), times=(0.0, 1.0))
    worst = max(rep.residuals.values())
    bad = GeneralCoefficients(cf.a0, cf.a1, lambda x, t=0.0: cf.a2(x, t) + 1e-3 * np.sin(3 * x),
                              cf.b1, cf.b2, cf.forcing, cf.boundary_data, 1.0,
                              cf.da0, cf.d2a0, cf.da1)
    flagged = not check_conservation_conditions(bad, build_grid(200)).passed["identity"]
    assert verdict("9 conservation conditions", worst < 1e-10 and flagged,
                   f"max residual {worst:.1e} (< 1e-10); perturbed a2 flagged {flagged}")


def test_c10_origin_vanishing(verdict):
    p = ModelParams(N=200, R0=2)
    g = build_grid(1000)
    tr = evolve(gaussian(g, vanish_power=2), sis_general_coefficients(p), "general", 20.0, 0.01,
                snapshot_every=100)
    rep = origin_scaling_audit(tr)
    assert verdict("10 origin vanishing", rep.verdict == "PASS",
                   f"min slope {rep.slopes.min():.3f} (> 1); max u(0)^2 {rep.origin_sq.max():.1e} (< 1e-6)")


def test_c11_weak_form_residual(verdict):
    p = ModelParams(N=50, R0=2)
    res = []
    for n, dt in ((100, 0.01), (200, 0.0025), (400, 0.000625), (800, 0.00015625)):
        tr = evolve(gaussian(build_grid(n), width=0.15), p, "p_form", 0.2, dt)
        res.append(weak_residual(tr, p, t_min=0.05))
    ratios = [a / b for a, b in zip(res, res[1:])]
    # dt ~ dx^2, so O(dx^2 + dt) is a factor 4 per level
    order_ok = all(abs(r / 4 - 1) < 0.1 for r in ratios)

    g = build_grid(400)
    ps = stationary_field(g, p)
    times = np.array([0.0, 0.5, 1.0, 1.5])
    stat = Trajectory(times, [ps.copy(time=t) for t in times], np.arange(4), times,
                      np.full(4, ps.values.sum() * g.dx))
    r_stat = weak_residual(stat, p)
    assert verdict("11 weak-form residual", order_ok and r_stat < 1e-6,
                   f"refinement ratios {', '.join(f'{r:.3f}' for r in ratios)} (~4); "
                   f"stationary residual {r_stat:.1e} (< 1e-6)")


def _reconstructed_density(chain):
    p = ModelParams(N=100, R0=0)
    b = eigensolve(p, 40, 4000, chain=chain)
    c = project_initial(to_z(gaussian(build_grid(2000)), p), b)
    # the fit window [2 dx, 20 dx] must sit well inside x << 1/(2N)
    g = build_grid(200_000)
    return Field(g, evaluate_series(b, c, g.centers, 10.0, quantity="p"))


def test_c12_local_exponent(verdict):
    e = local_exponent(_reconstructed_density("exact"))
    assert verdict("12 local exponent", abs(e + 0.5) <= 0.05, f"exponent {e:.4f} (target -0.5 +- 0.05)")


def test_local_exponent_by_eigenproblem():
    # the default eigenproblem gives a bounded density at the origin, the
    # reduced one (no Jacobian) the x^{-1/2} law
    assert abs(local_exponent(_reconstructed_density("exact"))) < 0.05
    assert abs(local_exponent(_reconstructed_density("reduced")) + 0.5) < 0.05

