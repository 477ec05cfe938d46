import math

import numpy as np
import pytest
from scipy import integrate

from sispde.errors import DivergentNormError
from sispde.functionals import (hardy_constant_A, hardy_product, hardy_sup, phi_weight,
                                poincare_constant, psi_weight, weighted_norm)
from sispde.grid import Field, build_grid
from sispde.model import ModelParams, big_F, omega
from sispde.quadrature import WeightTable

# mpmath (30 digits) values of the closed-form integrals, frozen
A_ORACLE = {(0.0, 1.0): 0.166747834399716396, (2.0, 1.0): 0.226859047267605034,
            (0.5, 2.0): 0.129460419139117883}
CP_ORACLE = {(0.0, 1.0): 0.659631678084769645, (2.0, 1.0): 0.539014132983999968,
             (0.5, 2.0): 0.495543199299586362}


def test_weight_table_exact_on_smooth():
    tab = WeightTable.build(np.cos, 0.0, 1.0, n_panels=8)
    assert tab.total == pytest.approx(math.sin(1.0), abs=1e-15)
    x = np.linspace(0, 1, 37)
    assert np.abs(tab(x) - np.sin(x)).max() < 1e-14
    assert tab.cumulative[0] == 0.0 and np.all(np.diff(tab.cumulative) >= 0)


@pytest.mark.parametrize("key", sorted(A_ORACLE))
def test_hardy_constant_oracle(key):
    R0, N = key
    assert hardy_constant_A(ModelParams(N=N, R0=R0)) == pytest.approx(A_ORACLE[key], rel=1e-9)


def test_hardy_product_vanishes_at_ends():
    p = ModelParams(N=1, R0=0)
    A = hardy_constant_A(p)
    assert hardy_product(1e-12, p) < 1e-9 * A
    assert hardy_product(1 - 1e-12, p) < 1e-9 * A
    est = hardy_sup(p)
    assert 0 < est.argmax < 1


def test_hardy_strategies_agree_on_sample_grid():
    worst = 0.0
    for R0 in (0.0, 0.5, 1.0, 2.0, 4.0):
        for N in (1.0, 5.0, 20.0, 100.0):
            est = hardy_sup(ModelParams(N=N, R0=R0))
            worst = max(worst, est.agreement)
    assert worst < 1e-6


def test_hardy_psi_variant_is_infinite():
    est = hardy_sup(ModelParams(N=10, R0=2), "psi")
    assert math.isinf(est.value) and est.note


@pytest.mark.parametrize("key", sorted(CP_ORACLE))
def test_poincare_oracle(key):
    R0, N = key
    assert poincare_constant(ModelParams(N=N, R0=R0)) == pytest.approx(CP_ORACLE[key], rel=1e-9)


def test_poincare_nested_route_and_tolerance_probe():
    p = ModelParams(N=1, R0=0)
    a = poincare_constant(p, method="nested", rtol=1e-8)
    b = poincare_constant(p, method="nested", rtol=5e-9)
    assert abs(a - b) < 1e-8
    assert a == pytest.approx(CP_ORACLE[(0.0, 1.0)], rel=1e-9)


def test_poincare_phi_variant_finite():
    v = poincare_constant(ModelParams(N=200, R0=2), "phi")
    assert math.isfinite(v) and v > 0


def test_psi_weight_examples():
    assert psi_weight(1e-12, ModelParams(N=50, R0=2)) == pytest.approx(1 / 3, rel=1e-12)
    p = ModelParams(N=1, R0=0)
    assert psi_weight(1.0, p) == pytest.approx(0.432332358381693654, rel=1e-12)
    x = np.linspace(1e-6, 1, 500)
    for R0, N in ((0, 100), (2, 200), (0.5, 3)):
        assert np.all(psi_weight(x, ModelParams(N=N, R0=R0)) > 0)


def test_phi_weight_examples():
    p = ModelParams(N=10, R0=2)
    assert phi_weight(0.0, p) == 0.0
    assert phi_weight(1e-4, ModelParams(N=1, R0=2)) / 1e-8 == pytest.approx(1 / 6, rel=1e-3)
    x = np.linspace(0, 1, 100)
    assert np.all(np.diff(phi_weight(x, p)) > 0)


def _G(x, p):
    return integrate.quad(lambda v: 1.0 / big_F(v, p), 0, x, epsabs=0, epsrel=1e-13)[0]


@pytest.mark.parametrize("R0,N", [(0.0, 1.0), (2.0, 5.0), (0.5, 3.0)])
def test_weights_match_direct_quadrature(R0, N):
    p = ModelParams(N=N, R0=R0)
    xs = np.sort(np.random.default_rng(7).uniform(0.01, 1, 20))
    for x in xs:
        psi = _G(x, p) / omega(x, p)
        assert psi_weight(x, p) == pytest.approx(psi, rel=1e-7)
        # inner double integral collapses to G(y)^2 / 2
        phi = integrate.quad(lambda y: _G(y, p) ** 2 / omega(y, p), 0, x, epsabs=0, epsrel=1e-11)[0]
        assert phi_weight(x, p) == pytest.approx(phi, rel=1e-7)


def test_weighted_norm_examples():
    g = build_grid(400)
    p = ModelParams(N=1, R0=0)
    zero = Field(g, np.zeros(g.n_cells))
    for w in ("omega_inverse", "F", "psi", "phiF", "unity"):
        assert weighted_norm(zero, w, p) == 0.0
    errs = []
    for n in (200, 400):
        gg = build_grid(n)
        errs.append(abs(weighted_norm(Field(gg, gg.centers), "unity", p) - 1 / 3))
    assert errs[1] < 1e-5 and errs[0] / errs[1] == pytest.approx(4, rel=0.01)
    z = Field(g, omega(g.centers, p), kind="z")
    assert weighted_norm(z, "omega_inverse", p) == pytest.approx(2.09726402473266256, rel=1e-5)


def test_weighted_norm_flags_divergence():
    g = build_grid(200)
    with pytest.raises(DivergentNormError):
        weighted_norm(Field(g, np.ones(g.n_cells), kind="z"), "omega_inverse",
                      ModelParams(N=1, R0=0))
    # sqrt(x) data gives a finite integral and is accepted
    v = weighted_norm(Field(g, np.sqrt(g.centers), kind="z"), "omega_inverse",
                      ModelParams(N=1, R0=0))
    assert math.isfinite(v)


def test_weighted_norm_gradient_weights():
    # z = x: int F z'^2 = int e^{-2x} = (1 - e^{-2})/2 for R0=0, N=1
    g = build_grid(1000)
    p = ModelParams(N=1, R0=0)
    v = weighted_norm(Field(g, g.centers.copy(), kind="z"), "F", p)
    assert v == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-6)
