import math

import numpy as np
import pytest
from scipy import integrate

from sispde.errors import ConfigError
from sispde.model import (ModelParams, big_F, coeffs, derivative, log_F, omega,
                          sis_general_coefficients, stationary)


def test_params_validation_names_fields():
    with pytest.raises(ConfigError) as exc:
        ModelParams(N=0.5, R0=-1)
    assert set(exc.value.fields) == {"N", "R0"}
    with pytest.raises(ConfigError):
        ModelParams(N=float("nan"), R0=1)


def test_params_frozen():
    p = ModelParams(N=10, R0=1)
    with pytest.raises(Exception):
        p.N = 3


def test_coeffs_examples():
    f, g = coeffs(0.5, ModelParams(N=1, R0=2))
    assert g == 0.0
    assert coeffs(0.0, ModelParams(N=7, R0=3)) == (0.0, 0.0)
    assert coeffs(1.0, ModelParams(N=1, R0=0)) == (1.0, -1.0)


def test_coeffs_domain():
    with pytest.raises(ValueError):
        coeffs(1.5, ModelParams(N=1, R0=1))
    with pytest.raises(ValueError):
        coeffs(-0.1, ModelParams(N=1, R0=1))


@pytest.mark.parametrize("R0", [0.0, 0.5, 2.0, 7.0])
def test_f_minus_g_and_positivity(R0):
    x = np.linspace(0, 1, 201)
    f, g = coeffs(x, ModelParams(N=3, R0=R0))
    assert np.allclose(f - g, 2 * x, atol=1e-15)
    assert f[0] == 0 and np.all(f[1:] > 0)


def test_big_F_examples():
    assert big_F(0.0, ModelParams(N=5, R0=2)) == 1.0
    assert big_F(0.01, ModelParams(N=100, R0=0)) == pytest.approx(math.exp(-2), rel=1e-14)
    # e^2/9 from the closed form
    assert big_F(1.0, ModelParams(N=1, R0=2)) == pytest.approx(0.821006233214516692, rel=1e-13)


@pytest.mark.parametrize("R0,N", [(0.0, 1.0), (2.0, 1.0), (0.5, 3.0), (1.0, 20.0)])
def test_big_F_against_quadrature(R0, N):
    p = ModelParams(N=N, R0=R0)
    rng = np.random.default_rng(1)
    xs = rng.uniform(0, 1, 1000)
    ratio = lambda s: 1.0 - 2.0 / (R0 * (1 - s) + 1)
    # cumulative quadrature over sorted points
    xs.sort()
    acc, last, err = 0.0, 0.0, 0.0
    for x in xs:
        acc += integrate.quad(ratio, last, x, epsabs=1e-14, epsrel=1e-13)[0]
        last = x
        err = max(err, abs(2 * N * acc - log_F(x, p)))
    assert err < 1e-10


def test_omega_examples():
    p = ModelParams(N=100, R0=0)
    assert omega(0.0, p) == 0.0
    assert omega(0.01, p) == pytest.approx(0.01 * math.exp(2), rel=1e-14)
    for R0 in (0.0, 1.0, 2.0):
        q = ModelParams(N=10, R0=R0)
        assert omega(1e-6, q) / 1e-6 == pytest.approx(R0 + 1, rel=1e-4)
        # series branch
        assert omega(1e-14, q) == pytest.approx((R0 + 1) * 1e-14, rel=1e-9)


def test_stationary_examples():
    p = ModelParams(N=50, R0=2)
    x = np.linspace(0.01, 1, 50)
    assert np.all(stationary(x, 0.0, p) == 0)
    # N=1 keeps F(1e-5) - 1 below 1e-5
    assert 1e-5 * stationary(1e-5, 1.0, ModelParams(N=1, R0=2)) == pytest.approx(1 / 3, rel=1e-4)
    with pytest.raises(ValueError):
        stationary(0.0, 1.0, p)


def test_stationary_flux_balance():
    p = ModelParams(N=50, R0=2)
    h = 1e-5
    x = np.linspace(0.02, 0.98, 50)

    def fp(y):
        return coeffs(y, p)[0] * stationary(y, 1.0, p)

    dfp = (fp(x + h) - fp(x - h)) / (2 * h)
    g = coeffs(x, p)[1]
    res = np.abs(dfp - 2 * p.N * g * stationary(x, 1.0, p))
    scale = np.abs(2 * p.N * g * stationary(x, 1.0, p)).max()
    assert res.max() < 1e-8 * max(1.0, scale)


def test_general_coefficients_values():
    cf = sis_general_coefficients(ModelParams(N=200, R0=2))
    assert cf.a0(0.0, 0.0) == pytest.approx(0.0075, abs=1e-16)
    for N in (1, 10, 200):
        c = sis_general_coefficients(ModelParams(N=N, R0=1.5))
        assert c.b1(1.0, 0.0) == pytest.approx(1 / (2 * N), rel=1e-15)
        assert c.a1(0.0, 0.0) == pytest.approx(2.5 / N, rel=1e-15)
    assert cf.domain_length == 1.0
    assert cf.forcing(0.3, 1.0) == 0.0 and cf.boundary_data(2.0) == 0.0


@pytest.mark.parametrize("R0,N", [(0.0, 1.0), (2.0, 200.0), (0.5, 7.0)])
def test_h7_identity_from_polynomials(R0, N):
    cf = sis_general_coefficients(ModelParams(N=N, R0=R0))
    x = np.linspace(0, 1, 100)
    # hand-differentiated polynomials, independent of the module's derivatives
    da0 = -R0 / (2 * N)
    da1 = -2 * R0 / N - (R0 - 1 - 2 * R0 * x)
    res = x * 0.0 - da1 + 2 * da0 + cf.a2(x, 0.0)
    assert np.abs(res).max() < 1e-10


def test_derivative_fd_matches_exact():
    p = ModelParams(N=20, R0=2)
    cf = sis_general_coefficients(p)
    x = np.linspace(0, 1, 11)
    fd = derivative(cf.a1, x, 0.0, 1.0)
    ex = derivative(cf.a1, x, 0.0, 1.0, exact=cf.da1)
    assert np.allclose(fd, ex, atol=1e-8)
