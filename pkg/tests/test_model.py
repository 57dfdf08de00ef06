from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from deformed_kepler import DomainError, HypersphericalPoint, ModelParams, PhaseState, SingularOriginError
from deformed_kepler.model import (
    conformal_factor,
    eval_hamiltonian,
    from_hyperspherical,
    green_function,
    green_function_integrand,
    intrinsic_potentials,
    metric_factor,
    oscillator_constants,
    scalar_curvature,
    to_hyperspherical,
)


def state(q, p):
    return PhaseState(np.array(q, float), np.array(p, float))


@pytest.mark.parametrize("q,p,eta,k,expected", [
    ((1, 0, 0), (0, 0, 0), 0.0, 1.0, -1.0),
    ((1, 0, 0), (0, 0, 0), 1.0, 1.0, -0.5),
    ((1, 0, 0), (1, 0, 0), 1.0, 0.0, 0.25),
])
def test_hamiltonian_examples(q, p, eta, k, expected):
    assert eval_hamiltonian(state(q, p), ModelParams(eta=eta, k=k)) == pytest.approx(expected, abs=1e-15)


def test_hamiltonian_rejects_origin():
    with pytest.raises(SingularOriginError):
        eval_hamiltonian(state((0, 0, 0), (1, 0, 0)), ModelParams())


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(eta=-0.1)
    with pytest.raises(DomainError):
        ModelParams(hbar=0.0)
    with pytest.raises(DomainError):
        ModelParams(dim=1)
    assert ModelParams(eta=0.3).replace(dim=5) == ModelParams(eta=0.3, dim=5)


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.floats(-3, 3))
def test_kepler_limit_is_exact(q, p, k):
    s = state(q, p)
    if s.radius < 1e-3:
        return
    h = eval_hamiltonian(s, ModelParams(eta=0.0, k=k))
    expected = float(s.p @ s.p) / 2 - k / s.radius
    assert h == pytest.approx(expected, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("r,eta,expected", [(1.0, 0.0, 1.0), (1.0, 1.0, 2.0), (0.5, 0.2, 1.4)])
def test_metric_factor(r, eta, expected):
    assert metric_factor(r, ModelParams(eta=eta)) == pytest.approx(expected, rel=1e-15)
    assert conformal_factor(r, ModelParams(eta=eta)) == pytest.approx(math.sqrt(expected), rel=1e-15)


def test_metric_factor_origin():
    with pytest.raises(SingularOriginError):
        metric_factor(0.0, ModelParams(eta=1.0))


def _fd_curvature(r: float, eta: float, n: int, rel_step: float = 5e-3) -> float:
    # R = -e^{-2 phi} [2 (N-1) lap(phi) + (N-2)(N-1) |grad phi|^2], e^{2 phi} = 1 + eta/r
    def phi(x):
        return 0.5 * math.log(1 + eta / x)

    h = rel_step * r
    d1 = (phi(r - 2 * h) - 8 * phi(r - h) + 8 * phi(r + h) - phi(r + 2 * h)) / (12 * h)
    d2 = (-phi(r - 2 * h) + 16 * phi(r - h) - 30 * phi(r) + 16 * phi(r + h) - phi(r + 2 * h)) / (12 * h * h)
    lap = d2 + (n - 1) / r * d1
    return -math.exp(-2 * phi(r)) * (2 * (n - 1) * lap + (n - 2) * (n - 1) * d1 * d1)


def test_curvature_example_and_conformal_oracle():
    p = ModelParams(eta=1.0, dim=3)
    assert scalar_curvature(1.0, p) == pytest.approx(0.1875, rel=1e-14)
    for n in (2, 3, 4, 6):
        for eta in (0.1, 1.0, 3.0):
            for r in (0.2, 1.0, 5.0):
                exact = scalar_curvature(r, ModelParams(eta=eta, dim=n))
                assert exact == pytest.approx(_fd_curvature(r, eta, n), rel=1e-6)


def test_curvature_flat_and_three_dim_form():
    for r in (0.01, 1.0, 100.0):
        assert scalar_curvature(r, ModelParams(eta=0.0, dim=4)) == 0.0
    for eta in (0.1, 2.0):
        for r in (0.3, 4.0):
            three = 3 * eta ** 2 / (2 * r * (eta + r) ** 3)
            assert scalar_curvature(r, ModelParams(eta=eta, dim=3)) == pytest.approx(three, rel=1e-14)


def test_curvature_vanishes_linearly_as_eta_shrinks():
    r, n = 0.7, 5
    vals = [scalar_curvature(r, ModelParams(eta=e, dim=n)) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))
    # leading term eta (N-1)(N-3) / r^3
    assert vals[-1] / 1e-4 == pytest.approx((n - 1) * (n - 3) / r ** 3, rel=1e-3)


def test_green_function_examples():
    assert green_function(2.0, ModelParams(eta=0.0)) == -0.5
    assert green_function(1.0, ModelParams(eta=1.0)) == pytest.approx(-2 * math.sqrt(2), rel=1e-15)
    p = ModelParams(eta=1.0)
    h = 1e-5
    d = (green_function(1 + h, p) - green_function(1 - h, p)) / (2 * h)
    assert d == pytest.approx(1 / math.sqrt(2), rel=1e-9)


@pytest.mark.parametrize("eta", [0.0, 0.3, 1.0, 7.0])
def test_green_function_matches_quadrature(eta):
    p = ModelParams(eta=eta)
    for a, b in [(0.1, 1.0), (0.5, 10.0), (2.0, 3.0)]:
        val, _ = integrate.quad(green_function_integrand, a, b, args=(p,), epsabs=1e-14, epsrel=1e-13)
        assert green_function(b, p) - green_function(a, p) == pytest.approx(val, abs=1e-10)


@pytest.mark.parametrize("eta", [0.0, 0.5, 2.0])
def test_green_function_solves_radial_laplace(eta):
    # d/dr [r^2 f U'] = 0 on [0.1, 10]: the flux r^2 f U' is constant (and equals 1)
    p = ModelParams(eta=eta)

    def flux(r):
        h = 1e-3 * r
        u = [green_function(r + j * h, p) for j in (-2, -1, 1, 2)]
        du = (u[0] - 8 * u[1] + 8 * u[2] - u[3]) / (12 * h)
        return r * r * conformal_factor(r, p) * du

    values = np.array([flux(r) for r in np.geomspace(0.1, 10, 25)])
    np.testing.assert_allclose(values, 1.0, rtol=1e-9)


def test_intrinsic_potentials():
    p = ModelParams(eta=1.0, k=1.0)
    kc, osc = intrinsic_potentials(1.0, p, A=1, B=0, C=1, D=-1)
    assert osc == pytest.approx(-0.5, abs=1e-15)
    assert kc == pytest.approx(math.sqrt(2), rel=1e-15)
    p2 = ModelParams(eta=1.0, k=2.0)
    C, D = oscillator_constants(p2)
    for r in (0.1, 1.0, 10.0):
        _, osc = intrinsic_potentials(r, p2, C=C, D=D)
        assert osc + p2.k / (p2.eta + r) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        oscillator_constants(ModelParams(eta=0.0))


def test_hyperspherical_examples():
    h = to_hyperspherical([0.0, 1.0])
    assert h.r == pytest.approx(1.0) and h.theta[0] == pytest.approx(math.pi / 2)
    q = from_hyperspherical(HypersphericalPoint(1.0, [math.pi / 2, 0.0]))
    np.testing.assert_allclose(q, [0.0, 1.0, 0.0], atol=1e-16)


def test_hyperspherical_errors():
    with pytest.raises(SingularOriginError):
        to_hyperspherical([0.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        HypersphericalPoint(1.0, [4.0, 0.0])
    with pytest.raises(DomainError):
        HypersphericalPoint(1.0, [1.0, 2 * math.pi])
    with pytest.raises(DomainError):
        HypersphericalPoint(-1.0, [0.0])


@pytest.mark.parametrize("n", [2, 3, 5])
def test_hyperspherical_round_trip_sweep(n):
    rng = np.random.default_rng(n)
    worst = 0.0
    for _ in range(1000):
        d = rng.normal(size=n)
        q = d / np.linalg.norm(d) * 10 ** rng.uniform(-3, 3)
        back = from_hyperspherical(to_hyperspherical(q))
        worst = max(worst, np.linalg.norm(back - q) / np.linalg.norm(q))
    assert worst < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 6).flatmap(lambda n: st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n)))
def test_hyperspherical_round_trip_property(q):
    q = np.array(q)
    r = np.linalg.norm(q)
    if not 1e-3 <= r <= 2e3:
        return
    pt = to_hyperspherical(q)
    assert pt.r == pytest.approx(r, rel=1e-14)
    np.testing.assert_allclose(from_hyperspherical(pt), q, atol=1e-12 * r)
