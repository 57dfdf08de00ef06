from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from deformed_kepler import DomainError, ModelParams, PhaseState, SingularOriginError
from deformed_kepler.dynamics import (
    EffectiveProblem,
    circular_radius,
    circular_state,
    effective_potential,
    effective_potential_derivative,
    equations_of_motion,
    integrate_orbit,
    orbit_closure,
    p_transform,
    pericentre_times,
    planar_state,
    potential_scan,
    q_transform,
    radial_period,
    radial_period_formula,
    radial_state,
    reduced_hamiltonian,
    turning_points,
)
from deformed_kepler.integrals import random_states
from deformed_kepler.model import conformal_factor, eval_hamiltonian


def test_equations_of_motion_kepler_limit():
    p = ModelParams(eta=0.0, k=1.3)
    for s in random_states(np.random.default_rng(0), 3, 20):
        dq, dp = equations_of_motion(s, p)
        np.testing.assert_allclose(dq, s.p, rtol=1e-14)
        np.testing.assert_allclose(dp, -p.k * s.q / s.radius ** 3, rtol=1e-12)


def _fd_gradient(s: PhaseState, p: ModelParams, h=1e-5):
    y = s.as_vector()
    g = np.empty_like(y)
    for a in range(y.size):
        vals = []
        for step in (-2, -1, 1, 2):
            z = y.copy()
            z[a] += step * h
            vals.append(eval_hamiltonian(PhaseState.from_vector(z), p))
        g[a] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    return g


def test_equations_of_motion_match_finite_differences():
    p = ModelParams(eta=0.6, k=1.4, dim=3)
    worst = 0.0
    for s in random_states(np.random.default_rng(1), 3, 100, r_min=0.3):
        dq, dp = equations_of_motion(s, p)
        g = _fd_gradient(s, p)
        exact = np.concatenate([-dp, dq])  # (dH/dq, dH/dp)
        worst = max(worst, np.linalg.norm(exact - g) / np.linalg.norm(g))
    assert worst < 1e-7


def test_circular_initial_data_is_stationary():
    for eta in (0.0, 0.2, 1.5):
        p = ModelParams(eta=eta, k=8.0)
        s = circular_state(EffectiveProblem(2.0, p))
        dq, dp = equations_of_motion(s, p)
        r_dot = float(s.q @ dq) / s.radius
        assert abs(r_dot) < 1e-14
        # and the radial force balances: d/dt (q . p) = 0
        assert abs(float(dq @ s.p + s.q @ dp)) < 1e-12


def test_kepler_circular_period():
    p = ModelParams(eta=0.0, k=2.0)
    s = circular_state(EffectiveProblem(1.5, p))
    r = s.radius
    T = 2 * math.pi * r ** 1.5 / math.sqrt(p.k)
    traj = integrate_orbit(s, T, p, tol=1e-12)
    assert np.linalg.norm(traj.states[-1] - s.as_vector()) < 1e-8


def test_generic_deformed_orbit_conserves_all_integrals():
    p = ModelParams(eta=0.2, k=8.0, dim=3)
    s = planar_state(0.3, 0.5, 2.0, 3)
    assert eval_hamiltonian(s, p) < 0
    traj = integrate_orbit(s, 50.0, p, tol=1e-12)
    assert set(traj.invariant_drift) == {"H", "C^(2)", "C_(2)", "C^(3)", "C_(3)", "R_1", "R_2", "R_3"}
    assert traj.max_drift < 1e-9
    assert np.all(np.diff(traj.times) > 0)


@pytest.mark.parametrize("tol", [1e-10, 1e-12])
def test_drift_scales_with_tolerance(tol):
    p = ModelParams(eta=0.5, k=1.0, dim=3)
    s = PhaseState(np.array([1.0, 0.2, -0.1]), np.array([0.1, 0.8, 0.3]))
    E = eval_hamiltonian(s, p)
    traj = integrate_orbit(s, 5 * radial_period_formula(E, p), p, tol=tol)
    assert traj.max_drift <= 100 * tol


def test_unbound_orbit_recedes_monotonically():
    p = ModelParams(eta=0.3, k=1.0)
    s = planar_state(1.0, -0.5, 1.0, 3)
    s = PhaseState(s.q, 2.0 * s.p)
    assert eval_hamiltonian(s, p) > 0
    traj = integrate_orbit(s, 40.0, p)
    r = np.linalg.norm(traj.states[:, :3], axis=1)
    i_min = int(np.argmin(r))
    assert 0 < i_min < r.size - 1
    assert np.all(np.diff(r[i_min + 1:]) > 0)


def test_radial_infall_halts_near_origin():
    p = ModelParams(eta=0.5, k=1.0)
    s = PhaseState(np.array([1.0, 0.0, 0.0]), np.zeros(3))
    traj = integrate_orbit(s, 50.0, p)
    assert traj.halted
    assert traj.halt_time is not None and 0 < traj.halt_time < 50.0


def test_integrate_validates_inputs():
    p = ModelParams()
    s = PhaseState(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    with pytest.raises(DomainError):
        integrate_orbit(s, 1.0, p, tol=1e-3)
    with pytest.raises(DomainError):
        integrate_orbit(s, -1.0, p)
    with pytest.raises(SingularOriginError):
        integrate_orbit(PhaseState(np.zeros(3), np.ones(3)), 1.0, p)


def test_effective_potential_examples():
    assert effective_potential(0.25, EffectiveProblem(2.0, ModelParams(eta=0.0, k=8.0))) == pytest.approx(-16.0)
    val = effective_potential(0.25, EffectiveProblem(2.0, ModelParams(eta=0.2, k=8.0)))
    assert val == pytest.approx(2 / (2 * 0.25 * 0.45) - 8 / 0.45, rel=1e-14)
    assert val == pytest.approx(-8.8889, abs=1e-4)
    prob = EffectiveProblem(0.0, ModelParams(eta=0.4, k=3.0))
    r = np.linspace(0.01, 50, 500)
    u = effective_potential(r, prob)
    np.testing.assert_allclose(u, -3.0 / (0.4 + r), rtol=1e-15)
    assert np.all(np.diff(u) > 0) and np.all(u < 0)
    with pytest.raises(SingularOriginError):
        effective_potential(0.0, prob)


def test_effective_potential_ordering_in_eta():
    # U_eff = (L^2/(2r) - k)/(eta + r): increasing in eta exactly where r > L^2/(2k)
    k, L2 = 8.0, 2.0
    r = np.linspace(0.05, 2.0, 400)
    table = potential_scan(r, [0.0, 0.05, 0.2, 0.4], k, L2)
    steps = np.diff(table, axis=1)
    above = r > L2 / (2 * k)
    assert np.all(steps[above] > 0)
    assert np.all(steps[~above] < 0)


def test_reduced_hamiltonian_matches_full():
    for eta in (0.0, 0.7):
        p = ModelParams(eta=eta, k=1.2, dim=4)
        for s in random_states(np.random.default_rng(2), 4, 50):
            assert reduced_hamiltonian(radial_state(s), p) == pytest.approx(eval_hamiltonian(s, p), rel=1e-12, abs=1e-12)


def test_q_transform_examples():
    p0 = ModelParams(eta=0.0)
    for r in (0.1, 1.0, 7.0):
        assert q_transform(r, p0) == pytest.approx(r, rel=1e-15)
        assert p_transform(r, 0.3, p0) == pytest.approx(0.3, rel=1e-15)
    p1 = ModelParams(eta=1.0)
    assert q_transform(1.0, p1) == pytest.approx(math.sqrt(2) + math.log(1 + math.sqrt(2)), rel=1e-15)
    assert q_transform(1.0, p1) == pytest.approx(2.295587, abs=1e-6)


@pytest.mark.parametrize("eta", [0.0, 0.3, 2.0])
def test_q_transform_derivative_is_conformal_factor(eta):
    p = ModelParams(eta=eta)
    for r in np.geomspace(0.05, 20, 30):
        h = 1e-3 * r
        q = [q_transform(r + j * h, p) for j in (-2, -1, 1, 2)]
        d = (q[0] - 8 * q[1] + 8 * q[2] - q[3]) / (12 * h)
        assert d == pytest.approx(conformal_factor(r, p), rel=1e-9)


def test_q_p_transform_is_canonical_along_curves():
    # integral of P dQ equals integral of p_r dr along a sampled momentum profile
    p = ModelParams(eta=0.8)

    def p_r(r):
        return math.sin(3 * r) + r ** 2

    a, b = 0.2, 3.0
    lhs, _ = sp_integrate.quad(lambda r: p_transform(r, p_r(r), p) * conformal_factor(r, p), a, b,
                               epsabs=1e-13, epsrel=1e-13)
    rhs, _ = sp_integrate.quad(p_r, a, b, epsabs=1e-13, epsrel=1e-13)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_turning_point_examples():
    prob = EffectiveProblem(2.0, ModelParams(eta=0.0, k=8.0))
    tp = turning_points(-8.0, prob)
    np.testing.assert_allclose(tp, [(1 - math.sqrt(0.5)) / 2, (1 + math.sqrt(0.5)) / 2], rtol=1e-14)
    assert tp == pytest.approx([0.146447, 0.853553], abs=1e-6)
    # tangency at the minimum
    pd = EffectiveProblem(2.0, ModelParams(eta=0.3, k=8.0))
    rc = circular_radius(pd)
    tp = turning_points(effective_potential(rc, pd), pd)
    assert len(tp) in (1, 2)
    np.testing.assert_allclose(tp, rc, rtol=1e-6)
    # below the minimum there is no motion
    assert turning_points(effective_potential(rc, pd) - 1.0, pd) == []
    # L^2 = 0: single outer turning point -k/E - eta
    pz = EffectiveProblem(0.0, ModelParams(eta=0.3, k=8.0))
    assert turning_points(-2.0, pz) == pytest.approx([8.0 / 2.0 - 0.3])


def test_circular_radius_examples():
    assert circular_radius(EffectiveProblem(2.0, ModelParams(eta=0.0, k=8.0))) == pytest.approx(0.25)
    rc = circular_radius(EffectiveProblem(2.0, ModelParams(eta=0.2, k=8.0)))
    assert rc == pytest.approx((2 + math.sqrt(10.4)) / 16, rel=1e-15)
    assert rc == pytest.approx(0.326556, abs=1e-6)
    with pytest.raises(DomainError):
        circular_radius(EffectiveProblem(2.0, ModelParams(k=-1.0)))
    with pytest.raises(DomainError):
        circular_radius(EffectiveProblem(0.0, ModelParams(k=1.0)))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 20), st.floats(0.05, 10), st.floats(0, 5))
def test_circular_radius_is_critical_point(k, L2, eta):
    prob = EffectiveProblem(L2, ModelParams(eta=eta, k=k))
    rc = circular_radius(prob)
    scale = k / (eta + rc) ** 2
    assert abs(effective_potential_derivative(rc, prob)) < 1e-10 * max(1.0, scale)


def test_radial_period_formula_matches_pericentre_spacing():
    for eta in (0.0, 0.2, 1.0):
        p = ModelParams(eta=eta, k=8.0, dim=2)
        s = planar_state(0.4, 2.0, 2.0, 2)
        E = eval_hamiltonian(s, p)
        T = radial_period_formula(E, p)
        traj = integrate_orbit(s, 4.5 * T, p)
        assert pericentre_times(traj).size == 4
        assert radial_period(traj) == pytest.approx(T, rel=1e-9)


def test_closure_kepler_ellipse():
    p = ModelParams(eta=0.0, k=1.0)
    s = planar_state(1.0, 0.4, 0.6, 3)
    traj = integrate_orbit(s, 3.2 * radial_period_formula(eval_hamiltonian(s, p), p), p)
    assert orbit_closure(traj) < 1e-6


def test_closure_deformed_orbit():
    p = ModelParams(eta=0.3, k=8.0, dim=3)
    s = PhaseState(np.array([0.4, 0.05, 0.1]), np.array([1.5, 3.0, -0.7]))
    s = PhaseState(s.q, s.p * math.sqrt(2.0 / float(np.sum(np.cross(s.q, s.p) ** 2))))
    E = eval_hamiltonian(s, p)
    assert E < 0
    traj = integrate_orbit(s, 5.3 * radial_period_formula(E, p), p)
    assert orbit_closure(traj) < 1e-5


def test_closure_circular_orbit():
    p = ModelParams(eta=0.4, k=8.0)
    prob = EffectiveProblem(2.0, p)
    s = circular_state(prob)
    rc = circular_radius(prob)
    T = 2 * math.pi * rc * (p.eta + rc) / math.sqrt(2.0)
    traj = integrate_orbit(s, 2.2 * T, p)
    assert radial_period(traj) == pytest.approx(T, rel=1e-12)
    assert orbit_closure(traj) < 1e-9


def test_closure_rejects_unbound_orbit():
    p = ModelParams(eta=0.3, k=1.0)
    s = PhaseState(np.array([1.0, 0, 0]), np.array([0.5, 2.0, 0]))
    traj = integrate_orbit(s, 5.0, p)
    with pytest.raises(DomainError):
        orbit_closure(traj)
