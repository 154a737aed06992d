import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maslov_wave.core_dynamics import Params, cubic_eval
from maslov_wave.singular import (
    BranchError,
    CriticalBranch,
    assemble_singular_orbit,
    back_profile,
    front_profile,
    front_u_inverse,
    front_y,
    jump_off_u,
    jump_off_v,
    k_closed_form,
    k_quadrature,
    layer_eigenpairs,
    layer_shoot,
    melnikov_front_closed,
    melnikov_integrals,
    singular_speed,
    slow_flow_rhs,
)

SQ2 = math.sqrt(2)


def test_singular_speed_values():
    assert singular_speed(0.25) == pytest.approx(-SQ2 / 4)
    assert singular_speed(0.1) == pytest.approx(-0.565685, abs=1e-6)
    assert -2e-6 < singular_speed(0.5 - 1e-6) < 0


def test_front_profile_landmarks():
    u, w = front_profile(0.0)
    assert u == 0.5 and w == pytest.approx(SQ2 / 8)
    assert front_profile(SQ2 * math.log(3))[0] == pytest.approx(0.75)
    assert front_profile(60.0)[0] == pytest.approx(1.0) and front_profile(-60.0)[0] == pytest.approx(0.0)


@given(z=st.floats(-30, 30))
def test_front_phase_relation_and_inverse(z):
    u, w = front_profile(z)
    assert w == pytest.approx(SQ2 / 2 * u * (1 - u), abs=1e-15)
    if 1e-12 < u < 1 - 1e-12:
        assert front_u_inverse(u) == pytest.approx(z, abs=1e-6)


def test_front_matches_integrated_layer_problem():
    sol = layer_shoot(0.25, 0.0, z0=-12.0, z_end=12.0)
    zz = np.linspace(-12, 12, 97)
    u, w, _ = sol.sol(zz)
    assert np.max(np.abs(w - SQ2 / 2 * u * (1 - u))) < 1e-8


def test_k_constant_quadrature_and_closed_form():
    assert k_closed_form(0.25) == pytest.approx(math.pi * SQ2, abs=1e-12)
    assert k_quadrature(0.25) == pytest.approx(math.pi * SQ2, abs=1e-6)
    for a in (0.1, 0.2, 0.3, 0.4):
        assert k_quadrature(a) == pytest.approx(k_closed_form(a), rel=1e-8)


def test_front_y_limits_and_ode_residual():
    a, c = 0.25, singular_speed(0.25)
    assert front_y(80.0, a) == pytest.approx(-1 / c, rel=1e-8)
    z = -30.0
    assert math.exp(c * z) * front_y(z, a) == pytest.approx(k_closed_form(a), rel=1e-4)
    zz = np.linspace(-10, 20, 61)
    h = 1e-4
    dy = (front_y(zz + h, a, closed=True) - front_y(zz - h, a, closed=True)) / (2 * h)
    assert np.max(np.abs(dy + c * front_y(zz, a, closed=True) + front_profile(zz)[0])) < 1e-7


@settings(max_examples=25, deadline=None)
@given(z=st.floats(-15, 40), a=st.floats(0.05, 0.45))
def test_front_y_closed_form_matches_quadrature(z, a):
    assert front_y(z, a, closed=True) == pytest.approx(front_y(z, a), rel=1e-9, abs=1e-10)


def test_layer_shoot_cylinder_divergence():
    up = layer_shoot(0.25, +1e-3, z_end=40.0)
    down = layer_shoot(0.25, -1e-3, z_end=40.0)
    assert up.y[2, -1] > 10 and down.y[2, -1] < -10


def test_back_profile_landmarks():
    a = 0.25
    us = jump_off_u(a)
    u, w, y = back_profile(0.0, a)
    assert u == pytest.approx(us - 0.5) and w == pytest.approx(-SQ2 / 8)
    zz = np.linspace(-20, 20, 4001)
    ub = back_profile(zz, a)[0]
    hits = np.where(np.diff(np.sign(us - ub - (a + 0.5))))[0]
    assert hits.size == 1
    c = singular_speed(a)
    z = -25.0
    h = 1e-4
    dy = (back_profile(z + h, a)[2] - back_profile(z - h, a)[2]) / (2 * h)
    assert math.exp(c * z) * dy == pytest.approx(c * k_closed_form(a), rel=1e-3)


def test_jump_off_constants():
    assert jump_off_u(0.25) == 5 / 6
    assert jump_off_v(0.25) == pytest.approx(35 / 432, abs=1e-12)


def test_branches_and_slow_flow():
    p = Params(a=0.25, gamma=1.0)
    right, left = CriticalBranch("right", 0.25), CriticalBranch("left", 0.25)
    assert slow_flow_rhs(0.0, right, p) == pytest.approx(-1 / p.c)
    assert slow_flow_rhs(0.0, left, p) == pytest.approx(0.0, abs=1e-12)
    assert slow_flow_rhs(jump_off_v(0.25), left, p) < 0
    for v in np.linspace(left.v_limit + 1e-6, right.v_limit - 1e-6, 14):
        for br in (left, right):
            u = br.inverse(v)
            assert cubic_eval(u, 0.25)[0] == pytest.approx(v, abs=1e-10)
            assert cubic_eval(u, 0.25)[1] < 0
    with pytest.raises(BranchError):
        right.inverse(0.2)


@pytest.mark.parametrize("u", [0.0, 1.0, 5 / 6, -1 / 6, -0.05, 0.9])
def test_layer_eigenpairs_residuals(u):
    p = Params(a=0.25, eps=0.0)
    eig = layer_eigenpairs(u, p)
    assert np.all(eig.residuals(p) < 1e-10)


def test_layer_eigenvalue_landmarks():
    p = Params(a=0.25, eps=0.0)
    assert layer_eigenpairs(0.0, p).mu[0] == pytest.approx(-0.25 * SQ2)
    assert layer_eigenpairs(0.0, p).mu[3] == pytest.approx(SQ2 / 2)
    assert layer_eigenpairs(1.0, p).mu[3] == pytest.approx(SQ2 * 0.75)
    with pytest.raises(BranchError):
        layer_eigenpairs(0.5, p)


def test_singular_orbit_assembly():
    p = Params(a=0.25, gamma=1.0)
    orb = assemble_singular_orbit(p)
    assert orb.u_star == 5 / 6
    assert orb.q[3] == pytest.approx(2.12787, abs=1e-4)
    assert np.allclose(orb.front[-1, 1:], orb.slow_right[0, 1:], atol=1e-8)
    assert np.allclose(orb.front[0, 1:4], 0, atol=1e-8) and 0 < orb.front[0, 4] < 1e-3
    assert np.allclose(orb.p, [1, 0, 0, -1 / p.c_star])
    assert np.allclose(orb.slow_right[-1, 1:], orb.q, atol=1e-8)
    assert np.allclose(orb.back[-1, 1:], orb.q_hat, atol=1e-6)


def test_melnikov_signs_and_refinement():
    m = melnikov_integrals(0.25)
    assert m.front > 0 and m.back < 0
    assert m.front == pytest.approx(melnikov_front_closed(0.25), rel=1e-8)
    assert m.back == pytest.approx(singular_speed(0.25) * k_closed_form(0.25), rel=1e-8)
    m2 = melnikov_integrals(0.25, h=0.05)
    assert m2.front == pytest.approx(m.front, rel=1e-8) and m2.back == pytest.approx(m.back, rel=1e-8)
