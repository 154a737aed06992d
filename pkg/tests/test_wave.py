import numpy as np
import pytest

from maslov_wave.core_dynamics import Params, rest_eigenvalues
from maslov_wave.wave import (
    NoPulseFound,
    back_centre,
    boundary_projectors,
    front_roots,
    pulse_at,
    solve_front,
)


def test_pulse_speed_near_singular_limit(pulse_1e4, base_params):
    assert pulse_1e4.c == pytest.approx(-0.34706138, abs=1e-6)
    assert abs(pulse_1e4.c - base_params.c_star) < 0.01
    assert pulse_1e4.residual < 1e-9


def test_phase_and_shape(pulse_1e4):
    U0 = pulse_1e4(0.0)
    assert U0[0] == pytest.approx(0.5, abs=1e-10)
    assert U0[2] > 0
    # plateau near the right branch, then a back near the jump-off level
    zb = back_centre(pulse_1e4)
    assert 100 < zb < 1000
    assert pulse_1e4(0.5 * zb)[0] > 0.8
    assert np.max(np.abs(pulse_1e4.U[-1])) < 1e-3
    assert np.max(np.abs(pulse_1e4.U[0])) < 1e-3


def test_profile_satisfies_ode_between_nodes(pulse_1e4):
    p = pulse_1e4.params_c
    z = np.linspace(-10, 10, 41) + 0.0123
    h = 1e-5
    dU = (pulse_1e4(z + h) - pulse_1e4(z - h)) / (2 * h)
    U = pulse_1e4(z)
    u, v, w, y = U.T
    f = u * (1 - u) * (u - p.a)
    F = np.stack([w, p.eps * y, -p.c * w - f + v, -p.c * y + p.gamma * v - u], axis=1)
    assert np.max(np.abs(dU - F)) < 5e-3


def test_speed_ladder_approaches_singular_speed(pulse_ladder, base_params):
    cs = np.array([pr.c for pr in pulse_ladder])
    eps = np.array([pr.eps for pr in pulse_ladder])
    assert np.all(np.diff(cs) > 0)
    slope = np.polyfit(np.log(eps), np.log(np.abs(cs - base_params.c_star)), 1)[0]
    assert 0.7 < slope < 1.5


def test_no_pulse_beyond_fold(base_params):
    with pytest.raises(NoPulseFound):
        pulse_at(base_params.with_(eps=1e-3))


def test_boundary_planes_are_invariant_and_lagrangian(pulse_1e4):
    p = pulse_1e4.params_c
    b = boundary_projectors(p)
    mu = np.sort(rest_eigenvalues(0.0, p).real)
    assert np.allclose(np.sort(b.mu), mu)
    from maslov_wave.core_dynamics import linearization
    from maslov_wave.grassmann import symplectic_form

    A = linearization(0.0, 0.0, p)
    for plane in (b.unstable, b.stable):
        Q, _ = np.linalg.qr(plane)
        resid = A @ Q - Q @ (Q.T @ A @ Q)
        assert np.max(np.abs(resid)) < 1e-10
        assert abs(symplectic_form(Q[:, 0], Q[:, 1])) < 1e-12


@pytest.mark.slow
def test_front_for_large_gamma():
    p = Params(a=0.25, gamma=10.0, eps=1e-4)
    front = solve_front(p)
    u3 = front_roots(p)[-1]
    assert front.U[-1, 0] == pytest.approx(u3, abs=1e-6)
    assert front.U[-1, 1] == pytest.approx(u3 / p.gamma, abs=1e-6)
    assert abs(front.c - p.c_star) < 0.01
    assert front.residual < 1e-9
