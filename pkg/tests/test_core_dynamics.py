import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maslov_wave.core_dynamics import (
    ParameterError,
    Params,
    asymptotic_matrix,
    cubic_eval,
    essential_spectrum_curves,
    essential_spectrum_margin,
    linearization,
    rest_eigenvalues,
    rest_spectrum,
    vector_field,
)
from maslov_wave.grassmann import J

a_values = st.floats(0.01, 0.49)


def test_params_reject_bad_threshold():
    for a in (0.0, 0.5, 0.7, -0.1):
        with pytest.raises(ParameterError):
            Params(a=a)
    with pytest.raises(ParameterError):
        Params(eps=-1e-3)
    with pytest.raises(ParameterError):
        Params(gamma=-1.0)


def test_params_default_speed_is_singular_speed():
    p = Params(a=0.25)
    assert p.c == pytest.approx(-math.sqrt(2) / 4)
    assert p.with_(c=-0.3).c == -0.3


def test_large_eps_warns():
    with pytest.warns(UserWarning):
        Params(eps=2e-3).require_small_eps()


def test_cubic_values():
    f, fp, fpp = cubic_eval(0.0, 0.25)
    assert (f, fp, fpp) == (0.0, -0.25, 2.5)
    assert cubic_eval(1.0, 0.25)[1] == pytest.approx(-0.75)
    assert cubic_eval(5 / 6, 0.25)[1] == pytest.approx(-0.25)


@given(u=st.floats(-2, 2), a=a_values)
def test_cubic_derivatives_match_finite_differences(u, a):
    h = 1e-5
    f, fp, fpp = cubic_eval(u, a)
    assert fp == pytest.approx((cubic_eval(u + h, a)[0] - cubic_eval(u - h, a)[0]) / (2 * h), abs=1e-7)
    assert fpp == pytest.approx((cubic_eval(u + h, a)[1] - cubic_eval(u - h, a)[1]) / (2 * h), abs=1e-6)


@given(s=st.floats(0, 1), a=a_values)
def test_cubic_slope_symmetric_about_inflection(s, a):
    m = (1 + a) / 3
    assert cubic_eval(m + s, a)[1] == pytest.approx(cubic_eval(m - s, a)[1], abs=1e-12)


def test_vector_field_rest_and_landing_point():
    p = Params(a=0.25, eps=0.0)
    assert np.all(vector_field(np.zeros(4), p) == 0)
    F = vector_field([1.0, 0.0, 0.0, -1.0 / p.c_star], p)
    assert np.allclose(F[[0, 2, 3]], 0, atol=1e-15)


def test_linearization_entries():
    p = Params(a=0.25, eps=1e-3)
    assert linearization(0.0, 0.0, p)[2, 0] == pytest.approx(0.25)
    # -f'(0.5) with f'(0.5) = -3/4 + 5/4 - 1/4
    assert linearization(0.5, 0.0, p)[2, 0] == pytest.approx(-0.25)
    assert np.allclose(linearization(0.0, 0.3, p), asymptotic_matrix(0.3, p))
    with pytest.raises(ZeroDivisionError):
        linearization(0.1, 0.5, p.with_(eps=0.0))


@settings(max_examples=40)
@given(U=st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4), a=a_values)
def test_linearization_is_jacobian_of_field(U, a):
    p = Params(a=a, eps=1e-3, gamma=1.3)
    U = np.array(U)
    A = linearization(U[0], 0.0, p)
    h = 1e-6
    FD = np.column_stack([(vector_field(U + h * e, p) - vector_field(U - h * e, p)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(A, FD, atol=1e-6)


@settings(max_examples=40)
@given(u=st.floats(-1, 1.5), lam=st.floats(-0.5, 2), a=a_values)
def test_shifted_matrix_is_hamiltonian(u, lam, a):
    p = Params(a=a, eps=1e-3)
    M = linearization(u, lam, p) + 0.5 * p.c * np.eye(4)
    assert np.allclose(M.T @ J + J @ M, 0, atol=1e-12 * max(1, abs(lam) / p.eps))


def test_layer_limit_eigenvalues():
    p = Params(a=0.25, eps=0.0)
    mu = rest_spectrum(0.0, p).mu
    assert np.allclose(mu, [-0.25 * math.sqrt(2), 0.0, math.sqrt(2) / 4, math.sqrt(2) / 2], atol=1e-12)
    mu_p = np.sort(np.linalg.eigvals(linearization(1.0, 0.0, p)).real)
    assert np.allclose(mu_p, [-math.sqrt(2) / 2, 0.0, math.sqrt(2) / 4, math.sqrt(2) * 0.75], atol=1e-12)


@settings(max_examples=40)
@given(lam=st.floats(0, 3), eps=st.floats(1e-5, 1e-3), a=a_values)
def test_rest_eigenvalues_match_numeric_and_pair(lam, eps, a):
    p = Params(a=a, eps=eps)
    if p.discriminant < 0:
        return
    mu = rest_eigenvalues(lam, p)
    num = np.sort(np.linalg.eigvals(asymptotic_matrix(lam, p)).real)
    assert np.allclose(mu, num, atol=1e-8 * max(1.0, np.max(np.abs(mu))))
    assert mu[0] + mu[3] == pytest.approx(-p.c, abs=1e-10)
    assert mu[1] + mu[2] == pytest.approx(-p.c, abs=1e-10)


def test_rest_ordering_at_small_eps():
    p = Params(a=0.25, eps=1e-4)
    assert rest_spectrum(0.0, p).ordering_holds(p.c)


def test_slow_eigenvalue_vanishes_linearly_in_eps():
    eps = np.array([1e-5, 1e-4, 1e-3])
    mu2 = np.array([abs(rest_eigenvalues(0.0, Params(eps=e)).tolist()[1]) for e in eps])
    slope = np.polyfit(np.log(eps), np.log(mu2), 1)[0]
    assert abs(slope - 1) < 0.2


def test_negative_discriminant_falls_back_to_numeric():
    p = Params(a=0.01, eps=0.5, gamma=0.0)
    assert p.discriminant < 0
    with pytest.raises(ParameterError):
        rest_eigenvalues(0.0, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert not rest_spectrum(0.0, p).closed_form


def test_essential_spectrum_stays_off_right_half_plane():
    p = Params(eps=1e-3)
    m = essential_spectrum_margin(np.linspace(0, 2, 41), p)
    assert m.bound is None and np.all(m.min_abs_real_mu > 0)
    lam_curve = essential_spectrum_curves(np.linspace(-5, 5, 201), p).ravel()
    assert np.max(lam_curve.real) < 0
    hit = essential_spectrum_margin([lam_curve[np.argmax(lam_curve.real)]], p, tol=1e-6)
    assert hit.bound is not None and hit.bound < 0
