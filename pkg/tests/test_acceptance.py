"""Acceptance criteria, one PASS/FAIL line each.

Checks pinned to eps = 1e-3 cannot be met at a = 0.25, gamma = 1: the pulse family folds
near eps = 9.0e-4, so no pulse exists there. Those criteria fail and a SUPPLEMENT line
reports the same measurement at eps = 5e-4 (not counted as a pass).
"""

import math
import time

import numpy as np
import pytest

from maslov_wave.core_dynamics import Params
from maslov_wave.corners import a_grid, corner_sweep, shayman_classification
from maslov_wave.maslov import compute_maslov, eigenvalue_scan, symplectic_conservation
from maslov_wave.singular import (
    inflection_u,
    jump_off_u,
    jump_off_v,
    k_closed_form,
    k_quadrature,
    singular_speed,
)
from maslov_wave.wave import NoPulseFound, pulse_at, solve_pulse

A, GAMMA = 0.25, 1.0
EPS_TARGET = 1e-3
EPS_SUPPLEMENT = 5e-4


def _target_pulse():
    """Pulse at the pinned eps, or the reason it does not exist."""
    try:
        return pulse_at(Params(a=A, gamma=GAMMA, eps=EPS_TARGET)), None
    except NoPulseFound as err:
        return None, f"no pulse at eps={EPS_TARGET:g} ({err})"


@pytest.fixture(scope="module")
def target_pulse():
    return _target_pulse()


def test_c1_maslov_scorecard(acceptance):
    t0 = time.perf_counter()
    led = compute_maslov(solve_pulse(Params(a=A, gamma=GAMMA, eps=1e-4)))
    elapsed = time.perf_counter() - t0
    n_points = len(led.entries) + led.n_plus
    ok = led.signs == [-1, 1, -1] and led.n_plus == 1 and led.total == 0 and n_points == 4 and elapsed < 120
    acceptance(1, ok, f"signs={led.signs} n_+={led.n_plus} total={led.total} points={n_points} "
                      f"runtime={elapsed:.1f}s")
    assert ok


def test_c2_crossing_locations(acceptance, ledger_1e4):
    seg = {e.segment: e for e in ledger_1e4.entries}
    u_star = jump_off_u(A)
    u_tau = ledger_1e4.params["u_tau"]
    mirror = 2 * inflection_u(A) - u_tau  # f' is symmetric about the inflection point
    target = A + 0.5
    errs = {
        "front": abs(seg["front"].u - target),
        "back": abs((u_star - seg["back"].u) - target),
        "slow_right": abs(seg["slow_right"].u - mirror),
    }
    ok = all(v <= 0.02 for v in errs.values())
    acceptance(2, ok, f"front u={seg['front'].u:.4f}, back u*-u={u_star - seg['back'].u:.4f} (target {target}), "
                      f"slow_right u={seg['slow_right'].u:.4f} (mirror {mirror:.4f}); max err "
                      f"{max(errs.values()):.4f}")
    assert ok


def test_c3_crossing_values(acceptance, ledger_1e4):
    seg = {e.segment: e for e in ledger_1e4.entries}
    target = A**2 - 0.25
    gf, gb = seg["front"].gamma_value, seg["back"].gamma_value
    ok = abs(gf - target) <= 0.01 and abs(gb - target) <= 0.01
    acceptance(3, ok, f"Gamma front={gf:.4f}, back={gb:.4f}, target {target}")
    assert ok


def test_c4_speed_convergence(acceptance, pulse_ladder, target_pulse):
    c_star = singular_speed(A)
    assert c_star == pytest.approx(-0.353553, abs=1e-6)
    prof, reason = target_pulse
    eps = [pr.eps for pr in pulse_ladder]
    gaps = [abs(pr.c - c_star) for pr in pulse_ladder]
    sup_slope = float(np.polyfit(np.log(eps), np.log(gaps), 1)[0])
    acceptance(4, 0.7 <= sup_slope <= 1.3,
               f"slope over eps={eps} is {sup_slope:.3f} (c = {[round(pr.c, 8) for pr in pulse_ladder]})",
               supplement=True)
    if prof is None:
        acceptance(4, False, f"slope over {{1e-4, 2e-4, 5e-4, 1e-3}} unavailable: {reason}")
        pytest.fail(reason)
    eps.append(prof.eps)
    gaps.append(abs(prof.c - c_star))
    slope = float(np.polyfit(np.log(eps), np.log(gaps), 1)[0])
    ok = 0.7 <= slope <= 1.3
    acceptance(4, ok, f"log-log slope {slope:.3f}")
    assert ok


def test_c5_symplectic_invariants(acceptance, pulse_1e4):
    runs = [
        ("unstable", 0.0, None),
        ("unstable", 0.5, (pulse_1e4.z[0], 0.0)),
        ("unstable", 1.0, (pulse_1e4.z[0], 0.0)),
        ("stable", 0.0, None),
    ]
    drift, lag = 0.0, 0.0
    for bundle, lam, span in runs:
        rep = symplectic_conservation(pulse_1e4, lam, z_span=span, bundle=bundle)
        drift, lag = max(drift, rep.max_drift), max(lag, rep.max_lagrangian_residual)
    ok = drift <= 1e-6 and lag <= 1e-8
    acceptance(5, ok, f"max relative drift of e^(cz) omega {drift:.2e}, max Lagrangian residual {lag:.2e} "
                      f"over {len(runs)} bundle integrations")
    assert ok


def _h_formula(a):
    return 8 * a * (1 - a) * math.sqrt((1 - 2 * a) * (3 - 2 * a)) - 4 * a * (1 - 2 * a) * (3 - 2 * a)


@pytest.fixture(scope="module")
def sweep():
    return corner_sweep(a_grid(50), gamma=GAMMA)


def test_c6_corner_inequality(acceptance, sweep):
    land = sweep["landing"]
    vals = np.array([r["h_min"] for r in land])
    errs = np.array([abs(r["h_min"] - _h_formula(r["a"])) for r in land])
    h25 = next(r["h_min"] for r in corner_sweep([0.25])["landing"] if r["corner"] == "p")
    n_a = len({r["a"] for r in land})
    ok = n_a == 50 and np.all(vals > 0) and errs.max() <= 1e-10 and abs(h25 - 0.427051) <= 1e-6
    acceptance(6, ok, f"{n_a} values of a (corners p and q_hat), min 2sqrt(AC)-B={vals.min():.3e}, max closed-form error "
                      f"{errs.max():.1e}, value at a=0.25 {h25:.6f}")
    assert ok


def test_c7_jump_off_determinants(acceptance, sweep, ledger_1e4):
    jo = sweep["jump_off"]
    d = np.array([[r["det_in"], r["det_out"]] for r in jo])
    in_range = all(2 / 3 * (r["a"] - 0.5) < r["u_tau"] < 0 for r in jo)
    corner_hits = sum(e.segment == "corner" for e in ledger_1e4.entries)
    ok = bool(np.all(d > 0)) and in_range and corner_hits == 0 and len({r["a"] for r in jo}) == 50
    acceptance(7, ok, f"{len(jo)} (a, u_tau) cases, min determinant {d.min():.3e}, "
                      f"ledger crossings in corner neighborhoods: {corner_hits}")
    assert ok


def test_c8_shayman_dimensions(acceptance):
    expected = {"X12": 3, "X13": 2, "X24": 1, "X34": 0}
    bad = []
    for a in (0.01, 0.25, 0.49):
        p = Params(a=a, gamma=GAMMA)
        for u in (0.0, 1.0, jump_off_u(a)):
            rep = shayman_classification(u, p)
            dims = rep.unstable_dims()
            if dims != expected or not all(fp.hyperbolic for fp in rep.points):
                bad.append((a, u, dims))
    ok = not bad
    acceptance(8, ok, f"unstable dims {expected} at u in {{0, 1, u*}} for a in {{0.01, 0.25, 0.49}}; "
                      f"mismatches: {bad}")
    assert ok


def test_c9_eigenvalue_scan(acceptance, pulse_ladder, target_pulse):
    grid = np.linspace(0.01, 1.0, 50)
    sup = eigenvalue_scan(pulse_ladder[-1], grid)
    acceptance(9, sup.sign_changes == 0 and sup.zeros == 0 and sup.failed_at is None,
               f"eps={pulse_ladder[-1].eps:g}: {sup.values.size} points, {sup.sign_changes} sign changes, "
               f"detection in [{sup.values.min():.3e}, {sup.values.max():.3e}]", supplement=True)
    prof, reason = target_pulse
    if prof is None:
        acceptance(9, False, f"scan at eps={EPS_TARGET:g} unavailable: {reason}")
        pytest.fail(reason)
    res = eigenvalue_scan(prof, grid)
    ok = res.sign_changes == 0 and res.zeros == 0 and res.failed_at is None
    acceptance(9, ok, f"{res.values.size} points, {res.sign_changes} sign changes")
    assert ok


def test_c10_constants(acceptance):
    kq, kc = k_quadrature(A), k_closed_form(A)
    target = math.pi * math.sqrt(2)
    ok = (abs(kq - target) <= 1e-6 and abs(kc - target) <= 1e-6 and jump_off_u(A) == 5 / 6
          and abs(jump_off_v(A) - 35 / 432) <= 1e-12)
    acceptance(10, ok, f"K quadrature={kq:.12f}, closed={kc:.12f} (pi*sqrt2={target:.12f}), "
                       f"u*={jump_off_u(A)!r}, v*-35/432={jump_off_v(A) - 35 / 432:.1e}")
    assert ok


def _decay_checks(profile, T=400.0):
    from maslov_wave.pde import bump, evolve, grid_for, plateau_centre, translation_mode, zero_perturbation
    from maslov_wave.wave import remesh

    prof = remesh(profile, refine=1)
    grid = grid_for(prof, dx=0.1, dt=0.1)
    b = evolve(grid, prof, bump(plateau_centre(prof), 0.05), T)
    z = evolve(grid, prof, zero_perturbation, 100.0)
    t = evolve(grid, prof, translation_mode(prof, 0.01), 100.0)
    floor = z.d.max()
    ok = b.ratio >= 5 and t.d[-1] <= 2 * floor + 1e-5
    return ok, (f"bump d {b.d[0]:.3e} -> {b.d[-1]:.3e} (ratio {b.ratio:.0f}), zero-run max {floor:.2e}, "
                f"translation end {t.d[-1]:.2e}, dx={grid.dx:.3g}")


def test_c11_pde_decay(acceptance, pulse_ladder, target_pulse):
    ok_sup, msg = _decay_checks(pulse_ladder[-1])
    acceptance(11, ok_sup, f"eps={pulse_ladder[-1].eps:g}: {msg}", supplement=True)
    prof, reason = target_pulse
    if prof is None:
        acceptance(11, False, f"decay run at eps={EPS_TARGET:g} unavailable: {reason}")
        pytest.fail(reason)
    ok, msg = _decay_checks(prof)
    acceptance(11, ok, msg)
    assert ok
