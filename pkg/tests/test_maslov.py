import numpy as np
import pytest

from maslov_wave.maslov import (
    compute_maslov,
    eigenvalue_scan,
    evans_detection,
    find_tau,
    maslov_index,
    symplectic_conservation,
)


def test_ledger_counts(ledger_1e4):
    assert ledger_1e4.signs == [-1, 1, -1]
    assert [e.segment for e in ledger_1e4.entries] == ["front", "slow_right", "back"]
    assert all(e.dim == 1 for e in ledger_1e4.entries)
    assert ledger_1e4.n_plus == 1
    assert ledger_1e4.endpoint_gamma > 0
    assert ledger_1e4.total == 0 == maslov_index(ledger_1e4.entries, ledger_1e4.n_plus)


def test_crossings_sit_at_detection_sign_changes(ledger_1e4):
    z, _, beta = ledger_1e4.beta_trace.T
    for e in ledger_1e4.entries:
        lo, hi = np.searchsorted(z, e.z) - 1, np.searchsorted(z, e.z)
        lo = max(lo - 2, 0)
        hi = min(hi + 2, z.size - 1)
        assert np.sign(beta[lo]) != np.sign(beta[hi])
    # no other sign changes before tau
    s = np.sign(beta[np.abs(beta) > 1e-12])
    assert int(np.sum(s[1:] != s[:-1])) == len(ledger_1e4.entries)


def test_crossing_landmarks(ledger_1e4):
    u = [e.u for e in ledger_1e4.entries]
    assert 0.5 < u[0] < 1.0
    assert u[1] > 0.8
    assert abs(u[2]) < 0.3


def test_tau_independence(pulse_1e4, ledger_1e4):
    assert find_tau(pulse_1e4) == pytest.approx(ledger_1e4.tau, abs=1e-6)
    other = compute_maslov(pulse_1e4, u_tau=-0.01)
    assert other.tau != ledger_1e4.tau
    assert other.total == ledger_1e4.total
    assert other.signs == ledger_1e4.signs


def test_json_round_trip(ledger_1e4):
    import json

    d = json.loads(ledger_1e4.to_json())
    assert d["total"] == 0 and len(d["entries"]) == 3


@pytest.mark.parametrize("lam,span", [(0.0, None), (1.0, (-40.0, 0.0))])
def test_symplectic_conservation_unstable(pulse_1e4, lam, span):
    rep = symplectic_conservation(pulse_1e4, lam, z_span=span)
    assert rep.max_drift < 1e-9
    assert rep.max_lagrangian_residual < 1e-12


def test_symplectic_conservation_stable(pulse_1e4):
    rep = symplectic_conservation(pulse_1e4, 0.0, bundle="stable")
    assert rep.max_drift < 1e-6
    assert rep.max_lagrangian_residual < 1e-12


def test_scan_rejects_nonpositive_lambda(pulse_1e4):
    with pytest.raises(ValueError):
        eigenvalue_scan(pulse_1e4, [0.0, 0.1])


def test_detection_changes_sign_across_translation_eigenvalue(pulse_ladder):
    prof = pulse_ladder[-1]
    assert evans_detection(prof, 1e-3) * evans_detection(prof, -1e-3) < 0


@pytest.mark.slow
def test_small_scan_has_no_sign_change(pulse_ladder):
    res = eigenvalue_scan(pulse_ladder[-1], np.linspace(0.01, 1.0, 8))
    assert res.failed_at is None
    assert res.sign_changes == 0 and res.zeros == 0
