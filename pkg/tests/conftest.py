import numpy as np
import pytest

from maslov_wave.core_dynamics import Params


@pytest.fixture(scope="session")
def base_params():
    return Params(a=0.25, gamma=1.0, eps=1e-4)


@pytest.fixture(scope="session")
def pulse_1e4(base_params):
    from maslov_wave.wave import solve_pulse

    return solve_pulse(base_params)


@pytest.fixture(scope="session")
def ledger_1e4(pulse_1e4):
    from maslov_wave.maslov import compute_maslov

    return compute_maslov(pulse_1e4)


@pytest.fixture(scope="session")
def pulse_ladder(pulse_1e4, base_params):
    """Pulses at eps = 1e-4, 2e-4, 5e-4 obtained by continuation."""
    from maslov_wave.wave import continue_in_eps

    return [pulse_1e4] + continue_in_eps(base_params, [2e-4, 5e-4], seed=pulse_1e4)


@pytest.fixture(scope="session")
def pulse_5e4_refined(pulse_ladder):
    from maslov_wave.wave import remesh

    return remesh(pulse_ladder[-1], refine=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; lines are echoed live and again in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def report(number: int, ok: bool, message: str, supplement: bool = False):
        tag = "SUPPLEMENT" if supplement else ("PASS" if ok else "FAIL")
        line = f"[{tag}] criterion {number}: {message}"
        lines.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
