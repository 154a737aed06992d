import numpy as np
import pytest

from maslov_wave.pde import (
    GridError,
    PDEGrid,
    bump,
    evolve,
    grid_for,
    plateau_centre,
    profile_on,
    shifted_distance,
    translation_mode,
    zero_perturbation,
)


@pytest.fixture(scope="module")
def grid(pulse_5e4_refined):
    return grid_for(pulse_5e4_refined, dx=0.1, dt=0.1)


def test_grid_rejects_large_step(base_params):
    with pytest.raises(GridError):
        PDEGrid(0.0, 10.0, 101, 5.0, base_params)
    with pytest.raises(GridError):
        PDEGrid(0.0, 10.0, 2, 0.1, base_params)


def test_grid_resolves_front(grid):
    assert grid.nodes_across(2 * np.sqrt(2)) >= 20


def test_shifted_distance_recovers_shift(pulse_5e4_refined, grid):
    z = grid.z
    state = profile_on(pulse_5e4_refined, z + 0.7)
    d, k = shifted_distance(state, pulse_5e4_refined, z, 0.0)
    assert k == pytest.approx(0.7, abs=1e-4) and d < 1e-5


def test_bump_has_requested_amplitude(pulse_5e4_refined):
    z = np.linspace(-50, 50, 10001)
    pert = bump(0.0, 0.05)(z)
    assert np.max(np.abs(pert)) == pytest.approx(0.05, rel=1e-6)
    assert np.all(pert[:, 1] == 0)


def test_zero_perturbation_stays_at_floor(pulse_5e4_refined, grid):
    tr = evolve(grid, pulse_5e4_refined, zero_perturbation, 50.0, n_out=25)
    assert tr.d[-1] < 2e-4


def test_translation_is_absorbed_by_shift(pulse_5e4_refined, grid):
    zero = evolve(grid, pulse_5e4_refined, zero_perturbation, 50.0, n_out=25)
    tr = evolve(grid, pulse_5e4_refined, translation_mode(pulse_5e4_refined, 0.01), 50.0, n_out=25)
    assert tr.d[-1] < 2 * zero.d[-1] + 1e-5
    assert abs(tr.k[-1]) > 1e-3


def test_bump_decays(pulse_5e4_refined, grid):
    tr = evolve(grid, pulse_5e4_refined, bump(plateau_centre(pulse_5e4_refined), 0.05), 100.0, n_out=50)
    assert tr.d[0] == pytest.approx(0.05, rel=0.05)
    assert tr.ratio > 100
    assert np.all(np.isfinite(tr.d))


def test_amplitude_cap(pulse_5e4_refined, grid):
    with pytest.raises(ValueError):
        evolve(grid, pulse_5e4_refined, bump(0.0, 0.2), 1.0, amplitude_cap=0.1)


@pytest.mark.slow
def test_floor_converges_at_second_order(pulse_5e4_refined):
    floors = []
    for dx in (0.2, 0.1, 0.05):
        g = grid_for(pulse_5e4_refined, dx=dx, dt=0.1)
        floors.append(evolve(g, pulse_5e4_refined, zero_perturbation, 30.0, n_out=10).d[-1])
    orders = np.log2(np.array(floors[:-1]) / np.array(floors[1:]))
    assert np.all(orders > 1.5)
