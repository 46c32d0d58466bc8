import math

import numpy as np
import pytest

from branchsim import hilbert, oracles
from branchsim.errors import BoundaryError, HermiticityError, IncompleteTrajectory, TopologyError
from branchsim.grid import Grid
from branchsim.hamiltonian import build_dephasing_model, build_grid_single
from branchsim.hilbert import SIGMA_X, SIGMA_Z
from branchsim.meanfield import run_meanfield
from branchsim.observables import (ClassicalState, action_value, classical_oracle,
                                   constrained_action, ehrenfest_trajectory, energy_from_states,
                                   energy_ledger, momentum, newton_residual, running_ledger,
                                   stationarity_check, translation_decomposition)
from branchsim.trajectory import TrajectoryRecord

from helpers import dephasing_preset, driven_preset, gaussian, qubit


def grid_run(grid, potential, x0, p0, sigma, T, dt, mass=1.0, **kw):
    spec = build_grid_single(grid, mass, potential)
    traj = run_meanfield(spec, gaussian(grid.x, x0, p0, sigma), [1.0], T, dt, **kw)
    return spec, traj


def test_plane_wave_momentum_follows_lattice_dispersion():
    grid = Grid(64, 0.25, boundary="periodic")
    for m in (1, 5, 20):
        k = 2 * np.pi * m / (64 * 0.25)
        phi = np.exp(1j * k * grid.x) / 8
        for hbar in (1.0, 0.5):
            assert momentum(phi, grid, hbar) == pytest.approx(hbar * np.sin(k * 0.25) / 0.25, abs=1e-12)


def test_spectral_momentum_of_plane_wave_is_exact():
    grid = Grid(64, 0.25, boundary="periodic", scheme="spectral")
    k = 2 * np.pi * 5 / 16
    assert momentum(np.exp(1j * k * grid.x) / 8, grid) == pytest.approx(k, abs=1e-12)


@pytest.mark.parametrize("boundary", ["dirichlet", "periodic"])
def test_real_packet_has_no_momentum(boundary):
    grid = Grid.centered(128, 20, boundary=boundary)
    assert abs(momentum(gaussian(grid.x, 1.0, 0.0, 0.8), grid)) < 1e-12


@pytest.mark.parametrize("boundary", ["dirichlet", "periodic"])
def test_momentum_against_difference_matrix(boundary, rng):
    n, dx = 12, 0.3
    grid = Grid(n, dx, boundary=boundary)
    d = np.zeros((n, n))
    for j in range(n - 1):
        d[j, j + 1], d[j + 1, j] = 1 / (2 * dx), -1 / (2 * dx)
    if boundary == "periodic":
        d[-1, 0], d[0, -1] = 1 / (2 * dx), -1 / (2 * dx)
    phi = hilbert.random_state(n, rng)
    ref = (-1j * 0.7 * phi.conj() @ d @ phi).real
    assert momentum(phi, grid, 0.7) == pytest.approx(ref, abs=1e-13)


def test_momentum_rejects_complex_residue(monkeypatch):
    grid = Grid(8, 1.0, boundary="periodic")
    # a derivative that is not anti-Hermitian leaves an imaginary part in <p>
    monkeypatch.setattr(Grid, "derivative", lambda self, f: f)
    with pytest.raises(HermiticityError):
        momentum(np.ones(8) / math.sqrt(8), grid)


def test_free_packet_momentum_is_conserved():
    grid = Grid.centered(128, 40, boundary="periodic")
    spec, traj = grid_run(grid, None, -3.0, 1.0, 1.0, 2.0, 0.01)
    assert np.ptp(traj.momentum) < 1e-9
    assert newton_residual(traj) < 1e-9


def test_linear_potential_gives_constant_force():
    f = 0.3
    grid = Grid.centered(256, 60, boundary="periodic", scheme="spectral")
    spec, traj = grid_run(grid, lambda x: f * x, 0.0, 0.5, 1.5, 2.0, 0.01)
    assert np.max(np.abs(traj.momentum - (0.5 - f * traj.times))) < 1e-8
    assert newton_residual(traj) < 1e-8


def test_newton_residual_converges_at_second_order():
    grid = Grid.centered(128, 16)
    res = [newton_residual(grid_run(grid, lambda x: 0.5 * x**2, 1.5, 0.0, 0.7, 1.0, dt)[1])
           for dt in (0.004, 0.002)]
    assert 3.5 <= res[0] / res[1] <= 4.5


def test_newton_needs_momentum_series():
    traj = TrajectoryRecord(times=np.arange(3.0), norm=np.ones(3))
    with pytest.raises(IncompleteTrajectory):
        newton_residual(traj)
    with pytest.raises(IncompleteTrajectory):
        energy_ledger(traj)


def test_isolated_static_energy_is_constant():
    spec = build_dephasing_model(1, [0.0], 0.4 * SIGMA_X + 0.2 * SIGMA_Z, bath_fields=[0.3])
    traj = run_meanfield(spec, qubit(0.3), qubit(1.0), 3.0, 0.01)
    residual, heat = energy_ledger(traj)
    assert residual < 1e-8 and heat == 0
    assert np.ptp(traj.energy) < 1e-8


def test_static_field_running_ledger_is_flat():
    spec, phi0, psi0 = dephasing_preset(bath_fields=None)
    traj = run_meanfield(spec, phi0, psi0, 5.0, 0.01)
    assert np.max(np.abs(running_ledger(traj))) < 1e-7


def test_driven_ledger_converges():
    spec, phi0, psi0 = driven_preset()
    res = [energy_ledger(run_meanfield(spec, phi0, psi0, 5.0, dt, record_states=False))[0]
           for dt in (0.004, 0.002)]
    assert res[0] < 1e-6 * 16
    assert 3.5 <= res[0] / res[1] <= 4.5


def test_energy_from_states_matches_equation_of_motion():
    spec, phi0, psi0 = dephasing_preset()
    traj = run_meanfield(spec, phi0, psi0, 2.0, 0.002)
    tm, e_fd = energy_from_states(traj)
    e_mid = 0.5 * (traj.energy[:-1] + traj.energy[1:])
    assert np.max(np.abs(e_fd - e_mid)) < 1e-5


def test_action_of_isolated_eigenstate_vanishes():
    h = 0.4 * SIGMA_X + 0.2 * SIGMA_Z
    spec = build_dephasing_model(1, [0.0], h)
    u = np.linalg.eigh(h)[1][:, 1]
    traj = run_meanfield(spec, u, [1, 0], 3.0, 0.01)
    assert abs(action_value(traj)) < 1e-10


def test_action_matches_accumulated_phase():
    spec, phi0, psi0 = dephasing_preset()
    res = []
    for dt in (0.004, 0.002):
        traj = run_meanfield(spec, phi0, psi0, 3.0, dt)
        delta = traj.accumulated[-1] - traj.accumulated[0]
        res.append(abs(action_value(traj) - delta))
        assert res[-1] < 1e-7 * 16 * max(1, abs(delta))
    assert 3.5 <= res[0] / res[1] <= 4.5


def test_stored_increments_agree_with_recomputed():
    spec, phi0, psi0 = dephasing_preset()
    traj = run_meanfield(spec, phi0, psi0, 1.0, 0.01)
    stripped = TrajectoryRecord(times=traj.times, norm=traj.norm,
                                action_increments=traj.action_increments)
    assert action_value(stripped) == pytest.approx(action_value(traj), abs=1e-12)


@pytest.fixture(scope="module")
def preset_run():
    spec, phi0, psi0 = dephasing_preset()
    return spec, run_meanfield(spec, phi0, psi0, 1.0, 0.01), run_meanfield(spec.scaled(1.1), phi0, psi0, 1.0, 0.01)


def test_zero_variation_is_zero(preset_run):
    spec, traj, _ = preset_run
    assert stationarity_check(traj, spec, 1e-3, np.zeros(2)) == 0.0


def test_variation_must_vanish_at_endpoints(preset_run):
    spec, traj, _ = preset_run
    with pytest.raises(BoundaryError):
        stationarity_check(traj, spec, 1e-3, np.ones((len(traj), 2)))


def test_first_variation_vanishes_on_solutions_only(preset_run):
    spec, traj, control = preset_run
    chi = np.array([0.3 + 0.8j, -1.1 + 0.2j])
    ratios = [stationarity_check(traj, spec, eps, chi) for eps in (1e-2, 1e-3)]
    assert 7 <= ratios[0] / ratios[1] <= 13
    bad = [stationarity_check(control, spec, eps, chi) for eps in (1e-2, 1e-3)]
    assert min(bad) >= 1e-3 and bad[0] / bad[1] < 2


def test_constrained_action_is_real_on_solution(preset_run):
    spec, traj, _ = preset_run
    assert abs(constrained_action(traj).imag) < 1e-4


def test_free_ehrenfest_is_a_straight_line():
    grid = Grid.centered(256, 60, boundary="periodic", scheme="spectral")
    spec, traj = grid_run(grid, None, -5.0, 1.2, 1.0, 3.0, 0.01, mass=2.0)
    for s, t in zip(ehrenfest_trajectory(traj), traj.times):
        assert abs(s.q[0] - (-5.0 + 1.2 * t / 2.0)) < 1e-8 * 5
        assert s.M == 2.0 and s.width > 0


def test_ehrenfest_width_grows_for_free_packet():
    grid = Grid.centered(256, 60, boundary="periodic", scheme="spectral")
    spec, traj = grid_run(grid, None, 0.0, 0.0, 0.5, 2.0, 0.01)
    widths = [s.width for s in ehrenfest_trajectory(traj)]
    assert widths[0] == pytest.approx(0.5, rel=1e-6)
    assert widths[-1] == pytest.approx(0.5 * math.sqrt(1 + (2.0 / (2 * 0.25)) ** 2), rel=1e-6)


def test_classical_free_line():
    out = classical_oracle(ClassicalState(1.0, 0.5, 2.0), lambda q: 0.0 * q, 4.0, 0.1)
    assert len(out) == 41
    assert out[-1].q[0] == pytest.approx(1.0 + 0.5 * 4.0 / 2.0, abs=1e-14)
    assert out[-1].p[0] == 0.5


def test_classical_harmonic_closed_orbit():
    m, w = 1.5, 2.0
    v = lambda q: 0.5 * m * w**2 * q**2
    period = 2 * math.pi / w
    out = classical_oracle(ClassicalState(1.0, 0.3, m), v, period, period / 20000,
                           force=lambda q: -m * w**2 * q)
    assert abs(out[-1].q[0] - 1.0) < 1e-6 and abs(out[-1].p[0] - 0.3) < 1e-6
    e = [s.energy(v) for s in out]
    assert np.ptp(e) / e[0] < 1e-6


def test_classical_quartic_self_convergence():
    v = lambda q: 0.25 * q**4
    start = ClassicalState(1.2, 0.0, 1.0)
    ref = classical_oracle(start, v, 3.0, 3.0 / 6400)[-1].q[0]
    errs = [abs(classical_oracle(start, v, 3.0, dt)[-1].q[0] - ref) for dt in (3.0 / 200, 3.0 / 400)]
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_classical_state_validation():
    with pytest.raises(ValueError):
        ClassicalState(0.0, 0.0, 0.0)


def test_translation_free_particle():
    grid = Grid.centered(128, 40, boundary="periodic")
    spec, traj = grid_run(grid, None, 0.0, 0.7, 1.0, 1.0, 0.01)
    boundary, bulk = translation_decomposition(traj, spec, grid.spacing)
    assert bulk == 0 and abs(boundary) < 1e-9


def test_translation_constant_force():
    # the link-density force of the fd scheme carries an O(dx^2) lattice factor
    f = 0.4
    grid = Grid.centered(256, 60, boundary="periodic", scheme="spectral")
    spec, traj = grid_run(grid, lambda x: f * x, 0.0, 0.0, 1.5, 1.0, 0.01)
    boundary, bulk = translation_decomposition(traj, spec, grid.spacing)
    assert boundary == pytest.approx(-f * 1.0, abs=1e-6)
    assert bulk == pytest.approx(f * 1.0, abs=1e-6)


def test_translation_harmonic_balance():
    grid = Grid.centered(128, 20, boundary="periodic")
    spec, traj = grid_run(grid, lambda x: 0.5 * x**2, 2.0, 0.0, 0.7, 2.0, 0.001)
    boundary, bulk = translation_decomposition(traj, spec, grid.spacing)
    assert abs(boundary) > 0.1
    assert abs(boundary + bulk) < 1e-5


def test_translation_needs_periodic_grid_and_unit_shift():
    grid = Grid.centered(32, 10)
    spec, traj = grid_run(grid, None, 0.0, 0.0, 1.0, 0.1, 0.01)
    with pytest.raises(TopologyError):
        translation_decomposition(traj, spec, grid.spacing)
    pgrid = Grid.centered(32, 10, boundary="periodic")
    spec, traj = grid_run(pgrid, None, 0.0, 0.0, 1.0, 0.1, 0.01)
    with pytest.raises(ValueError):
        translation_decomposition(traj, spec, 2 * pgrid.spacing)
