import math

import numpy as np
import pytest

from branchsim import oracles
from branchsim.errors import CapacityExceeded


def test_dense_propagate_identity_at_zero(rng):
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = h + h.conj().T
    phi = rng.normal(size=6) + 1j * rng.normal(size=6)
    assert np.allclose(oracles.dense_propagate(phi, h, 0.0), phi, atol=1e-12)


def test_dense_propagate_diagonal_phases():
    e = np.array([0.3, -1.2, 2.5])
    phi = np.array([1, 1j, -1]) / math.sqrt(3)
    out = oracles.dense_propagate(phi, np.diag(e), 1.7, hbar=0.5)
    assert np.allclose(out, np.exp(-1j * e * 1.7 / 0.5) * phi, atol=1e-13)


def test_dense_propagate_is_unitary(rng):
    a = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    h = a + a.conj().T
    phi = rng.normal(size=32) + 1j * rng.normal(size=32)
    phi /= np.linalg.norm(phi)
    assert abs(np.linalg.norm(oracles.dense_propagate(phi, h, 3.0)) - 1) < 1e-12


def test_dense_propagate_capacity():
    with pytest.raises(CapacityExceeded):
        oracles.dense_propagate(np.ones(8), np.eye(8), 1.0, max_dim=4)


def test_closed_form_at_zero_is_one():
    assert oracles.dephasing_closed_form([0.3, 1.1], [0.2, math.pi / 4], 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("g,t", [(0.7, 0.3), (1.3, 2.0), (0.5, 5.0)])
def test_closed_form_single_unpolarized_qubit(g, t):
    val = oracles.dephasing_closed_form([g], [math.pi / 4], t)
    assert abs(val - math.cos(2 * g * t)) < 1e-14


def test_closed_form_accepts_vectors_and_is_bounded(rng):
    bath = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(4)]
    val = oracles.dephasing_closed_form(rng.uniform(0.5, 1.5, 4), bath, 1.3)
    assert abs(val) <= 1 + 1e-14


@pytest.mark.parametrize("k", [1, 3, 6])
def test_closed_form_identical_couplings_against_dense_oracle(k):
    # the two branch bath factors evolve under +g and -g sum_k sz^(k)
    g, t = 0.8, 1.1
    plus = np.array([1, 1]) / math.sqrt(2)
    psi = np.ones(1)
    sz_sum = np.zeros((1, 1))
    for _ in range(k):
        psi = np.kron(psi, plus)
        sz_sum = np.kron(sz_sum, np.eye(2)) + np.kron(np.eye(sz_sum.shape[0]), np.diag([1.0, -1.0]))
    up = oracles.dense_propagate(psi, g * sz_sum, t)
    down = oracles.dense_propagate(psi, -g * sz_sum, t)
    val = oracles.dephasing_closed_form([g] * k, [math.pi / 4] * k, t)
    assert abs(val - math.cos(2 * g * t) ** k) < 1e-13
    assert abs(abs(np.vdot(up, down)) - abs(val)) < 1e-12


def test_windowed_argmax_flat_phases_goes_to_lowest_full_window():
    assert oracles.windowed_kernel_argmax(np.ones(10), np.zeros(10), 1.0, 5) == 2


def test_windowed_argmax_follows_weight_mass():
    w = np.zeros(12)
    w[7:10] = 1.0
    assert oracles.windowed_kernel_argmax(w, np.zeros(12), 1.0, 3) == 8


def test_windowed_argmax_parabola_vertex():
    nu = np.arange(21)
    assert oracles.windowed_kernel_argmax(np.ones(21), 0.2 * (nu - 11) ** 2, 1.0, 5) == 11


def test_windowed_argmax_rejects_even_window():
    with pytest.raises(ValueError):
        oracles.windowed_kernel_argmax(np.ones(10), np.zeros(10), 1.0, 4)


def test_dirichlet_modulus_matches_direct_sum():
    for n in (8, 64):
        for theta in (0.1, 0.5, 1.0):
            direct = oracles.direct_kernel(np.full(n, 1 / n), theta * np.arange(n))
            assert abs(abs(direct) - oracles.dirichlet_modulus(n, theta)) < 1e-13


def test_kahan_overlap_matches_textbook_sum(rng):
    a = rng.normal(size=50) + 1j * rng.normal(size=50)
    b = rng.normal(size=50) + 1j * rng.normal(size=50)
    assert abs(oracles.kahan_overlap(a, b) - np.sum(np.conj(a) * b)) < 1e-12


def test_brute_partial_trace_of_bell_state():
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(oracles.brute_partial_trace(bell, 2, 2), np.eye(2) / 2)


def test_brute_joint_matrix_against_kron(rng):
    ha, hb = np.diag([1.0, 2.0]), np.array([[0, 1], [1, 0.5]])
    a, b = np.diag([1.0, -1.0]), np.array([[0, -1j], [1j, 0]])
    ref = np.kron(ha, np.eye(2)) + np.kron(np.eye(2), hb) + 0.3 * np.kron(a, b)
    assert np.allclose(oracles.brute_joint_matrix(ha, hb, [(a, b, 0.3)]), ref)


def test_random_profile_does_not_alias(rng):
    for _ in range(20):
        prof = oracles.random_smooth_profile(64, rng)
        assert np.max(np.abs(np.diff(prof))) < math.pi


def test_harmonic_closed_orbit():
    q, p = oracles.leapfrog_harmonic_exact(1.0, 0.5, 2.0, 1.5, 2 * math.pi / 1.5)
    assert q == pytest.approx(1.0) and p == pytest.approx(0.5)


def test_report_rejects_negative_error():
    with pytest.raises(ValueError):
        oracles.OracleReport("x", -1.0, 1, 0, 1.0)


def test_battery_passes_and_filters():
    reports = oracles.run_battery()
    assert {r.name for r in reports} == set(oracles.BATTERY)
    assert all(r.passed for r in reports), [r for r in reports if not r.passed]
    assert [r.name for r in oracles.run_battery("kernel")] == ["interference_kernel"]
    with pytest.raises(KeyError):
        oracles.run_battery("no-such-check")
