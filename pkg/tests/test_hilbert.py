import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchsim import hilbert, oracles
from branchsim.errors import BasisError, CapacityExceeded, ShapeError
from branchsim.hilbert import BipartiteSpace

seeds = st.integers(0, 2**32 - 1)


def test_basis_product():
    out = hilbert.tensor_product([1, 0], [0, 1])
    assert np.array_equal(out, [0, 1, 0, 0])


def test_product_linear_in_first_slot():
    s = 1 / math.sqrt(2)
    assert np.allclose(hilbert.tensor_product([s, s], [1, 0]), [s, 0, s, 0], atol=0)


def test_product_index_convention(rng):
    a, b = hilbert.random_state(3, rng), hilbert.random_state(4, rng)
    ab = hilbert.tensor_product(a, b)
    assert np.max(np.abs(ab - oracles.brute_product(a, b))) < 1e-15
    assert abs(np.linalg.norm(ab) - 1) < 1e-12


def test_product_capacity():
    with pytest.raises(CapacityExceeded):
        hilbert.tensor_product(np.ones(64), np.ones(128))
    with pytest.raises(CapacityExceeded):
        hilbert.tensor_product(np.ones(4), np.ones(4), max_dim=8)


def test_capacity_setting_round_trip():
    previous = hilbert.set_max_joint_dim(16)
    try:
        with pytest.raises(CapacityExceeded):
            hilbert.check_capacity(17)
    finally:
        hilbert.set_max_joint_dim(previous)
    assert hilbert.max_joint_dim() == hilbert.DEFAULT_MAX_JOINT_DIM


def test_contract_product_returns_factor(rng):
    phi, psi = hilbert.random_state(3, rng), hilbert.random_state(5, rng)
    out = hilbert.contract_b(np.kron(phi, psi), BipartiteSpace(3, 5), psi)
    assert np.max(np.abs(out - phi)) < 1e-12


def test_contract_orthogonal_bath_gives_zero(rng):
    phi = hilbert.random_state(2, rng)
    out = hilbert.contract_b(np.kron(phi, [1, 0]), BipartiteSpace(2, 2), [0, 1])
    assert np.max(np.abs(out)) == 0


def test_contract_against_double_loop(rng):
    joint, psi = hilbert.random_state(16, rng), hilbert.random_state(4, rng)
    out = hilbert.contract_b(joint, BipartiteSpace(4, 4), psi)
    assert np.max(np.abs(out - oracles.brute_contract(joint, 4, 4, psi))) < 1e-14


def test_contract_shape_errors(rng):
    with pytest.raises(ShapeError):
        hilbert.contract_b(np.ones(8), BipartiteSpace(2, 4), np.ones(3))
    with pytest.raises(ShapeError):
        hilbert.contract_b(np.ones(7), BipartiteSpace(2, 4), np.ones(4) / 2)


@settings(max_examples=30, deadline=None)
@given(seeds, st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_contract_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    space = BipartiteSpace(3, 4)
    f1, f2 = hilbert.random_state(12, rng), hilbert.random_state(12, rng)
    psi = hilbert.random_state(4, rng)
    lhs = hilbert.contract_b(alpha * f1 + beta * f2, space, psi)
    rhs = alpha * hilbert.contract_b(f1, space, psi) + beta * hilbert.contract_b(f2, space, psi)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_product_then_contract_is_identity(seed, da, db):
    rng = np.random.default_rng(seed)
    phi, psi = hilbert.random_state(da, rng), hilbert.random_state(db, rng)
    back = hilbert.contract_b(hilbert.tensor_product(phi, psi), BipartiteSpace(da, db), psi)
    assert np.max(np.abs(back - phi)) < 1e-12


def test_overlap_basics(rng):
    a = hilbert.random_state(5, rng)
    assert hilbert.overlap(a, a) == pytest.approx(1.0, abs=1e-15)
    assert hilbert.overlap([1, 0, 0], [0, 1, 0]) == 0
    with pytest.raises(ShapeError):
        hilbert.overlap([1, 0], [1, 0, 0])


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_overlap_conjugate_symmetric_and_matches_kahan(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    b = rng.normal(size=8) + 1j * rng.normal(size=8)
    assert hilbert.overlap(a, b) == pytest.approx(np.conj(hilbert.overlap(b, a)), abs=1e-14)
    assert abs(hilbert.overlap(a, b) - oracles.kahan_overlap(a, b)) < 1e-12
    aa = hilbert.overlap(a, a)
    assert aa.imag == 0 and aa.real >= 0


def test_reduced_coherence_product_is_pure(rng):
    phi, psi = hilbert.random_state(3, rng), hilbert.random_state(4, rng)
    rho = hilbert.reduced_coherence(np.kron(phi, psi), BipartiteSpace(3, 4), list(np.eye(3)))
    assert np.max(np.abs(rho - np.outer(phi, phi.conj()))) < 1e-12
    assert hilbert.purity(rho) == pytest.approx(1.0, abs=1e-12)


def test_reduced_coherence_bell_state():
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    rho = hilbert.reduced_coherence(bell, BipartiteSpace(2, 2), list(np.eye(2)))
    assert np.allclose(rho, np.eye(2) / 2, atol=1e-15)
    assert hilbert.max_offdiagonal(rho) == 0


def test_reduced_coherence_against_brute_partial_trace(rng):
    joint = hilbert.random_state(16, rng)
    rho = hilbert.reduced_coherence(joint, BipartiteSpace(4, 4), list(np.eye(4)))
    assert np.max(np.abs(rho - oracles.brute_partial_trace(joint, 4, 4))) < 1e-14


def test_reduced_coherence_in_rotated_basis(rng):
    joint = hilbert.random_state(8, rng)
    s = 1 / math.sqrt(2)
    basis = [np.array([s, s]), np.array([s, -s])]
    rho = hilbert.reduced_coherence(joint, BipartiteSpace(2, 4), basis)
    u = np.column_stack(basis)
    assert np.allclose(rho, u.T @ oracles.brute_partial_trace(joint, 2, 4) @ u, atol=1e-14)


def test_reduced_coherence_rejects_bad_basis():
    with pytest.raises(BasisError):
        hilbert.reduced_coherence(np.ones(4) / 2, BipartiteSpace(2, 2), [np.array([1, 0]), np.array([1, 1e-6])])


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.1, 3.0))
def test_reduced_trace_equals_squared_norm(seed, scale):
    rng = np.random.default_rng(seed)
    joint = scale * hilbert.random_state(12, rng)
    rho = hilbert.reduced_coherence(joint, BipartiteSpace(3, 4), list(np.eye(3)))
    assert abs(np.trace(rho) - np.linalg.norm(joint) ** 2) < 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-14
    assert np.all(np.diag(rho).real >= 0)


def test_state_helpers():
    assert np.array_equal(hilbert.basis_state(3, 1), [0, 1, 0])
    assert np.linalg.norm(hilbert.as_state([3, 4], normalize=True)) == pytest.approx(1)
    with pytest.raises(ShapeError):
        hilbert.as_state([])
    with pytest.raises(ValueError):
        hilbert.as_state([0, 0], normalize=True)


def test_operator_helpers():
    import scipy.sparse as sp
    assert hilbert.is_hermitian(hilbert.SIGMA_Y)
    assert not hilbert.is_hermitian(np.array([[0, 1], [0, 0]]))
    assert hilbert.diagonal_or_none(sp.diags([1.0, 2.0])) is not None
    assert hilbert.diagonal_or_none(hilbert.SIGMA_X) is None
    z1 = hilbert.embed_qubit(hilbert.SIGMA_Z, 1, 3).toarray()
    assert np.allclose(np.diag(z1).real, [1, 1, -1, -1, 1, 1, -1, -1])
    with pytest.raises(ShapeError):
        hilbert.op_dim(np.ones((2, 3)))
