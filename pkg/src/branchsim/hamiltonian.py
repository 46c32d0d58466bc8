"""Bipartite Hamiltonians split as h_A (x) 1 + sum_k g_k A_k (x) B_k + 1 (x) h_B."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .errors import NormError, OperatorError, ShapeError, SingularPotential
from .grid import Grid
from .hilbert import SIGMA_X, SIGMA_Z


@dataclass(frozen=True)
class InteractionTerm:
    a: object  # operator on A
    b: object  # operator on B
    g: float


@dataclass(frozen=True)
class Drive:
    """External time-dependent potential ``profile(t) * operator`` on subsystem A."""

    operator: np.ndarray
    profile: Callable[[float], float]
    rate: Callable[[float], float]

    def at(self, t: float) -> np.ndarray:
        return self.profile(t) * self.operator

    def derivative(self, t: float) -> np.ndarray:
        return self.rate(t) * self.operator


def linear_ramp(operator, slope: float, offset: float = 0.0) -> Drive:
    return Drive(np.asarray(operator, dtype=complex),
                 profile=lambda t: offset + slope * t,
                 rate=lambda t: slope)


@dataclass(frozen=True)
class HamiltonianSpec:
    h_a: object
    h_b: object
    terms: tuple[InteractionTerm, ...] = ()
    hbar: float = 1.0
    masses: tuple[float, ...] = ()
    grid_a: Grid | None = None
    grid_b: Grid | None = None
    potential_a: np.ndarray | None = None  # static diagonal potential already inside h_a
    drive: Drive | None = None

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        da, db = self.dim_a, self.dim_b
        for op, name in ((self.h_a, "h_a"), (self.h_b, "h_b")):
            if not hilbert.is_hermitian(op):
                raise OperatorError(f"{name} is not Hermitian")
        for k, term in enumerate(self.terms):
            if term.a.shape != (da, da) or term.b.shape != (db, db):
                raise ShapeError(f"interaction term {k} has mismatched shapes")
            if not (hilbert.is_hermitian(term.a) and hilbert.is_hermitian(term.b)):
                raise OperatorError(f"interaction term {k} is not Hermitian")
        if self.drive is not None and not hilbert.is_hermitian(self.drive.operator):
            raise OperatorError("drive operator is not Hermitian")
        # diagonal interaction factors are kept as rows of a matrix
        object.__setattr__(self, "_a_diag", _stack_diagonals([t.a for t in self.terms], da))
        object.__setattr__(self, "_b_diag", _stack_diagonals([t.b for t in self.terms], db))
        # small operators are handled densely; sparse bookkeeping costs more than it saves
        object.__setattr__(self, "_work_a", _working_copy(self.h_a))
        object.__setattr__(self, "_work_b", _working_copy(self.h_b))
        object.__setattr__(self, "_h_a_diag", _real_diagonal(self.h_a))
        object.__setattr__(self, "_h_b_diag", _real_diagonal(self.h_b))

    @property
    def dim_a(self) -> int:
        return hilbert.op_dim(self.h_a)

    @property
    def dim_b(self) -> int:
        return hilbert.op_dim(self.h_b)

    @property
    def space(self) -> hilbert.BipartiteSpace:
        return hilbert.BipartiteSpace(self.dim_a, self.dim_b)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([t.g for t in self.terms], dtype=float)

    @property
    def isolated(self) -> bool:
        return not any(t.g for t in self.terms)

    def scaled(self, s: float) -> "HamiltonianSpec":
        terms = tuple(InteractionTerm(t.a, t.b, s * t.g) for t in self.terms)
        return replace(self, terms=terms)

    def interaction_operator(self, sparse: bool = True):
        da, db = self.dim_a, self.dim_b
        out = sp.csr_matrix((da * db, da * db), dtype=complex)
        for t in self.terms:
            out = out + t.g * sp.kron(sp.csr_matrix(t.a), sp.csr_matrix(t.b), format="csr")
        return out if sparse else out.toarray()

    def joint_operator(self, t: float = 0.0, max_dim: int | None = None):
        """Assembled whole-system Hamiltonian as a sparse matrix."""
        da, db = self.dim_a, self.dim_b
        hilbert.check_capacity(da * db, max_dim)
        h_a = sp.csr_matrix(self.h_a)
        if self.drive is not None:
            h_a = h_a + sp.csr_matrix(self.drive.at(t))
        return (sp.kron(h_a, sp.identity(db, format="csr"), format="csr")
                + sp.kron(sp.identity(da, format="csr"), sp.csr_matrix(self.h_b), format="csr")
                + self.interaction_operator())

    def joint_matrix(self, t: float = 0.0, max_dim: int | None = None) -> np.ndarray:
        return self.joint_operator(t, max_dim).toarray()

    def bath_coefficients(self, psi: np.ndarray) -> np.ndarray:
        """<psi|B_k|psi> for every interaction term."""
        if self._b_diag is not None:
            return self._b_diag @ (np.abs(psi) ** 2)
        return np.array([hilbert.expect(t.b, psi).real for t in self.terms])

    def system_coefficients(self, phi: np.ndarray) -> np.ndarray:
        """<phi|A_k|phi> for every interaction term."""
        if self._a_diag is not None:
            return self._a_diag @ (np.abs(phi) ** 2)
        return np.array([hilbert.expect(t.a, phi).real for t in self.terms])

    def field_a(self, coeffs: Sequence[float]):
        """sum_k g_k c_k A_k, in the storage format of h_a."""
        return _weighted_sum(self._work_a, [t.a for t in self.terms], self._a_diag,
                             self.couplings * np.asarray(coeffs, dtype=float))

    def field_b(self, coeffs: Sequence[float]):
        """sum_k g_k c_k B_k, in the storage format of h_b."""
        return _weighted_sum(self._work_b, [t.b for t in self.terms], self._b_diag,
                             self.couplings * np.asarray(coeffs, dtype=float))

    def system_hamiltonian(self, bath_coeffs: Sequence[float], t: float = 0.0):
        """Partial-system Hamiltonian h_A + V_ext(t) + V[psi] given <B_k>."""
        h = self._work_a + self.field_a(bath_coeffs)
        if self.drive is not None:
            h = h + _like(self._work_a, self.drive.at(t))
        return h

    def bath_hamiltonian(self, system_coeffs: Sequence[float]):
        return self._work_b + self.field_b(system_coeffs)

    def system_hamiltonian_diagonal(self, bath_coeffs: Sequence[float], t: float = 0.0) -> np.ndarray | None:
        """Diagonal of the partial-system Hamiltonian when it is diagonal, else None."""
        if self._h_a_diag is None or self._a_diag is None or self.drive is not None:
            return None
        return self._h_a_diag + (self.couplings * np.asarray(bath_coeffs, float)) @ self._a_diag

    def bath_hamiltonian_diagonal(self, system_coeffs: Sequence[float]) -> np.ndarray | None:
        if self._h_b_diag is None or self._b_diag is None:
            return None
        return self._h_b_diag + (self.couplings * np.asarray(system_coeffs, float)) @ self._b_diag

    def potential_diagonal(self, bath_coeffs: Sequence[float], t: float = 0.0) -> np.ndarray:
        """Total potential on the A grid (static + mean field + drive) as a real array."""
        v = np.zeros(self.dim_a) if self.potential_a is None else np.asarray(self.potential_a, float).copy()
        extra = self.field_a(bath_coeffs)
        if self.drive is not None:
            extra = extra + _like(extra, self.drive.at(t))
        d = hilbert.diagonal_or_none(extra)
        if d is None:
            raise OperatorError("potential is not diagonal in the grid basis")
        return v + d.real


@dataclass(frozen=True)
class EffectivePotential:
    V: object
    t: float = 0.0


def _like(template, op):
    """Convert ``op`` to the storage format (dense or sparse) of ``template``."""
    if sp.issparse(template):
        return sp.csr_matrix(op)
    return hilbert.dense(op)


DENSE_WORK_MAX = 512


def _working_copy(op):
    if sp.issparse(op) and op.shape[0] <= DENSE_WORK_MAX:
        return op.toarray()
    return op


def _real_diagonal(op) -> np.ndarray | None:
    d = hilbert.diagonal_or_none(op)
    return None if d is None else d.real.copy()


def _stack_diagonals(ops, dim: int) -> np.ndarray | None:
    if not ops:
        return np.zeros((0, dim))
    diags = [hilbert.diagonal_or_none(op) for op in ops]
    if any(d is None for d in diags):
        return None
    return np.real(np.array(diags))


def _weighted_sum(template, ops, diag_rows, weights):
    if diag_rows is not None:
        d = weights @ diag_rows if len(weights) else np.zeros(template.shape[0])
        d = np.asarray(d, dtype=float)
        return sp.diags(d.astype(complex), format="csr") if sp.issparse(template) else np.diag(d.astype(complex))
    out = _like(template, np.zeros(template.shape, dtype=complex))
    for w, op in zip(weights, ops):
        out = out + w * _like(template, op)
    return out


def _check_unit(v: np.ndarray, name: str) -> None:
    dev = abs(np.linalg.norm(v) - 1.0)
    if dev > 1e-8:
        raise NormError(f"{name} is not normalized (deviation {dev:.2e})")


def mean_field_potential(spec: HamiltonianSpec, psi, t: float = 0.0) -> EffectivePotential:
    """Field acting on A after averaging the interaction over the bath state psi."""
    psi = hilbert.as_state(psi)
    if psi.size != spec.dim_b:
        raise ShapeError(f"psi has dim {psi.size}, bath has {spec.dim_b}")
    _check_unit(psi, "psi")
    return EffectivePotential(spec.field_a(spec.bath_coefficients(psi)), t)


def mean_field_potential_b(spec: HamiltonianSpec, phi, t: float = 0.0) -> EffectivePotential:
    phi = hilbert.as_state(phi)
    if phi.size != spec.dim_a:
        raise ShapeError(f"phi has dim {phi.size}, system has {spec.dim_a}")
    _check_unit(phi, "phi")
    return EffectivePotential(spec.field_b(spec.system_coefficients(phi)), t)


# builders -------------------------------------------------------------------

def softened_coulomb(x_a: np.ndarray, x_b: np.ndarray, q_product: float, softening: float) -> np.ndarray:
    if not softening > 0:
        raise SingularPotential("softening must be positive; bare Coulomb diverges on coincident points")
    return q_product / (np.abs(x_a[:, None] - x_b[None, :]) + softening)


def diagonal_product_terms(w: np.ndarray, rtol: float = 1e-14) -> tuple[InteractionTerm, ...]:
    """Decompose a two-body diagonal kernel w[i, j] into sum_k g_k diag(u_k) (x) diag(v_k)."""
    if not np.any(w):
        return ()
    u, s, vt = np.linalg.svd(w)
    keep = s > rtol * s[0]
    terms = []
    for k in np.flatnonzero(keep):
        terms.append(InteractionTerm(sp.diags(u[:, k].astype(complex), format="csr"),
                                     sp.diags(vt[k].astype(complex), format="csr"),
                                     float(s[k])))
    return tuple(terms)


def build_grid_pair(n_a: int, n_b: int, mass_a: float, mass_b: float, q_product: float,
                    softening: float | None = None, spacing: float = 1.0, hbar: float = 1.0,
                    boundary: str = "dirichlet", origin: float = 0.0,
                    potential_a: Callable | None = None,
                    potential_b: Callable | None = None) -> HamiltonianSpec:
    """Two particles on 1-D lattices with a softened Coulomb interaction.

    Both lattices share ``origin`` and ``spacing``; softening defaults to one
    grid spacing.
    """
    if n_a < 2 or n_b < 2:
        raise ShapeError("grids need at least two points")
    softening = spacing if softening is None else softening
    if not softening > 0:
        raise SingularPotential("softening must be positive")
    grid_a = Grid(n_a, spacing, origin, boundary)
    grid_b = Grid(n_b, spacing, origin, boundary)
    h_a = grid_a.kinetic(mass_a, hbar)
    h_b = grid_b.kinetic(mass_b, hbar)
    v_a = None
    if potential_a is not None:
        v_a = np.asarray(potential_a(grid_a.x), dtype=float)
        h_a = h_a + np.diag(v_a)
    if potential_b is not None:
        h_b = h_b + np.diag(np.asarray(potential_b(grid_b.x), dtype=float))
    terms = ()
    if q_product != 0:
        terms = diagonal_product_terms(softened_coulomb(grid_a.x, grid_b.x, q_product, softening))
    return HamiltonianSpec(h_a, h_b, terms, hbar, (mass_a, mass_b), grid_a, grid_b, v_a)


def build_grid_single(grid: Grid, mass: float, potential: Callable | None = None,
                      hbar: float = 1.0, drive: Drive | None = None) -> HamiltonianSpec:
    """One particle in a static external potential; the bath is a trivial 1-D factor."""
    h_a = grid.kinetic(mass, hbar)
    v = None
    if potential is not None:
        v = np.asarray(potential(grid.x), dtype=float)
        h_a = h_a + np.diag(v)
    return HamiltonianSpec(h_a, np.zeros((1, 1), dtype=complex), (), hbar, (mass,), grid,
                           None, v, drive)


def build_dephasing_model(n_bath: int, couplings: Sequence[float], system_hamiltonian=None,
                          hbar: float = 1.0, bath_fields: Sequence[float] | None = None,
                          drive: Drive | None = None, max_dim: int | None = None) -> HamiltonianSpec:
    """A qubit coupled to ``n_bath`` bath qubits through sigma_z (x) sum_k g_k sigma_z^(k).

    ``bath_fields`` adds transverse fields sum_k f_k sigma_x^(k) to the bath;
    without them the bath is static and the model is pure dephasing.
    """
    if n_bath < 1:
        raise ValueError("need at least one bath qubit")
    if len(couplings) != n_bath:
        raise ShapeError(f"{len(couplings)} couplings for {n_bath} bath qubits")
    hilbert.check_capacity(2 ** (n_bath + 1), max_dim)
    h_a = np.zeros((2, 2), dtype=complex) if system_hamiltonian is None else np.asarray(system_hamiltonian, dtype=complex)
    if h_a.shape != (2, 2):
        raise ShapeError("system Hamiltonian must be 2x2")
    dim_b = 2 ** n_bath
    h_b = sp.csr_matrix((dim_b, dim_b), dtype=complex)
    if bath_fields is not None:
        for k, f in enumerate(bath_fields):
            if f:
                h_b = h_b + f * hilbert.embed_qubit(SIGMA_X, k, n_bath)
    terms = tuple(InteractionTerm(SIGMA_Z.copy(), hilbert.embed_qubit(SIGMA_Z, k, n_bath), float(g))
                  for k, g in enumerate(couplings))
    return HamiltonianSpec(h_a, h_b, terms, hbar, drive=drive)


def build_pointer_model(levels: Sequence[float], n_bath: int, couplings: Sequence[float],
                        hbar: float = 1.0, max_dim: int | None = None) -> HamiltonianSpec:
    """An N-level system whose pointer states couple with strengths ``levels`` to a qubit bath.

    Interaction: diag(levels) (x) sum_k g_k sigma_z^(k).  Pointer states stay
    stationary, so each one is an exact mean-field branch with its own rate.
    """
    n = len(levels)
    hilbert.check_capacity(n * 2 ** n_bath, max_dim)
    dim_b = 2 ** n_bath
    a = np.diag(np.asarray(levels, dtype=complex))
    terms = tuple(InteractionTerm(a, hilbert.embed_qubit(SIGMA_Z, k, n_bath), float(g))
                  for k, g in enumerate(couplings))
    return HamiltonianSpec(np.zeros((n, n), dtype=complex), sp.csr_matrix((dim_b, dim_b), dtype=complex),
                           terms, hbar)


def bath_product_state(thetas: Sequence[float]) -> np.ndarray:
    """Product of single-qubit states cos(theta)|0> + sin(theta)|1>."""
    out = np.ones(1, dtype=complex)
    for th in thetas:
        out = np.kron(out, np.array([np.cos(th), np.sin(th)], dtype=complex))
    return out
