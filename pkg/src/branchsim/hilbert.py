"""Finite-dimensional Hilbert-space core.

States are 1-D ``complex128`` numpy arrays.  Operators are either dense 2-D
arrays or ``scipy.sparse`` matrices; helpers here accept both.  Joint states of
a bipartite space use row-major indexing with subsystem A slowest, i.e. the
joint index of ``(a, b)`` is ``a * dim_b + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BasisError, CapacityExceeded, ShapeError

DEFAULT_MAX_JOINT_DIM = 4096
_max_joint_dim = DEFAULT_MAX_JOINT_DIM

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def max_joint_dim() -> int:
    return _max_joint_dim


def set_max_joint_dim(value: int) -> int:
    """Set the capacity limit for joint spaces; returns the previous value."""
    global _max_joint_dim
    if value < 1:
        raise ValueError("capacity must be positive")
    previous, _max_joint_dim = _max_joint_dim, int(value)
    return previous


def check_capacity(dim: int, max_dim: int | None = None) -> None:
    limit = _max_joint_dim if max_dim is None else max_dim
    if dim > limit:
        raise CapacityExceeded(f"joint dimension {dim} exceeds capacity {limit}")


def as_state(amplitudes, normalize: bool = False) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.size == 0:
        raise ShapeError("empty state vector")
    if normalize:
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        v = v / n
    return v


def basis_state(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


@dataclass(frozen=True)
class BipartiteSpace:
    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ShapeError("subsystem dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b

    def matrix(self, joint: np.ndarray) -> np.ndarray:
        """View a joint state as a ``dim_a x dim_b`` coefficient matrix."""
        joint = as_state(joint)
        if joint.size != self.dim:
            raise ShapeError(f"joint state has dim {joint.size}, space needs {self.dim}")
        return joint.reshape(self.dim_a, self.dim_b)


def tensor_product(a, b, max_dim: int | None = None) -> np.ndarray:
    a, b = as_state(a), as_state(b)
    check_capacity(a.size * b.size, max_dim)
    return np.kron(a, b)


def contract_b(joint, space: BipartiteSpace, psi) -> np.ndarray:
    """Project out subsystem B: ``result[a] = sum_b conj(psi[b]) * joint[a, b]``."""
    psi = as_state(psi)
    if psi.size != space.dim_b:
        raise ShapeError(f"psi has dim {psi.size}, subsystem B has {space.dim_b}")
    return space.matrix(joint) @ psi.conj()


def overlap(a, b) -> complex:
    """Inner product <a|b>, antilinear in the first slot."""
    a, b = as_state(a), as_state(b)
    if a.size != b.size:
        raise ShapeError(f"dimension mismatch {a.size} vs {b.size}")
    return complex(np.vdot(a, b))


def check_orthonormal(basis: Sequence[np.ndarray], dim: int, tol: float = 1e-8) -> np.ndarray:
    """Return the basis as columns of a matrix, raising BasisError if not orthonormal."""
    if len(basis) == 0:
        raise BasisError("empty basis")
    cols = np.column_stack([as_state(v) for v in basis])
    if cols.shape[0] != dim:
        raise BasisError(f"basis vectors have dim {cols.shape[0]}, expected {dim}")
    gram = cols.conj().T @ cols
    dev = np.max(np.abs(gram - np.eye(gram.shape[0])))
    if dev > tol:
        raise BasisError(f"basis not orthonormal (Gram deviation {dev:.3e})")
    return cols


def reduced_density(joint, space: BipartiteSpace) -> np.ndarray:
    m = space.matrix(joint)
    return m @ m.conj().T


def reduced_coherence(joint, space: BipartiteSpace, basis_a: Sequence[np.ndarray]) -> np.ndarray:
    """Reduced density matrix of subsystem A expressed in ``basis_a``."""
    u = check_orthonormal(basis_a, space.dim_a)
    rho = reduced_density(joint, space)
    return u.conj().T @ rho @ u


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def max_offdiagonal(rho: np.ndarray) -> float:
    if rho.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(rho - np.diag(np.diag(rho)))))


def pure_state_coherence(phi: np.ndarray) -> float:
    """Largest off-diagonal modulus of |phi><phi| in the computational basis."""
    mags = np.sort(np.abs(phi))
    if mags.size < 2:
        return 0.0
    return float(mags[-1] * mags[-2])


# operator helpers ------------------------------------------------------------

def is_sparse(op) -> bool:
    return sp.issparse(op)


def dense(op) -> np.ndarray:
    return op.toarray() if sp.issparse(op) else np.asarray(op, dtype=complex)


def op_dim(op) -> int:
    n, m = op.shape
    if n != m:
        raise ShapeError(f"operator is not square: {op.shape}")
    return n


def hermiticity_defect(op) -> float:
    if sp.issparse(op):
        d = (op - op.conj().T).tocoo()
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0
    op = np.asarray(op)
    return float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0


def is_hermitian(op, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(abs(op).max())) if op.shape[0] else 1.0
    return hermiticity_defect(op) <= tol * scale


def diagonal_or_none(op) -> np.ndarray | None:
    """Return the diagonal if ``op`` is diagonal, else None."""
    if sp.issparse(op):
        coo = op.tocoo()
        if np.all(coo.row == coo.col):
            return np.asarray(op.diagonal(), dtype=complex)
        off = coo.row != coo.col
        if not np.any(coo.data[off]):
            return np.asarray(op.diagonal(), dtype=complex)
        return None
    op = np.asarray(op)
    d = np.diagonal(op)
    if np.count_nonzero(op) == np.count_nonzero(d):
        return d.astype(complex)
    return None


def expect(op, v: np.ndarray) -> complex:
    """<v|op|v> for a dense or sparse operator."""
    return complex(np.vdot(v, op @ v))


def kron(a, b):
    if sp.issparse(a) or sp.issparse(b):
        return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b), format="csr")
    return np.kron(a, b)


def identity(dim: int, sparse: bool = False):
    return sp.identity(dim, dtype=complex, format="csr") if sparse else np.eye(dim, dtype=complex)


def embed_qubit(op: np.ndarray, site: int, n_sites: int):
    """Sparse operator acting as ``op`` on qubit ``site`` of an ``n_sites`` chain."""
    left = sp.identity(2 ** site, dtype=complex, format="csr")
    right = sp.identity(2 ** (n_sites - site - 1), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")
