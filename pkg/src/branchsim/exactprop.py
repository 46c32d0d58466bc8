"""Norm-preserving propagation of the whole-system state.

Two integrators sit behind one contract:

* ``krylov`` applies exp(-i H dt / hbar) to the state with scipy's
  truncated-Taylor ``expm_multiply``; accurate to rounding for any step.
* ``split`` is a second-order Strang splitting of H into its diagonal and
  off-diagonal Hermitian parts, each exponentiated exactly.

``auto`` picks ``krylov`` above 256 dimensions and ``split`` below.
Time-dependent Hamiltonians are callables ``t -> H`` sampled at the step
midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import hilbert
from .errors import IntegratorDiverged, OperatorError
from .trajectory import TrajectoryRecord

METHODS = ("auto", "krylov", "split")
SPLIT_MAX_DIM = 256


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    method: str = "auto"
    norm_tol: float = 1e-10
    hbar: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def resolve(self, dim: int) -> str:
        if self.method != "auto":
            return self.method
        return "krylov" if dim > SPLIT_MAX_DIM else "split"


class Propagator:
    """Stateful stepper that caches the off-diagonal exponential of the split method."""

    def __init__(self, cfg: PropagatorConfig, check_hermitian: bool = True):
        self.cfg = cfg
        self.check_hermitian = check_hermitian
        self._offdiag_key = None
        self._offdiag_u = None

    def step(self, phi: np.ndarray, h, dt: float | None = None) -> np.ndarray:
        dt = self.cfg.dt if dt is None else dt
        if self.check_hermitian and not hilbert.is_hermitian(h):
            raise OperatorError("Hamiltonian is not Hermitian")
        method = self.cfg.resolve(phi.size)
        if method == "krylov":
            out = expm_multiply((-1j * dt / self.cfg.hbar) * _csr_or_dense(h), phi)
        else:
            out = self._split(phi, h, dt)
        drift = abs(np.linalg.norm(out) - np.linalg.norm(phi))
        if not drift <= self.cfg.norm_tol:
            raise IntegratorDiverged(f"norm drift {drift:.3e} in one step exceeds {self.cfg.norm_tol:.1e}")
        return out

    def _split(self, phi: np.ndarray, h, dt: float) -> np.ndarray:
        hd = hilbert.dense(h)
        d = np.real(np.diagonal(hd)).copy()
        off = hd - np.diag(d)
        key = (off.tobytes(), dt, self.cfg.hbar)
        if key != self._offdiag_key:
            if np.any(off):
                w, q = np.linalg.eigh(off)
                self._offdiag_u = (q * np.exp(-1j * w * dt / self.cfg.hbar)) @ q.conj().T
            else:
                self._offdiag_u = None
            self._offdiag_key = key
        half = np.exp(-0.5j * d * dt / self.cfg.hbar)
        out = half * phi
        if self._offdiag_u is not None:
            out = self._offdiag_u @ out
        return half * out


def _csr_or_dense(h):
    return sp.csr_matrix(h) if sp.issparse(h) else np.asarray(h, dtype=complex)


def step_exact(phi, h, cfg: PropagatorConfig, t: float = 0.0) -> np.ndarray:
    """Advance ``phi`` by one step of ``cfg.dt`` under H (array or callable of t)."""
    phi = hilbert.as_state(phi)
    if callable(h):
        h = h(t + cfg.dt / 2)
    return Propagator(cfg).step(phi, h)


def evolve(phi0, h, T: float, cfg: PropagatorConfig,
           observers: Iterable[Callable[[float, np.ndarray], None]] = (),
           record_states: bool = True) -> TrajectoryRecord:
    """Propagate from t=0 to T, calling every observer with (t, state) at each sample."""
    phi = hilbert.as_state(phi0)
    if T < 0:
        raise ValueError("T must be non-negative")
    n_steps = _step_count(T, cfg.dt)
    observers = list(observers)
    static = not callable(h)
    if static and not hilbert.is_hermitian(h):
        raise OperatorError("Hamiltonian is not Hermitian")
    times = cfg.dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, phi.size), dtype=complex)
    states[0] = phi
    prop = Propagator(cfg, check_hermitian=not static)
    if static and cfg.resolve(phi.size) == "krylov" and n_steps > 0:
        a = (-1j / cfg.hbar) * _csr_or_dense(h)
        states[:] = expm_multiply(a, phi, start=0.0, stop=T, num=n_steps + 1, endpoint=True)
    else:
        for n in range(n_steps):
            hn = h if static else h(times[n] + cfg.dt / 2)
            states[n + 1] = prop.step(states[n], hn)
    norms = np.linalg.norm(states, axis=1)
    budget = max(1, n_steps) * cfg.norm_tol
    worst = float(np.max(np.abs(norms - norms[0])))
    if worst > budget:
        raise IntegratorDiverged(f"accumulated norm drift {worst:.3e} exceeds {budget:.3e}")
    energy = np.empty(n_steps + 1)
    for n in range(n_steps + 1):
        hn = h if static else h(times[n])
        energy[n] = hilbert.expect(hn, states[n]).real
        for obs in observers:
            obs(float(times[n]), states[n])
    return TrajectoryRecord(times=times, norm=norms, energy=energy,
                            states=states if record_states else None, kind="exact")


def _step_count(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n
