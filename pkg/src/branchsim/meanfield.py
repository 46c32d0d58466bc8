"""Time-dependent Hartree propagation of a product state phi (x) psi.

Gauge convention: the bath factor obeys ``i hbar dpsi/dt = (h_B + V_psi) psi``
with no multiplier, and the whole multiplier sits in the partial-system
equation ``i hbar dphi/dt = (h_A + V - lambda) phi``.  With that choice the
dissipation rate lambda(t) = <psi| i hbar d/dt - h_B |psi> equals the
interaction expectation <phi psi| h_int |phi psi>, which gives two independent
ways of computing it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import expm_multiply

from . import hilbert
from .errors import (GaugeInconsistency, HermiticityError, IntegratorDiverged, NormError,
                     ShapeError, TimeOrderError)
from .hamiltonian import HamiltonianSpec
from .trajectory import TrajectoryRecord

NORM_TOL = 1e-8
IMAG_TOL = 1e-10
GAUGE_TOL = 1e-8
DENSE_EXP_MAX = 64


@dataclass(frozen=True)
class MeanFieldState:
    phi: np.ndarray
    psi: np.ndarray
    dissipation: float = 0.0   # lambda(t)
    accumulated: float = 0.0   # Lambda(t), time integral of lambda
    t: float = 0.0

    def __post_init__(self):
        for name in ("phi", "psi"):
            v = hilbert.as_state(getattr(self, name))
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @classmethod
    def start(cls, phi, psi, spec: HamiltonianSpec, t: float = 0.0) -> "MeanFieldState":
        """Initial state with lambda evaluated and Lambda = 0."""
        s = cls(phi, psi, 0.0, 0.0, t)
        return cls(s.phi, s.psi, dissipation_rate(s, spec), 0.0, t)

    @property
    def product(self) -> np.ndarray:
        return np.kron(self.phi, self.psi)

    def isolated_phi(self, hbar: float = 1.0) -> np.ndarray:
        """phi with the accumulated dissipation phase exp(i Lambda / hbar) removed."""
        return self.phi * np.exp(-1j * self.accumulated / hbar)


class DissipationEstimates(NamedTuple):
    projected: complex   # <psi| i hbar dpsi/dt - h_B psi> with the bath equation of motion
    interaction: float   # <phi| V[psi] |phi> = <phi psi| h_int |phi psi>


def _check_state(state: MeanFieldState, spec: HamiltonianSpec) -> None:
    if state.phi.size != spec.dim_a or state.psi.size != spec.dim_b:
        raise ShapeError("state dimensions do not match the Hamiltonian")
    for name, v in (("phi", state.phi), ("psi", state.psi)):
        dev = abs(np.linalg.norm(v) - 1.0)
        if dev > NORM_TOL:
            raise NormError(f"{name} is not normalized (deviation {dev:.2e})")


def dissipation_estimates(state: MeanFieldState, spec: HamiltonianSpec) -> DissipationEstimates:
    phi, psi = state.phi, state.psi
    a = spec.system_coefficients(phi)
    b = spec.bath_coefficients(psi)
    ihbar_dpsi = spec.bath_hamiltonian(a) @ psi
    projected = complex(np.vdot(psi, ihbar_dpsi) - np.vdot(psi, spec.h_b @ psi))
    interaction = complex(np.vdot(phi, spec.field_a(b) @ phi)).real
    return DissipationEstimates(projected, interaction)


def dissipation_rate(state: MeanFieldState, spec: HamiltonianSpec) -> float:
    """lambda(t); raises GaugeInconsistency when the two routes disagree."""
    _check_state(state, spec)
    est = dissipation_estimates(state, spec)
    scale = max(1.0, abs(est.interaction))
    if abs(est.projected.imag) > GAUGE_TOL * scale:
        raise GaugeInconsistency(f"lambda has imaginary part {est.projected.imag:.3e}")
    if abs(est.projected.real - est.interaction) > GAUGE_TOL * scale:
        raise GaugeInconsistency(
            f"lambda routes disagree: {est.projected.real!r} vs {est.interaction!r}")
    return est.interaction


def mirror_dissipation_rate(state: MeanFieldState, spec: HamiltonianSpec) -> float:
    """lambda_psi = <phi| i hbar dphi/dt - h_phi phi> with h_phi = h_A plus any drive.

    In this gauge it equals <V> - lambda, so lambda + lambda_psi is the
    interaction energy <phi|V|phi>.
    """
    _check_state(state, spec)
    phi = state.phi
    b = spec.bath_coefficients(state.psi)
    ihbar_dphi = spec.system_hamiltonian(b, state.t) @ phi - state.dissipation * phi
    own = spec.h_a @ phi
    if spec.drive is not None:
        own = own + spec.drive.at(state.t) @ phi
    val = complex(np.vdot(phi, ihbar_dphi - own))
    if abs(val.imag) > GAUGE_TOL * max(1.0, abs(val.real)):
        raise GaugeInconsistency(f"lambda_psi has imaginary part {val.imag:.3e}")
    return val.real


def _interaction_energy(spec: HamiltonianSpec, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(spec.couplings * a * b)) if len(a) else 0.0


class _Exponentials:
    """Applies exp(-i h dt / hbar) to a vector, reusing results for static operators.

    ``h`` may be a 1-D array, meaning a diagonal operator.
    """

    def __init__(self, hbar: float):
        self.hbar = hbar
        self._fixed = {}

    def apply(self, h, v: np.ndarray, dt: float, key=None) -> np.ndarray:
        if isinstance(h, np.ndarray) and h.ndim == 1:
            return np.exp((-1j * dt / self.hbar) * h) * v
        if key is not None and (key, dt) in self._fixed:
            return self._fixed[(key, dt)](v)
        f = self._build(h, dt)
        if key is not None:
            self._fixed[(key, dt)] = f
        return f(v)

    def _build(self, h, dt: float):
        c = -1j * dt / self.hbar
        d = hilbert.diagonal_or_none(h)
        if d is not None:
            phases = np.exp(c * d.real)
            return lambda v: phases * v
        n = h.shape[0]
        if sp.issparse(h) and n > DENSE_EXP_MAX:
            hs = sp.csr_matrix(h) * c
            return lambda v: expm_multiply(hs, v)
        w, q = np.linalg.eigh(hilbert.dense(h))
        u = (q * np.exp(c * w)) @ q.conj().T
        return lambda v: u @ v


def tdh_step(state: MeanFieldState, spec: HamiltonianSpec, dt: float,
             _exp: _Exponentials | None = None) -> MeanFieldState:
    """One second-order step of the coupled mean-field equations.

    Fields are evaluated at the step midpoint from a predictor half step;
    Lambda is advanced with the trapezoidal rule.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    exp = _exp or _Exponentials(spec.hbar)
    hbar, t = spec.hbar, state.t
    phi, psi = state.phi, state.psi
    static_a = spec.isolated and spec.drive is None
    if spec.isolated:
        b_mid = a_mid = np.zeros(len(spec.terms))
        rate_mid = 0.0
    else:
        a0 = spec.system_coefficients(phi)
        b0 = spec.bath_coefficients(psi)
        phi_half = exp.apply(_h_system(spec, b0, t), phi, dt / 2)
        psi_half = exp.apply(_h_bath(spec, a0), psi, dt / 2)
        a_mid = spec.system_coefficients(phi_half)
        b_mid = spec.bath_coefficients(psi_half)
        rate_mid = _interaction_energy(spec, a_mid, b_mid)
    h_phi = _h_system(spec, b_mid, t + dt / 2)
    h_psi = _h_bath(spec, a_mid)
    phi1 = exp.apply(h_phi, phi, dt, key="a" if static_a else None)
    if rate_mid:
        phi1 = phi1 * np.exp(1j * rate_mid * dt / hbar)
    psi1 = exp.apply(h_psi, psi, dt, key="b" if spec.isolated else None)
    for name, v in (("phi", phi1), ("psi", psi1)):
        drift = abs(np.linalg.norm(v) - 1.0)
        if not drift <= NORM_TOL:
            raise IntegratorDiverged(f"{name} norm drift {drift:.3e} at t={t + dt:.6g}")
    rate1 = 0.0 if spec.isolated else _interaction_energy(
        spec, spec.system_coefficients(phi1), spec.bath_coefficients(psi1))
    acc = state.accumulated + 0.5 * (state.dissipation + rate1) * dt
    return MeanFieldState(phi1, psi1, rate1, acc, t + dt)


def _h_system(spec: HamiltonianSpec, b, t: float):
    d = spec.system_hamiltonian_diagonal(b, t)
    return spec.system_hamiltonian(b, t) if d is None else d


def _h_bath(spec: HamiltonianSpec, a):
    d = spec.bath_hamiltonian_diagonal(a)
    return spec.bath_hamiltonian(a) if d is None else d


def accumulate_phase(times, rates) -> np.ndarray:
    """Trapezoidal running integral of lambda; the first entry is 0."""
    times = np.asarray(times, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if times.shape != rates.shape:
        raise ShapeError("times and rates differ in length")
    if np.any(np.diff(times) <= 0):
        raise TimeOrderError("sample times must be strictly increasing")
    return cumulative_trapezoid(rates, times, initial=0.0)


def meanfield_fidelity(exact, state: MeanFieldState) -> float:
    exact = hilbert.as_state(exact)
    prod = state.product
    if exact.size != prod.size:
        raise ShapeError(f"exact state has dim {exact.size}, product has {prod.size}")
    return float(abs(np.vdot(exact, prod)) ** 2)


def _bath_drift(spec: HamiltonianSpec, psi: np.ndarray, h_psi) -> np.ndarray:
    """d<B_k>/dt from the bath equation of motion."""
    if not spec.terms:
        return np.zeros(0)
    hv = h_psi @ psi
    return np.array([-2.0 / spec.hbar * np.vdot(hv, t.b @ psi).imag for t in spec.terms])


def run_meanfield(spec: HamiltonianSpec, phi0, psi0, T: float, dt: float,
                  record_states: bool = True, sample_every: int = 1) -> TrajectoryRecord:
    """Integrate the mean-field equations on [0, T] and record observables."""
    from .exactprop import _step_count
    n_steps = _step_count(T, dt)
    if sample_every < 1 or n_steps % sample_every:
        raise ValueError("sample_every must divide the number of steps")
    exp = _Exponentials(spec.hbar)
    state = MeanFieldState.start(phi0, psi0, spec)
    grid = spec.grid_a
    samples = []
    prev_phi, prev_h, action = None, None, 0.0
    for n in range(n_steps + 1):
        if n:
            state = tdh_step(state, spec, dt, exp)
        if n % sample_every:
            continue
        phi, psi, t = state.phi, state.psi, state.t
        a = spec.system_coefficients(phi)
        b = spec.bath_coefficients(psi)
        h_exp = hilbert.expect(spec.system_hamiltonian(b, t), phi).real
        dvdt = 0.0
        if spec.drive is not None:
            dvdt += spec.drive.rate(t) * hilbert.expect(spec.drive.operator, phi).real
        if not spec.isolated:
            dvdt += float(np.sum(spec.couplings * a * _bath_drift(spec, psi, spec.bath_hamiltonian(a))))
        if prev_phi is not None:
            step = dt * sample_every
            action = 0.5 * step * (prev_h + h_exp) + spec.hbar * np.angle(np.vdot(prev_phi, phi))
        momentum = com = np.nan
        if grid is not None:
            momentum = _grid_momentum(grid, phi, spec.hbar)
            com = float(np.sum(grid.x * np.abs(phi) ** 2))
        samples.append((t, np.linalg.norm(phi), state.dissipation, state.accumulated, momentum,
                        h_exp - state.dissipation, action, hilbert.pure_state_coherence(phi), com,
                        h_exp, dvdt, phi if record_states else None,
                        psi if record_states else None, b))
        prev_phi, prev_h = phi, h_exp
    cols = list(zip(*samples))
    arr = [np.array(c, dtype=float) for c in cols[:11]]
    return TrajectoryRecord(
        times=arr[0], norm=arr[1], dissipation=arr[2], accumulated=arr[3],
        momentum=arr[4] if grid is not None else None, energy=arr[5], action_increments=arr[6],
        coherence=arr[7], com=arr[8] if grid is not None else None, h_expect=arr[9], dvdt=arr[10],
        states=np.array(cols[11]) if record_states else None,
        bath_states=np.array(cols[12]) if record_states else None,
        bath_coeffs=np.array(cols[13]).reshape(len(samples), len(spec.terms)),
        spec=spec, kind="meanfield")


def _grid_momentum(grid, phi: np.ndarray, hbar: float) -> float:
    p = -1j * hbar * np.vdot(phi, grid.derivative(phi))
    if abs(p.imag) > 1e-8 * max(1.0, abs(p.real)):
        raise HermiticityError(f"momentum expectation has imaginary part {p.imag:.3e}")
    return float(p.real)
