"""Action, conservation-law residuals and the classical limit of a trajectory."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from . import hilbert
from .errors import (BoundaryError, HermiticityError, IncompleteTrajectory, ShapeError,
                     TopologyError)
from .grid import Grid
from .hamiltonian import HamiltonianSpec
from .trajectory import TrajectoryRecord


@dataclass(frozen=True)
class ClassicalState:
    q: np.ndarray
    p: np.ndarray
    M: float
    width: float = float("nan")  # packet standard deviation, when derived from a wave function

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("total mass must be positive")
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))

    def energy(self, potential: Callable) -> float:
        return float(np.sum(self.p**2) / (2 * self.M) + np.sum(potential(self.q)))


def momentum(phi, grid: Grid, hbar: float = 1.0) -> float:
    """<phi| -i hbar d/dx |phi> with the grid's derivative scheme."""
    phi = hilbert.as_state(phi)
    p = -1j * hbar * np.vdot(phi, grid.derivative(phi))
    if abs(p.imag) > 1e-8:
        raise HermiticityError(f"momentum has imaginary residue {p.imag:.3e}")
    return float(p.real)


def _spec_of(traj: TrajectoryRecord, spec: HamiltonianSpec | None) -> HamiltonianSpec:
    spec = spec if spec is not None else traj.spec
    if spec is None:
        raise IncompleteTrajectory("trajectory carries no Hamiltonian")
    return spec


def _require(traj: TrajectoryRecord, *names: str) -> None:
    missing = [n for n in names if getattr(traj, n) is None]
    if missing:
        raise IncompleteTrajectory(f"trajectory lacks {', '.join(missing)}")


def _system_hamiltonians(traj: TrajectoryRecord, spec: HamiltonianSpec):
    for t, b in zip(traj.times, traj.bath_coeffs):
        yield spec.system_hamiltonian(b, t)


def mean_forces(traj: TrajectoryRecord, spec: HamiltonianSpec | None = None) -> np.ndarray:
    """<|phi|^2, dV/dx> at every sample, V being the full partial-system potential."""
    spec = _spec_of(traj, spec)
    _require(traj, "states", "bath_coeffs")
    grid = spec.grid_a
    if grid is None:
        raise IncompleteTrajectory("force needs a grid model")
    return np.array([grid.mean_force(phi, spec.potential_diagonal(b, t))
                     for t, phi, b in zip(traj.times, traj.states, traj.bath_coeffs)])


def newton_residual(traj: TrajectoryRecord, spec: HamiltonianSpec | None = None) -> float:
    """max over interior samples of |dp/dt + <|phi|^2, dV/dx>| (centered dp/dt)."""
    _require(traj, "momentum")
    if len(traj) < 3:
        raise IncompleteTrajectory("need at least three samples")
    p, t = traj.momentum, traj.times
    dpdt = (p[2:] - p[:-2]) / (t[2:] - t[:-2])
    force = mean_forces(traj, spec)[1:-1]
    return float(np.max(np.abs(dpdt + force)))


def energy_ledger(traj: TrajectoryRecord) -> tuple[float, float]:
    """First-law balance over the whole record.

    Returns (residual, heat_out) with residual = |dE + d(lambda) - int <dV/dt> dt|
    and heat_out = lambda(t_end) - lambda(t_start).
    """
    _require(traj, "dissipation", "energy", "dvdt")
    rate, energy = traj.dissipation, traj.energy
    work = trapezoid(traj.dvdt, traj.times)
    residual = abs((energy[-1] - energy[0]) + (rate[-1] - rate[0]) - work)
    return float(residual), float(rate[-1] - rate[0])


def running_ledger(traj: TrajectoryRecord) -> np.ndarray:
    """E(t) + lambda(t) - int_0^t <dV/dt> dt - (E + lambda)(0) at every sample."""
    from scipy.integrate import cumulative_trapezoid
    _require(traj, "dissipation", "energy", "dvdt")
    total = traj.energy + traj.dissipation
    return total - total[0] - cumulative_trapezoid(traj.dvdt, traj.times, initial=0.0)


def action_increments(traj: TrajectoryRecord, spec: HamiltonianSpec | None = None) -> np.ndarray:
    """Per-step action from the stored states.

    The time-derivative term uses the phase of <phi_n|phi_n+1>, which is exact
    for stationary states; the Hamiltonian term uses the step-averaged
    expectation.  The first entry is 0.
    """
    spec = _spec_of(traj, spec)
    _require(traj, "states", "bath_coeffs")
    phis = traj.states
    h = np.array([hilbert.expect(hn, phi).real / np.vdot(phi, phi).real
                  for hn, phi in zip(_system_hamiltonians(traj, spec), phis)])
    dts = np.diff(traj.times)
    ovl = np.einsum("ij,ij->i", phis[:-1].conj(), phis[1:])
    inc = 0.5 * dts * (h[:-1] + h[1:]) + spec.hbar * np.angle(ovl)
    return np.concatenate([[0.0], inc])


def action_value(traj: TrajectoryRecord) -> float:
    """Action integral of <phi|(-i hbar d/dt + h)|phi> over the record."""
    if traj.states is not None and traj.spec is not None:
        return float(np.sum(action_increments(traj)))
    _require(traj, "action_increments")
    return float(np.sum(traj.action_increments))


def energy_from_states(traj: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference E = <phi|i hbar d/dt|phi> at step midpoints (times, values)."""
    _require(traj, "states")
    hbar = traj.spec.hbar if traj.spec is not None else 1.0
    phis = traj.states
    ovl = np.einsum("ij,ij->i", phis[:-1].conj(), phis[1:])
    dts = np.diff(traj.times)
    return 0.5 * (traj.times[:-1] + traj.times[1:]), -hbar * np.angle(ovl) / dts


def _time_derivative(phis: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Second-order finite differences along the time axis (one-sided at the ends)."""
    return np.gradient(phis, times, axis=0, edge_order=2)


def constrained_action(traj: TrajectoryRecord, phis: np.ndarray | None = None,
                       spec: HamiltonianSpec | None = None) -> complex:
    """S - int lambda(t) <phi|phi> dt for the path ``phis`` (default: the record's states).

    The path need not be normalized; the Hamiltonian and lambda(t) are those
    of the recorded trajectory.
    """
    spec = _spec_of(traj, spec)
    _require(traj, "states", "bath_coeffs", "dissipation")
    phis = traj.states if phis is None else np.asarray(phis, dtype=complex)
    if phis.shape != traj.states.shape:
        raise ShapeError("path shape differs from the recorded states")
    dphi = _time_derivative(phis, traj.times)
    dens = np.empty(len(traj), dtype=complex)
    for n, hn in enumerate(_system_hamiltonians(traj, spec)):
        phi = phis[n]
        dens[n] = (np.vdot(phi, -1j * spec.hbar * dphi[n]) + np.vdot(phi, hn @ phi)
                   - traj.dissipation[n] * np.vdot(phi, phi))
    return complex(trapezoid(dens, traj.times))


def bump_direction(traj: TrajectoryRecord, vector) -> np.ndarray:
    """A fixed vector times sin^2 of the elapsed fraction; zero at both ends."""
    v = hilbert.as_state(vector)
    s = (traj.times - traj.times[0]) / (traj.times[-1] - traj.times[0])
    return np.sin(np.pi * s)[:, None] ** 2 * v[None, :]


def stationarity_check(traj: TrajectoryRecord, spec: HamiltonianSpec | None, epsilon: float,
                       direction) -> float:
    """|S_c[phi + eps dphi] - S_c[phi]| / eps for the constrained action S_c.

    ``direction`` is either a state vector (shaped in time by ``bump_direction``)
    or a full path of perturbations that must vanish at both endpoints.
    The variation moves phi and phi* together.
    """
    _require(traj, "states")
    direction = np.asarray(direction, dtype=complex)
    if direction.ndim == 1:
        direction = bump_direction(traj, direction)
    if direction.shape != traj.states.shape:
        raise ShapeError("perturbation path has the wrong shape")
    if np.max(np.abs(direction[[0, -1]])) > 1e-14:
        raise BoundaryError("perturbation must vanish at the initial and final times")
    if not np.any(direction):
        return 0.0
    base = constrained_action(traj, spec=spec)
    moved = constrained_action(traj, traj.states + epsilon * direction, spec=spec)
    return float(abs(moved - base) / epsilon)


def ehrenfest_trajectory(traj: TrajectoryRecord, spec: HamiltonianSpec | None = None) -> list[ClassicalState]:
    """Centre-of-mass (q, p) of a grid trajectory with the packet width."""
    spec = _spec_of(traj, spec)
    _require(traj, "com", "momentum")
    grid = spec.grid_a
    mass = spec.masses[0]
    widths = np.full(len(traj), np.nan)
    if traj.states is not None:
        dens = np.abs(traj.states) ** 2
        widths = np.sqrt(np.maximum(dens @ grid.x**2 - traj.com**2, 0.0))
    return [ClassicalState(q, p, mass, w) for q, p, w in zip(traj.com, traj.momentum, widths)]


def _numerical_force(potential: Callable, h: float = 1e-3) -> Callable:
    def force(q):
        return -(-potential(q + 2 * h) + 8 * potential(q + h) - 8 * potential(q - h)
                 + potential(q - 2 * h)) / (12 * h)
    return force


def classical_oracle(initial: ClassicalState, potential: Callable, T: float, dt: float,
                     force: Callable | None = None) -> list[ClassicalState]:
    """Leapfrog (velocity Verlet) integration of dq/dt = p/M, dp/dt = -dV/dq."""
    from .exactprop import _step_count
    n = _step_count(T, dt)
    force = force or _numerical_force(potential)
    q, p, m = initial.q.copy(), initial.p.copy(), initial.M
    out = [ClassicalState(q, p, m)]
    f = force(q)
    for _ in range(n):
        p_half = p + 0.5 * dt * f
        q = q + dt * p_half / m
        f = force(q)
        p = p_half + 0.5 * dt * f
        out.append(ClassicalState(q, p, m))
    return out


def translation_decomposition(traj: TrajectoryRecord, spec: HamiltonianSpec | None,
                              delta_x: float) -> tuple[float, float]:
    """Split the change of the action under a rigid shift into its two parts.

    boundary = p(t2) - p(t1) from shifting the wave function; bulk =
    int dt <|phi|^2, dV/dx> from shifting the potential.  Their sum vanishes
    for a solution.
    """
    spec = _spec_of(traj, spec)
    grid = spec.grid_a
    if grid is None or not grid.periodic:
        raise TopologyError("translations are only defined on periodic grids")
    if abs(delta_x - grid.spacing) > 1e-12 * grid.spacing:
        raise ValueError("the shift must be exactly one lattice step")
    _require(traj, "momentum")
    boundary = traj.momentum[-1] - traj.momentum[0]
    bulk = trapezoid(mean_forces(traj, spec), traj.times)
    return float(boundary), float(bulk)
