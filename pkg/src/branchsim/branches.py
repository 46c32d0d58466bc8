"""Branch expansion of the joint state over mean-field solutions.

Each branch nu starts as chi_nu (x) psi0 and is propagated by the mean-field
step on its own.  Because the partial-system factor carries the multiplier
lambda, its phase already contains exp(i Lambda_nu / hbar); the coherent sum
of the branches is therefore a plain weighted sum of the stored factors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import hilbert
from .errors import BranchSimError, ShapeError, SyncError, WeightError
from .hamiltonian import HamiltonianSpec
from .hilbert import BipartiteSpace
from .meanfield import MeanFieldState, _Exponentials, dissipation_rate, tdh_step
from .workers import worker_count

WEIGHT_MODES = ("modSquared", "amplitude")
OVERLAP_THRESHOLD = 0.1
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Branch:
    nu: int
    alpha: complex
    state: MeanFieldState

    @property
    def weight(self) -> float:
        return abs(self.alpha) ** 2


@dataclass(frozen=True)
class BranchEnsemble:
    """Branches sorted by nu, with the per-step history of lambda and Lambda.

    ``history_t`` has one entry per recorded time; ``history_rate`` and
    ``history_phase`` are (times, branches) arrays.
    """

    branches: tuple[Branch, ...]
    hbar: float = 1.0
    weight_mode: str = "modSquared"
    dt: float = 0.0
    history_t: np.ndarray = field(default=None, repr=False)
    history_rate: np.ndarray = field(default=None, repr=False)
    history_phase: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not self.branches:
            raise ShapeError("an ensemble needs at least one branch")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        branches = tuple(sorted(self.branches, key=lambda b: b.nu))
        if len({b.nu for b in branches}) != len(branches):
            raise ShapeError("branch indices must be distinct")
        total = sum(b.weight for b in branches)
        if total > 1 + 1e-8:
            raise WeightError(f"branch weights sum to {total:.12g} > 1")
        object.__setattr__(self, "branches", branches)
        if self.history_t is None:
            object.__setattr__(self, "history_t", np.array([branches[0].state.t]))
            object.__setattr__(self, "history_rate",
                               np.array([[b.state.dissipation for b in branches]]))
            object.__setattr__(self, "history_phase",
                               np.array([[b.state.accumulated for b in branches]]))

    def __len__(self) -> int:
        return len(self.branches)

    @property
    def nus(self) -> np.ndarray:
        return np.array([b.nu for b in self.branches])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([b.alpha for b in self.branches], dtype=complex)

    @property
    def phases(self) -> np.ndarray:
        return np.array([b.state.accumulated for b in self.branches])

    @property
    def rates(self) -> np.ndarray:
        return np.array([b.state.dissipation for b in self.branches])

    @property
    def t(self) -> float:
        return self.branches[0].state.t

    def weights(self, mode: str | None = None):
        mode = mode or self.weight_mode
        if mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        return np.abs(self.alphas) ** 2 if mode == "modSquared" else self.alphas


def init_branches(phi0, space: BipartiteSpace, basis_a, psi0, hbar: float = 1.0,
                  weight_mode: str = "modSquared", spec: HamiltonianSpec | None = None) -> BranchEnsemble:
    """Project the joint state on chi_nu (x) psi0 and start one branch per basis vector.

    With ``spec`` the initial lambda of every branch is evaluated; without
    it lambda starts at 0 and is filled in by the first ``evolve_branches``.
    """
    joint = hilbert.as_state(phi0)
    if joint.size != space.dim:
        raise ShapeError(f"joint state has dim {joint.size}, space has {space.dim}")
    psi0 = hilbert.as_state(psi0)
    if psi0.size != space.dim_b:
        raise ShapeError("psi0 does not live in the bath factor")
    if abs(np.linalg.norm(psi0) - 1) > 1e-8:
        raise WeightError("psi0 must be normalized")
    u = hilbert.check_orthonormal(basis_a, space.dim_a)
    projected = hilbert.contract_b(joint, space, psi0)
    alphas = u.conj().T @ projected
    branches = []
    for nu in range(u.shape[1]):
        chi = u[:, nu]
        state = (MeanFieldState.start(chi, psi0, spec) if spec is not None
                 else MeanFieldState(chi, psi0))
        branches.append(Branch(nu, complex(alphas[nu]), state))
    return BranchEnsemble(tuple(branches), hbar=hbar, weight_mode=weight_mode)


def _run_branch(branch: Branch, spec: HamiltonianSpec, dt: float, steps: int):
    try:
        s = branch.state
        state = replace(s, dissipation=dissipation_rate(s, spec))
        exp = _Exponentials(spec.hbar)
        rates = np.empty(steps + 1)
        phases = np.empty(steps + 1)
        rates[0], phases[0] = state.dissipation, state.accumulated
        for n in range(steps):
            state = tdh_step(state, spec, dt, exp)
            rates[n + 1], phases[n + 1] = state.dissipation, state.accumulated
        return replace(branch, state=state), rates, phases
    except BranchSimError as exc:
        err = type(exc)(f"branch {branch.nu}: {exc}")
        err.branch = branch.nu
        raise err from exc


def evolve_branches(ens: BranchEnsemble, spec: HamiltonianSpec, dt: float, steps: int,
                    workers: int | None = None) -> BranchEnsemble:
    """Advance every branch by ``steps`` mean-field steps, concurrently.

    Each branch is an independent sequential computation, so the result does
    not depend on the number of workers.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if spec.hbar != ens.hbar:
        raise ValueError("ensemble and Hamiltonian disagree on hbar")
    n_workers = min(workers or worker_count(), len(ens))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda b: _run_branch(b, spec, dt, steps), ens.branches))
    else:
        results = [_run_branch(b, spec, dt, steps) for b in ens.branches]
    branches = tuple(r[0] for r in results)
    rates = np.stack([r[1] for r in results], axis=1)
    phases = np.stack([r[2] for r in results], axis=1)
    times = ens.t + dt * np.arange(steps + 1)
    return BranchEnsemble(
        branches, ens.hbar, ens.weight_mode, dt,
        history_t=np.concatenate([ens.history_t[:-1], times]),
        history_rate=np.vstack([ens.history_rate[:-1], rates]),
        history_phase=np.vstack([ens.history_phase[:-1], phases]))


class OverlapReport(NamedTuple):
    matrix: np.ndarray      # matrix[nu, nu'] = <psi_nu' | psi_nu>
    max_offdiag: float
    flagged: bool           # off-diagonal neglect questionable


def offdiagonal_overlaps(ens: BranchEnsemble, threshold: float = OVERLAP_THRESHOLD) -> OverlapReport:
    if len(ens) < 2:
        raise ShapeError("overlaps need at least two branches")
    psis = np.array([b.state.psi for b in ens.branches])
    omega = psis @ psis.conj().T
    off = np.abs(omega[~np.eye(len(ens), dtype=bool)])
    worst = float(off.max())
    return OverlapReport(omega, worst, worst >= threshold)


def interference_kernel(weights, phases, hbar: float = 1.0) -> complex:
    """sum_nu w_nu exp(i Lambda_nu / hbar)."""
    w = np.asarray(weights, dtype=float)
    lam = np.asarray(phases, dtype=float)
    if w.shape != lam.shape or w.ndim != 1:
        raise ShapeError("weights and phases must be 1-D and equally long")
    if np.any(w < 0):
        raise WeightError("weights must be non-negative")
    if not w.sum() > 0:
        raise WeightError("weights must not all vanish")
    return complex(np.sum(w * np.exp(1j * lam / hbar)))


class PartialWave(NamedTuple):
    state: np.ndarray
    norm: float


def partial_wave(ens: BranchEnsemble, weight_mode: str | None = None) -> PartialWave:
    """Weighted coherent sum of the branch factors; not renormalized."""
    ts = np.array([b.state.t for b in ens.branches])
    tol = ens.dt / 2 if ens.dt else 1e-12
    if ts.max() - ts.min() > tol:
        raise SyncError(f"branches are spread over {ts.max() - ts.min():.3e} in time")
    w = ens.weights(weight_mode)
    phis = np.array([b.state.phi for b in ens.branches])
    out = w @ phis
    return PartialWave(out, float(np.linalg.norm(out)))


class PhaseSpread(NamedTuple):
    density: float       # median |Lambda_nu+1 - Lambda_nu| / hbar
    spread_rate: float   # (max - min) Lambda / (hbar t)
    distinct: bool       # neighbouring phases differ at all
    strong: bool         # neighbouring phases differ by at least hbar


def phase_spread(ens: BranchEnsemble) -> PhaseSpread:
    if len(ens) < 2:
        raise ShapeError("phase spread needs at least two branches")
    lam = ens.phases / ens.hbar
    gaps = np.abs(np.diff(lam))
    density = float(np.median(gaps))
    t = ens.t
    rate = float((lam.max() - lam.min()) / t) if t > 0 else 0.0
    return PhaseSpread(density, rate, density > 0, density >= 1.0)


def stationarity_profile(phases) -> np.ndarray:
    """|dLambda/dnu| on the branch lattice: centered inside, one-sided at the ends."""
    lam = np.asarray(phases, dtype=float)
    if lam.size == 1:
        return np.zeros(1)
    prof = np.empty_like(lam)
    prof[1:-1] = np.abs(lam[2:] - lam[:-2]) / 2
    prof[0] = abs(lam[1] - lam[0])
    prof[-1] = abs(lam[-1] - lam[-2])
    return prof


class Selection(NamedTuple):
    nu_c: int
    profile: np.ndarray           # |dLambda/dnu| / hbar at the chosen time
    temporal_profile: np.ndarray  # |lambda_nu| at the chosen time, i.e. |dLambda/dt|
    nus: np.ndarray
    t: float


def _history_index(ens: BranchEnsemble, t: float) -> int:
    i = int(np.argmin(np.abs(ens.history_t - t)))
    tol = ens.dt / 2 if ens.dt else 1e-12
    if abs(ens.history_t[i] - t) > tol:
        raise SyncError(f"no recorded phases near t={t}")
    return i


def select_dominant(ens: BranchEnsemble, t: float | None = None) -> Selection:
    """The branch whose phase is stationary in nu; ties go to larger weight, then lower nu."""
    i = _history_index(ens, ens.t if t is None else t)
    lam = ens.history_phase[i] / ens.hbar
    prof = stationarity_profile(lam)
    weights = np.abs(ens.alphas) ** 2
    lowest = prof.min()
    tied = np.flatnonzero(prof <= lowest + TIE_TOL * max(1.0, lowest))
    best = max(tied, key=lambda j: (weights[j], -j))
    return Selection(int(ens.nus[best]), prof, np.abs(ens.history_rate[i]), ens.nus,
                     float(ens.history_t[i]))


def ensemble_from_phases(phases, alphas=None, hbar: float = 1.0, t: float = 0.0,
                         weight_mode: str = "modSquared") -> BranchEnsemble:
    """A static ensemble on one-dimensional factors with prescribed Lambda_nu.

    Useful for studying the kernel and the selection rule in isolation.
    """
    lam = np.asarray(phases, dtype=float)
    n = lam.size
    if alphas is None:
        alphas = np.full(n, 1 / np.sqrt(n))
    branches = []
    for nu, (a, ph) in enumerate(zip(alphas, lam)):
        phi = np.array([np.exp(1j * ph / hbar)])
        branches.append(Branch(nu, complex(a), MeanFieldState(phi, np.ones(1), 0.0, ph, t)))
    return BranchEnsemble(tuple(branches), hbar=hbar, weight_mode=weight_mode)
