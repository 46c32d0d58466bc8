"""Preset experiments behind ``branchsim run``.

Every scenario returns a ``ScenarioResult``: the sampled trajectory rows,
the summary written to JSON and a flat dict of headline metrics used by
sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert, oracles
from .branches import (ensemble_from_phases, evolve_branches, init_branches, offdiagonal_overlaps,
                       partial_wave, phase_spread, select_dominant)
from .config import ScenarioConfig
from .exactprop import PropagatorConfig, evolve
from .grid import Grid
from .hamiltonian import (bath_product_state, build_dephasing_model, build_grid_pair,
                          build_grid_single, build_pointer_model, linear_ramp)
from .hilbert import SIGMA_X, SIGMA_Z
from .meanfield import MeanFieldState, meanfield_fidelity, run_meanfield
from .observables import (ClassicalState, action_value, classical_oracle, ehrenfest_trajectory,
                          energy_ledger, newton_residual)

COLUMNS = ("t", "norm", "lambda", "Lambda", "px", "energy", "coherence", "qCoM")
NAN = float("nan")


@dataclass
class ScenarioResult:
    rows: list
    summary: dict
    headline: dict = field(default_factory=dict)


def seeded_couplings(k: int, seed: int, scale: float = 1.0, pool: int = 8) -> np.ndarray:
    """First ``k`` of a seeded list of couplings drawn from U[0.5, 1.5].

    The list is drawn once with length max(k, pool), so a larger bath always
    contains the couplings of a smaller one.
    """
    rng = np.random.default_rng(seed)
    return scale * rng.uniform(0.5, 1.5, max(k, pool))[:k]


def _rows(traj) -> list:
    n = len(traj)
    px = traj.momentum if traj.momentum is not None else np.full(n, NAN)
    com = traj.com if traj.com is not None else np.full(n, NAN)
    return [tuple(float(x) for x in r) for r in zip(traj.times, traj.norm, traj.dissipation,
                                                    traj.accumulated, px, traj.energy,
                                                    traj.coherence, com)]


def _steps(cfg: ScenarioConfig) -> int:
    return int(round(cfg.T / cfg.dt))


def _common_residuals(traj) -> dict:
    ledger, heat = energy_ledger(traj)
    action = action_value(traj)
    delta = traj.accumulated[-1] - traj.accumulated[0]
    return {
        "action": abs(action - delta),
        "firstLaw": ledger,
        "normDrift": float(np.max(np.abs(traj.norm - 1.0))),
    }, heat


def _qubit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)], dtype=complex)


def _branch_basis(cfg: ScenarioConfig, h_a) -> list:
    dim = hilbert.op_dim(h_a)
    if cfg.basis == "energy":
        _, vecs = np.linalg.eigh(hilbert.dense(h_a))
        return [vecs[:, i] for i in range(dim)]
    return list(np.eye(dim, dtype=complex))


def run_dephasing(cfg: ScenarioConfig) -> ScenarioResult:
    g = (np.asarray(cfg.couplings) * cfg.g_scale if cfg.couplings is not None
         else seeded_couplings(cfg.K, cfg.seed, cfg.g_scale))
    h_sys = cfg.system_field * SIGMA_X + cfg.system_bias * SIGMA_Z
    drive = linear_ramp(SIGMA_Z, cfg.drive_slope) if cfg.drive_slope else None
    fields = [cfg.bath_field] * cfg.K if cfg.bath_field else None
    spec = build_dephasing_model(cfg.K, g, h_sys, cfg.hbar, fields, drive, cfg.max_joint_dim)
    phi0 = _qubit(cfg.system_theta)
    psi0 = bath_product_state([cfg.bath_theta] * cfg.K)
    traj = run_meanfield(spec, phi0, psi0, cfg.T, cfg.dt, record_states=False,
                         sample_every=cfg.sample_every)
    residuals, heat = _common_residuals(traj)

    ens = init_branches(np.kron(phi0, psi0), spec.space, _branch_basis(cfg, h_sys), psi0,
                        cfg.hbar, cfg.weight_mode, spec)
    offdiag = [offdiagonal_overlaps(ens, cfg.overlap_threshold).max_offdiag]
    chunk = cfg.sample_every
    for _ in range(_steps(cfg) // chunk):
        ens = evolve_branches(ens, spec, cfg.dt, chunk)
        offdiag.append(offdiagonal_overlaps(ens, cfg.overlap_threshold).max_offdiag)
    final = offdiagonal_overlaps(ens, cfg.overlap_threshold)
    spread = phase_spread(ens)
    selection = select_dominant(ens)

    metrics = {"meanOffDiag": float(np.mean(offdiag)), "spreadRate": spread.spread_rate,
               "phaseDensity": spread.density, "heatOut": heat,
               "couplings": [float(x) for x in g]}
    if cfg.exact:
        h = (spec.joint_operator(0.0, cfg.max_joint_dim) if drive is None
             else (lambda t: spec.joint_operator(t, cfg.max_joint_dim)))
        exact = evolve(np.kron(phi0, psi0), h, cfg.T,
                       PropagatorConfig(cfg.dt, cfg.method, hbar=cfg.hbar))
        coh = [abs(hilbert.reduced_density(s, spec.space)[0, 1])
               for s in exact.states[::cfg.sample_every]]
        metrics["meanExactCoherence"] = float(np.mean(coh))
        metrics["exactNormDrift"] = float(np.max(np.abs(exact.norm - 1.0)))
    summary = {
        "residuals": residuals,
        "nuC": selection.nu_c,
        "maxOffDiag": final.max_offdiag,
        "flags": {"offDiagonalFlagged": final.flagged, "phasesDistinct": spread.distinct,
                  "phasesStrong": spread.strong},
        "metrics": metrics,
    }
    headline = {"meanOffDiag": metrics["meanOffDiag"], "spreadRate": spread.spread_rate,
                "meanExactCoherence": metrics.get("meanExactCoherence", NAN),
                "actionResidual": residuals["action"], "firstLawResidual": residuals["firstLaw"]}
    return ScenarioResult(_rows(traj), summary, headline)


def _gaussian(x: np.ndarray, x0: float, p0: float, sigma: float, hbar: float) -> np.ndarray:
    f = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * p0 * x / hbar)
    return f / np.linalg.norm(f)


def run_grid2body(cfg: ScenarioConfig) -> ScenarioResult:
    n = max(cfg.n_a, cfg.n_b)
    origin = -cfg.spacing * (n - 1) / 2
    spec = build_grid_pair(
        cfg.n_a, cfg.n_b, cfg.mass_a, cfg.mass_b, cfg.q_product, cfg.softening, cfg.spacing,
        cfg.hbar, cfg.boundary, origin,
        potential_a=lambda x: 0.5 * cfg.mass_a * cfg.omega_a**2 * x**2,
        potential_b=lambda x: 0.5 * cfg.mass_b * cfg.omega_b**2 * x**2)
    if cfg.exact:
        hilbert.check_capacity(spec.space.dim, cfg.max_joint_dim)
    phi0 = _gaussian(spec.grid_a.x, cfg.x0_a, cfg.p0, cfg.sigma, cfg.hbar)
    psi0 = _gaussian(spec.grid_b.x, cfg.x0_b, -cfg.p0, cfg.sigma, cfg.hbar)
    traj = run_meanfield(spec, phi0, psi0, cfg.T, cfg.dt, record_states=True,
                         sample_every=cfg.sample_every)
    residuals, heat = _common_residuals(traj)
    residuals["newton"] = newton_residual(traj)
    metrics = {"heatOut": heat}
    if cfg.exact:
        exact = evolve(np.kron(phi0, psi0), spec.joint_operator(0.0, cfg.max_joint_dim), cfg.T,
                       PropagatorConfig(cfg.dt, cfg.method, hbar=cfg.hbar))
        final = MeanFieldState(traj.states[-1], traj.bath_states[-1])
        metrics["finalFidelity"] = meanfield_fidelity(exact.final_state(), final)
    summary = {"residuals": residuals, "nuC": None, "maxOffDiag": None, "flags": {},
               "metrics": metrics}
    headline = {"newtonResidual": residuals["newton"], "firstLawResidual": residuals["firstLaw"],
                "actionResidual": residuals["action"],
                "finalFidelity": metrics.get("finalFidelity", NAN)}
    return ScenarioResult(_rows(traj), summary, headline)


def classical_potential(cfg: ScenarioConfig):
    """(V, force) for the classical-limit presets."""
    m, w = cfg.mass, cfg.omega
    if cfg.potential == "harmonic":
        return (lambda q: 0.5 * m * w**2 * q**2), (lambda q: -m * w**2 * q)
    if cfg.potential == "linear":
        return (lambda q: cfg.force * q), (lambda q: -cfg.force + 0 * q)
    if cfg.potential == "quartic":
        return (lambda q: cfg.quartic * q**4), (lambda q: -4 * cfg.quartic * q**3)
    return (lambda q: 0 * q), (lambda q: 0 * q)


def run_classical_limit(cfg: ScenarioConfig) -> ScenarioResult:
    boundary = "periodic" if cfg.scheme == "spectral" else cfg.boundary
    grid = Grid.centered(cfg.n, cfg.length, boundary=boundary, scheme=cfg.scheme)
    potential, force = classical_potential(cfg)
    spec = build_grid_single(grid, cfg.mass, None if cfg.potential == "free" else potential, cfg.hbar)
    phi0 = _gaussian(grid.x, cfg.x0, cfg.p0, cfg.sigma, cfg.hbar)
    traj = run_meanfield(spec, phi0, np.ones(1), cfg.T, cfg.dt, record_states=True,
                         sample_every=cfg.sample_every)
    residuals, _ = _common_residuals(traj)
    residuals["newton"] = newton_residual(traj)
    quantum = ehrenfest_trajectory(traj)
    classical = classical_oracle(ClassicalState(traj.com[0], traj.momentum[0], cfg.mass),
                                 potential, cfg.T, cfg.dt, force=force)[::cfg.sample_every]
    qq = np.array([s.q[0] for s in quantum])
    pq = np.array([s.p[0] for s in quantum])
    qc = np.array([s.q[0] for s in classical])
    pc = np.array([s.p[0] for s in classical])
    scale = max(float(np.max(np.abs(qc))), float(np.max(np.abs(pc))), 1e-300)
    widths = np.array([s.width for s in quantum])
    residuals["ehrenfest"] = float(max(np.max(np.abs(qq - qc)), np.max(np.abs(pq - pc))) / scale)
    metrics = {"widthStart": float(widths[0]), "widthMax": float(widths.max()),
               "widthFinal": float(widths[-1])}
    summary = {"residuals": residuals, "nuC": None, "maxOffDiag": None,
               "flags": {"dispersionConstant": bool(np.ptp(widths) <= 0.05 * widths[0])},
               "metrics": metrics}
    headline = {"ehrenfestError": residuals["ehrenfest"], "newtonResidual": residuals["newton"],
                "widthMax": metrics["widthMax"]}
    return ScenarioResult(_rows(traj), summary, headline)


def run_branch_study(cfg: ScenarioConfig) -> ScenarioResult:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_branches
    disagreements = []
    for i in range(cfg.profiles):
        prof = oracles.random_smooth_profile(n, rng)
        ens = ensemble_from_phases(prof, hbar=1.0)
        w = np.abs(ens.alphas) ** 2
        ours = select_dominant(ens).nu_c
        ref = oracles.windowed_kernel_argmax(w, prof, 1.0, cfg.window) if n >= cfg.window else ours
        if ours != ref:
            disagreements.append({"profile": i, "selected": ours, "windowed": ref})
    agreement = 1 - len(disagreements) / cfg.profiles

    # dynamic part: pointer states with parabolic coupling strengths
    centre = (n - 1) / 2 + 0.3
    levels = cfg.level_scale * (np.arange(n) - centre) ** 2
    g = (np.asarray(cfg.couplings) * cfg.g_scale if cfg.couplings is not None
         else seeded_couplings(cfg.K, cfg.seed, cfg.g_scale))
    spec = build_pointer_model(levels, cfg.K, g, cfg.hbar, cfg.max_joint_dim)
    psi0 = bath_product_state([cfg.bath_theta] * cfg.K)
    phi0 = np.full(n, 1 / math.sqrt(n), dtype=complex)
    ens = init_branches(np.kron(phi0, psi0), spec.space, list(np.eye(n, dtype=complex)), psi0,
                        cfg.hbar, cfg.weight_mode, spec)
    rows = []

    def record(e):
        pw = partial_wave(e)
        sel = select_dominant(e)
        j = int(np.flatnonzero(e.nus == sel.nu_c)[0])
        kernel = abs(np.sum(np.abs(e.alphas) ** 2 * np.exp(1j * e.phases / e.hbar)))
        rows.append((e.t, pw.norm, float(e.rates[j]), float(e.phases[j]), NAN, NAN, kernel, NAN))

    record(ens)
    for _ in range(_steps(cfg) // cfg.sample_every):
        ens = evolve_branches(ens, spec, cfg.dt, cfg.sample_every)
        record(ens)
    selection = select_dominant(ens)
    spread = phase_spread(ens)
    overlaps = offdiagonal_overlaps(ens, cfg.overlap_threshold)
    summary = {
        "residuals": {},
        "nuC": selection.nu_c,
        "maxOffDiag": overlaps.max_offdiag,
        "flags": {"offDiagonalFlagged": overlaps.flagged, "phasesDistinct": spread.distinct,
                  "phasesStrong": spread.strong, "agreementAbove95": agreement >= 0.95},
        "metrics": {"agreementRate": agreement, "disagreements": disagreements,
                    "vertex": centre, "spreadRate": spread.spread_rate,
                    "phaseDensity": spread.density, "partialWaveNorm": rows[-1][1]},
    }
    headline = {"agreementRate": agreement, "nuC": selection.nu_c, "spreadRate": spread.spread_rate,
                "maxOffDiag": overlaps.max_offdiag}
    return ScenarioResult(rows, summary, headline)


def run_check(cfg: ScenarioConfig) -> ScenarioResult:
    reports = oracles.run_battery(cfg.filter or None, cfg.seed)
    summary = {"residuals": {r.name: r.max_abs_error for r in reports}, "nuC": None,
               "maxOffDiag": None, "flags": {"allPassed": all(r.passed for r in reports)},
               "metrics": {}, "oracles": [r.as_dict() for r in reports]}
    headline = {"failed": sum(not r.passed for r in reports)}
    return ScenarioResult([], summary, headline)


RUNNERS = {
    "dephasing": run_dephasing,
    "grid2body": run_grid2body,
    "classical-limit": run_classical_limit,
    "branch-study": run_branch_study,
    "check": run_check,
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    return RUNNERS[cfg.scenario](cfg)
