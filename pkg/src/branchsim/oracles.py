"""Slow, independent reference implementations.

Nothing in here calls the numerical kernels of the main modules; loops and
textbook formulas are used on purpose so the two code paths can disagree.
``run_battery`` is the only function that touches the main modules, to
compare them against these references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CapacityExceeded

ORACLE_MAX_DIM = 4096


@dataclass(frozen=True)
class OracleReport:
    name: str
    max_abs_error: float
    samples: int
    seed: int
    threshold: float

    def __post_init__(self):
        if not self.max_abs_error >= 0:
            raise ValueError("max_abs_error must be non-negative")

    @property
    def passed(self) -> bool:
        return self.max_abs_error < self.threshold

    def as_dict(self) -> dict:
        return {"name": self.name, "maxAbsError": self.max_abs_error, "samples": self.samples,
                "seed": self.seed, "threshold": self.threshold, "passed": self.passed}


def _to_array(h) -> np.ndarray:
    return np.asarray(h.toarray() if hasattr(h, "toarray") else h, dtype=complex)


def dense_propagate(phi0, h, t: float, hbar: float = 1.0, max_dim: int = ORACLE_MAX_DIM) -> np.ndarray:
    """exp(-i H t / hbar) phi0 through a full eigendecomposition."""
    phi0 = np.asarray(phi0, dtype=complex)
    if phi0.size > max_dim:
        raise CapacityExceeded(f"dense oracle limited to dim {max_dim}, got {phi0.size}")
    hm = _to_array(h)
    w, v = np.linalg.eigh(hm)
    coeffs = v.conj().T @ phi0
    return v @ (np.exp(-1j * w * t / hbar) * coeffs)


def _qubit_state(spec) -> np.ndarray:
    if np.ndim(spec) == 0:
        return np.array([math.cos(spec), math.sin(spec)], dtype=complex)
    v = np.asarray(spec, dtype=complex)
    return v / np.sqrt(sum(abs(c) ** 2 for c in v))


def dephasing_closed_form(couplings, bath, t: float, hbar: float = 1.0) -> complex:
    """prod_k <b_k| exp(+i g_k sz t/hbar) exp(+i g_k sz t/hbar) |b_k>.

    ``bath`` lists one qubit per coupling, either as a two-vector or as an
    angle theta meaning cos(theta)|0> + sin(theta)|1>.
    """
    if len(couplings) != len(bath):
        raise ValueError("one bath qubit per coupling")
    total = 1 + 0j
    for g, spec in zip(couplings, bath):
        b = _qubit_state(spec)
        u = np.array([[np.exp(1j * g * t / hbar), 0], [0, np.exp(-1j * g * t / hbar)]])
        m = u @ u
        total *= b.conj() @ (m @ b)
    return complex(total)


def windowed_kernel_argmax(weights, phases, hbar: float = 1.0, window: int = 5) -> int:
    """Centre of the full window with the largest |sum w exp(i Lambda/hbar)|; ties go low."""
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and at least 3")
    n = len(phases)
    if n < window:
        raise ValueError("fewer branches than the window width")
    half = window // 2
    best, best_val = None, -1.0
    for c in range(half, n - half):
        s = 0j
        for j in range(c - half, c + half + 1):
            s += weights[j] * complex(math.cos(phases[j] / hbar), math.sin(phases[j] / hbar))
        val = abs(s)
        if val > best_val + 1e-12 * max(1.0, best_val):
            best, best_val = c, val
    return best


def dirichlet_modulus(n: int, theta: float) -> float:
    """|sin(n theta/2) / (n sin(theta/2))|, the uniform linear-phase kernel."""
    if math.sin(theta / 2) == 0:
        return 1.0
    return abs(math.sin(n * theta / 2) / (n * math.sin(theta / 2)))


def direct_kernel(weights, phases, hbar: float = 1.0) -> complex:
    re = im = 0.0
    for w, lam in zip(weights, phases):
        re += w * math.cos(lam / hbar)
        im += w * math.sin(lam / hbar)
    return complex(re, im)


def kahan_overlap(a, b) -> complex:
    """sum conj(a_i) b_i, compensated, summed from the last element down."""
    re = im = 0.0
    c_re = c_im = 0.0
    for x, y in zip(reversed(list(a)), reversed(list(b))):
        term = complex(x).conjugate() * complex(y)
        yr = term.real - c_re
        tr = re + yr
        c_re = (tr - re) - yr
        re = tr
        yi = term.imag - c_im
        ti = im + yi
        c_im = (ti - im) - yi
        im = ti
    return complex(re, im)


def brute_contract(joint, dim_a: int, dim_b: int, psi) -> np.ndarray:
    out = np.zeros(dim_a, dtype=complex)
    for a in range(dim_a):
        for b in range(dim_b):
            out[a] += np.conj(psi[b]) * joint[a * dim_b + b]
    return out


def brute_partial_trace(joint, dim_a: int, dim_b: int) -> np.ndarray:
    rho = np.zeros((dim_a, dim_a), dtype=complex)
    for i in range(dim_a):
        for j in range(dim_a):
            for b in range(dim_b):
                rho[i, j] += joint[i * dim_b + b] * np.conj(joint[j * dim_b + b])
    return rho


def brute_product(a, b) -> np.ndarray:
    out = np.zeros(len(a) * len(b), dtype=complex)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i * len(b) + j] = x * y
    return out


def brute_joint_matrix(h_a, h_b, terms) -> np.ndarray:
    """Element-wise h_a (x) 1 + 1 (x) h_b + sum g A (x) B; terms are (A, B, g) triples."""
    ha, hb = _to_array(h_a), _to_array(h_b)
    da, db = ha.shape[0], hb.shape[0]
    parts = [(_to_array(a), _to_array(b), g) for a, b, g in terms]
    h = np.zeros((da * db, da * db), dtype=complex)
    for a in range(da):
        for b in range(db):
            for a2 in range(da):
                for b2 in range(db):
                    v = 0j
                    if b == b2:
                        v += ha[a, a2]
                    if a == a2:
                        v += hb[b, b2]
                    for pa, pb, g in parts:
                        v += g * pa[a, a2] * pb[b, b2]
                    h[a * db + b, a2 * db + b2] = v
    return h


def joint_expectation(h, joint) -> complex:
    hm = _to_array(h)
    return complex(np.conj(joint) @ (hm @ joint))


def random_smooth_profile(n: int, rng: np.random.Generator) -> np.ndarray:
    """Lambda_nu / hbar: a parabola with a non-integer vertex plus slow ripples.

    The curvature is kept small enough that neighbouring phases never differ
    by more than pi, so the lattice does not alias the profile.
    """
    nu = np.arange(n)
    vertex = rng.uniform(0.25 * n, 0.75 * n)
    reach = max(vertex, n - 1 - vertex)
    curvature = rng.uniform(0.2, 0.8) * math.pi / (2 * reach + 1)
    profile = curvature * (nu - vertex) ** 2
    for _ in range(2):
        k = rng.uniform(0.5, 2.0) * 2 * math.pi / n
        # ripple slope up to twice the curvature: can move the vertex by a site
        profile += rng.uniform(-1, 1) * curvature / k * np.sin(k * nu + rng.uniform(0, 2 * math.pi))
    return profile + rng.uniform(0, 2 * math.pi)


def leapfrog_harmonic_exact(q0: float, p0: float, mass: float, omega: float, t: float):
    """Closed-form harmonic orbit used to test the classical integrator."""
    q = q0 * math.cos(omega * t) + p0 / (mass * omega) * math.sin(omega * t)
    p = p0 * math.cos(omega * t) - mass * omega * q0 * math.sin(omega * t)
    return q, p


# -- battery ---------------------------------------------------------------

BATTERY: dict[str, Callable[[int], OracleReport]] = {}


def _check(name: str):
    def deco(fn):
        BATTERY[name] = fn
        return fn
    return deco


@_check("propagation")
def _propagation(seed: int) -> OracleReport:
    from .exactprop import PropagatorConfig, evolve
    from .hilbert import random_hermitian, random_state
    rng = np.random.default_rng(seed)
    worst, count = 0.0, 0
    for dim in (4, 8, 16, 32):
        h = random_hermitian(dim, rng)
        phi = random_state(dim, rng)
        traj = evolve(phi, h, 1.0, PropagatorConfig(0.01, method="krylov"))
        ref = dense_propagate(phi, h, 1.0)
        worst = max(worst, 1 - abs(np.vdot(ref, traj.final_state())) ** 2)
        count += 1
    return OracleReport("propagation", abs(worst), count, seed, 1e-9)


@_check("partial_trace")
def _partial_trace(seed: int) -> OracleReport:
    from .hilbert import BipartiteSpace, random_state, reduced_coherence
    rng = np.random.default_rng(seed)
    joint = random_state(16, rng)
    basis = list(np.eye(4))
    rho = reduced_coherence(joint, BipartiteSpace(4, 4), basis)
    err = np.max(np.abs(rho - brute_partial_trace(joint, 4, 4)))
    return OracleReport("partial_trace", float(err), 1, seed, 1e-12)


@_check("contraction")
def _contraction(seed: int) -> OracleReport:
    from .hilbert import BipartiteSpace, contract_b, random_state
    rng = np.random.default_rng(seed)
    joint, psi = random_state(16, rng), random_state(4, rng)
    err = np.max(np.abs(contract_b(joint, BipartiteSpace(4, 4), psi) - brute_contract(joint, 4, 4, psi)))
    return OracleReport("contraction", float(err), 1, seed, 1e-12)


@_check("overlap")
def _overlap(seed: int) -> OracleReport:
    from .hilbert import overlap, random_state
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        a, b = random_state(8, rng), random_state(8, rng)
        worst = max(worst, abs(overlap(a, b) - kahan_overlap(a, b)))
    return OracleReport("overlap", worst, 10, seed, 1e-12)


@_check("joint_assembly")
def _joint_assembly(seed: int) -> OracleReport:
    from .hamiltonian import build_grid_pair
    spec = build_grid_pair(8, 8, 1.0, 2.0, 0.7)
    terms = [(t.a, t.b, t.g) for t in spec.terms]
    ref = brute_joint_matrix(spec.h_a, spec.h_b, terms)
    err = np.max(np.abs(spec.joint_matrix() - ref))
    return OracleReport("joint_assembly", float(err), ref.size, seed, 1e-12)


@_check("dissipation_rate")
def _dissipation_rate(seed: int) -> OracleReport:
    from .hamiltonian import HamiltonianSpec, InteractionTerm
    from .hilbert import random_hermitian, random_state
    from .meanfield import MeanFieldState, dissipation_rate
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        terms = tuple(InteractionTerm(random_hermitian(3, rng), random_hermitian(4, rng), rng.normal())
                      for _ in range(3))
        spec = HamiltonianSpec(random_hermitian(3, rng), random_hermitian(4, rng), terms)
        phi, psi = random_state(3, rng), random_state(4, rng)
        lam = dissipation_rate(MeanFieldState(phi, psi), spec)
        h_int = brute_joint_matrix(np.zeros((3, 3)), np.zeros((4, 4)),
                                   [(t.a, t.b, t.g) for t in terms])
        ref = joint_expectation(h_int, brute_product(phi, psi)).real
        worst = max(worst, abs(lam - ref))
    return OracleReport("dissipation_rate", worst, 5, seed, 1e-10)


@_check("dephasing_overlap")
def _dephasing_overlap(seed: int) -> OracleReport:
    from .branches import evolve_branches, init_branches, offdiagonal_overlaps
    from .hamiltonian import bath_product_state, build_dephasing_model
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.5, 1.5, 3)
    thetas = [math.pi / 4] * 3
    spec = build_dephasing_model(3, g)
    psi0 = bath_product_state(thetas)
    joint = np.kron(np.array([1, 1]) / math.sqrt(2), psi0)
    ens = init_branches(joint, spec.space, list(np.eye(2)), psi0)
    worst = 0.0
    for _ in range(5):
        ens = evolve_branches(ens, spec, 1e-3, 200, workers=1)
        omega = offdiagonal_overlaps(ens).matrix[1, 0]
        worst = max(worst, abs(omega - dephasing_closed_form(g, thetas, ens.t)))
    return OracleReport("dephasing_overlap", worst, 5, seed, 1e-6)


@_check("interference_kernel")
def _kernel(seed: int) -> OracleReport:
    from .branches import interference_kernel
    worst, count = 0.0, 0
    for n in (8, 64):
        for theta in (0.1, 0.5, 1.0):
            k = interference_kernel(np.full(n, 1 / n), theta * np.arange(n))
            worst = max(worst, abs(abs(k) - dirichlet_modulus(n, theta)))
            count += 1
    return OracleReport("interference_kernel", worst, count, seed, 1e-12)


@_check("branch_selection")
def _selection(seed: int) -> OracleReport:
    from .branches import ensemble_from_phases, select_dominant
    rng = np.random.default_rng(seed)
    trials, misses = 100, 0
    for _ in range(trials):
        prof = random_smooth_profile(64, rng)
        ens = ensemble_from_phases(prof)
        w = np.abs(ens.alphas) ** 2
        if select_dominant(ens).nu_c != windowed_kernel_argmax(w, prof, 1.0, 5):
            misses += 1
    return OracleReport("branch_selection", misses / trials, trials, seed, 0.05 + 1e-12)


@_check("classical_orbit")
def _classical(seed: int) -> OracleReport:
    from .observables import ClassicalState, classical_oracle
    m, w = 1.0, 1.0
    steps = classical_oracle(ClassicalState(1.0, 0.0, m), lambda q: 0.5 * m * w**2 * q**2,
                             2 * math.pi, 2 * math.pi / 4000, force=lambda q: -m * w**2 * q)
    worst = 0.0
    for n in (1000, 2000, 4000):
        q, p = leapfrog_harmonic_exact(1.0, 0.0, m, w, n * 2 * math.pi / 4000)
        worst = max(worst, abs(steps[n].q[0] - q), abs(steps[n].p[0] - p))
    return OracleReport("classical_orbit", worst, 3, seed, 1e-5)


def run_battery(filter: str | None = None, seed: int = 1234) -> list[OracleReport]:
    """Run every registered comparison whose name contains ``filter``."""
    names = [n for n in BATTERY if filter is None or filter in n]
    if not names:
        raise KeyError(f"no oracle check matches {filter!r}")
    return [BATTERY[n](seed) for n in names]
