"""Presets and small utilities shared by the test modules."""

import math

import numpy as np

from branchsim.hamiltonian import bath_product_state, build_dephasing_model, linear_ramp
from branchsim.hilbert import SIGMA_X, SIGMA_Z

# filled by the acceptance tests, printed by conftest at the end of the session
ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, passed, detail)


def qubit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)], dtype=complex)


def dephasing_preset(bath_fields=(0.2, 0.1), system_field=0.2):
    """Two bath qubits, transverse fields on system and bath, tilted initial states."""
    spec = build_dephasing_model(2, [0.5, 0.4], system_field * SIGMA_X,
                                 bath_fields=list(bath_fields) if bath_fields else None)
    return spec, qubit(0.3), bath_product_state([0.3, 0.2])


def driven_preset():
    """Two-level system under a linear sigma_z ramp, coupled to one bath qubit."""
    spec = build_dephasing_model(1, [0.5], 0.5 * SIGMA_X, bath_fields=[0.2],
                                 drive=linear_ramp(SIGMA_Z, 0.4))
    return spec, qubit(0.0), bath_product_state([0.3])


def gaussian(x, x0, p0, sigma, hbar=1.0):
    f = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * p0 * x / hbar)
    return f / np.linalg.norm(f)


def fidelity(a, b) -> float:
    return float(abs(np.vdot(a, b)) ** 2)
