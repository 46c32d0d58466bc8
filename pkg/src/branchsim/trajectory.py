"""Time series produced by the propagators and consumed by ``observables``."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ShapeError

_SERIES = ("norm", "dissipation", "accumulated", "momentum", "energy", "action_increments",
           "coherence", "com", "h_expect", "dvdt", "states", "bath_states", "bath_coeffs")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-sample observables of one run.

    ``dissipation`` holds the rate lambda(t), ``accumulated`` its time
    integral, ``energy`` the partial-system energy <phi|i hbar d/dt|phi>,
    ``h_expect`` the expectation of the partial-system Hamiltonian and
    ``dvdt`` the expectation of the potential's explicit time derivative.
    Optional series are None when a run does not produce them.
    """

    times: np.ndarray
    norm: np.ndarray
    dissipation: np.ndarray | None = None
    accumulated: np.ndarray | None = None
    momentum: np.ndarray | None = None
    energy: np.ndarray | None = None
    action_increments: np.ndarray | None = None
    coherence: np.ndarray | None = None
    com: np.ndarray | None = None
    h_expect: np.ndarray | None = None
    dvdt: np.ndarray | None = None
    states: np.ndarray | None = None
    bath_states: np.ndarray | None = None
    bath_coeffs: np.ndarray | None = None
    spec: object = None
    kind: str = "meanfield"

    def __post_init__(self):
        n = len(self.times)
        for name in _SERIES:
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise ShapeError(f"series {name!r} has {len(v)} samples, times has {n}")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def series(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name in _SERIES}
