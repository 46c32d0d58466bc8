"""One-dimensional lattices for single-particle wave functions.

Two derivative schemes are available.  ``fd`` uses the second-difference
Laplacian and the central-difference momentum (hard walls or periodic);
``spectral`` diagonalizes both in the Fourier basis and needs a periodic box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

BOUNDARIES = ("dirichlet", "periodic")
SCHEMES = ("fd", "spectral")


@dataclass(frozen=True)
class Grid:
    n: int
    spacing: float = 1.0
    origin: float = 0.0
    boundary: str = "dirichlet"
    scheme: str = "fd"

    def __post_init__(self):
        if self.n < 2:
            raise ShapeError("a grid needs at least two points")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "spectral" and self.boundary != "periodic":
            raise ValueError("the spectral scheme requires a periodic grid")

    @classmethod
    def centered(cls, n: int, length: float, **kw) -> "Grid":
        """Grid of ``n`` points covering ``[-length/2, length/2)``."""
        dx = length / n
        return cls(n=n, spacing=dx, origin=-length / 2, **kw)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    def kinetic(self, mass: float, hbar: float = 1.0) -> np.ndarray:
        """Dense kinetic-energy matrix -hbar^2/(2m) d^2/dx^2."""
        if self.scheme == "spectral":
            k = self.wavenumbers
            f = np.fft.fft(np.eye(self.n), axis=0)
            return (f.conj().T * (hbar**2 * k**2 / (2 * mass))) @ f / self.n
        c = hbar**2 / (2 * mass * self.spacing**2)
        t = np.diag(np.full(self.n, 2 * c)).astype(complex)
        i = np.arange(self.n - 1)
        t[i, i + 1] = t[i + 1, i] = -c
        if self.periodic:
            t[0, -1] = t[-1, 0] = -c
        return t

    def derivative(self, f: np.ndarray) -> np.ndarray:
        """First derivative; zero ghost points at hard walls."""
        f = np.asarray(f)
        if f.shape[-1] != self.n:
            raise ShapeError(f"expected {self.n} grid values, got {f.shape[-1]}")
        if self.scheme == "spectral":
            return np.fft.ifft(1j * self.wavenumbers * np.fft.fft(f))
        if self.periodic:
            return (np.roll(f, -1) - np.roll(f, 1)) / (2 * self.spacing)
        padded = np.concatenate([[0], f, [0]])
        return (padded[2:] - padded[:-2]) / (2 * self.spacing)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        """Centered gradient of a real potential sampled on the grid."""
        v = np.asarray(v, dtype=float)
        g = np.empty_like(v)
        g[1:-1] = (v[2:] - v[:-2]) / (2 * self.spacing)
        g[0] = (v[1] - v[0]) / self.spacing
        g[-1] = (v[-1] - v[-2]) / self.spacing
        return g

    def mean_force(self, phi: np.ndarray, v: np.ndarray) -> float:
        """Density-weighted potential gradient <|phi|^2, dV/dx> on the lattice.

        For ``fd`` the density lives on links, Re(phi_j* phi_{j+1}), and the
        gradient is the forward difference across the link; this is the
        combination the central-difference momentum obeys exactly.
        """
        v = np.real(np.asarray(v))
        if self.scheme == "spectral":
            return float(np.sum(np.abs(phi) ** 2 * self.gradient(v)))
        if self.periodic:
            link = np.real(np.conj(phi) * np.roll(phi, -1))
            dv = (np.roll(v, -1) - v) / self.spacing
        else:
            link = np.real(np.conj(phi[:-1]) * phi[1:])
            dv = np.diff(v) / self.spacing
        return float(np.sum(link * dv))
