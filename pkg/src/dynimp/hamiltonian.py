"""Matrix-free segment Hamiltonian

    H = sum_j (delta0 + d_j) sigma_z^(j) + sum_<ij> c_ij sigma_x^(i) sigma_x^(j)

in the computational basis, qubit j <-> bit j of the basis index (little-endian).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from ._kernels import apply_h_kernel
from .errors import CapabilityError, ConfigError
from .lattice import LatticeGeometry
from .noise import NoiseSchedule

DENSE_MAX_QUBITS = 12


@lru_cache(maxsize=32)
def spin_signs(n: int) -> np.ndarray:
    """(n, 2**n) table of s_j(b) = +1 if bit j of b is set else -1."""
    b = np.arange(1 << n)
    signs = np.array([2 * ((b >> j) & 1) - 1 for j in range(n)], dtype=np.float64).reshape(n, -1)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=32)
def _popcount(n: int) -> np.ndarray:
    b = np.arange(1 << n)
    out = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        out += (b >> j) & 1
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SegmentHamiltonian:
    geom: LatticeGeometry
    delta0: float
    onsite: np.ndarray  # d_j
    couplings: np.ndarray  # c_ij in link order

    def __post_init__(self):
        if np.shape(self.onsite) != (self.geom.n,):
            raise ConfigError("onsite field has wrong length")
        if np.shape(self.couplings) != (len(self.geom.links),):
            raise ConfigError("coupling field has wrong length")

    @property
    def dim(self) -> int:
        return 1 << self.geom.n

    @cached_property
    def diagonal(self) -> np.ndarray:
        fields = self.delta0 + np.asarray(self.onsite, dtype=float)
        return fields @ spin_signs(self.geom.n)

    @cached_property
    def _coups(self) -> np.ndarray:
        return np.ascontiguousarray(self.couplings, dtype=np.float64)

    def kernel_args(self):
        return self.diagonal, self.geom.link_masks, self._coups


def segment_hamiltonians(geom: LatticeGeometry, delta0: float, schedule: NoiseSchedule):
    return [
        SegmentHamiltonian(geom, delta0, schedule.onsite[k], schedule.couplings[k])
        for k in range(schedule.n_segments)
    ]


def apply_h(h: SegmentHamiltonian, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if psi.shape != (h.dim,):
        raise ConfigError(f"state has shape {psi.shape}, Hamiltonian acts on dimension {h.dim}")
    if out is None:
        out = np.empty_like(psi)
    diag, masks, coups = h.kernel_args()
    return apply_h_kernel(diag, masks, coups, psi, out)


def dense_matrix(h: SegmentHamiltonian, max_qubits: int = DENSE_MAX_QUBITS) -> np.ndarray:
    """Explicit real symmetric matrix of ``h``; a test oracle for small lattices."""
    n = h.geom.n
    if n > max_qubits:
        raise CapabilityError(f"dense matrix for n={n} exceeds the n <= {max_qubits} guard")
    dim = h.dim
    mat = np.diag(h.diagonal).astype(np.float64)
    idx = np.arange(dim)
    for mask, c in zip(h.geom.link_masks, h._coups):
        mat[idx ^ mask, idx] += c
    return mat


def h0_phase(geom: LatticeGeometry, delta0: float, t: float, psi: np.ndarray) -> np.ndarray:
    """Apply exp(-i H0 t) with H0 = delta0 sum_j sigma_z^(j)."""
    energies = delta0 * (2 * _popcount(geom.n) - geom.n)
    return np.exp(-1j * energies * t) * psi
