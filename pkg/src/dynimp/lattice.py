"""Qubit lattice, link census and product initial states."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError

MAX_QUBITS = 24
SIGMA2 = 1.0 / 12.0

# 2x5 zero-magnetization state with (n_antiparallel, n_parallel) = (8, 5)
WITNESS_2X5_8_5 = "1110001010"
NEEL_2X5 = "1010101010"


@dataclass(frozen=True)
class LatticeGeometry:
    rows: int
    cols: int
    links: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @cached_property
    def link_masks(self) -> np.ndarray:
        """Basis-index XOR mask flipping both endpoints of each link."""
        return np.array([(1 << i) | (1 << j) for i, j in self.links], dtype=np.int64)

    def degree(self, site: int) -> int:
        return sum(site in link for link in self.links)


def build_lattice(rows: int, cols: int, max_qubits: int = MAX_QUBITS) -> LatticeGeometry:
    """Rectangular grid with free boundaries.

    Sites are numbered row-major.  Links are emitted site by site in that
    order, the horizontal link (to the right) before the vertical one (below).
    """
    if rows < 1 or cols < 1:
        raise ConfigError(f"lattice dimensions must be positive, got {rows}x{cols}")
    if rows * cols > max_qubits:
        raise ConfigError(f"{rows}x{cols} = {rows * cols} qubits exceeds cap {max_qubits}")
    links = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                links.append((s, s + 1))
            if r + 1 < rows:
                links.append((s, s + cols))
    return LatticeGeometry(rows, cols, tuple(links))


@dataclass(frozen=True)
class ModelParams:
    """Global couplings of the noisy lattice Hamiltonian (energies in units of delta0)."""

    delta: float
    bigJ: float
    delta0: float = 1.0
    warn_fraction: float = 0.5
    sigma2: float = field(default=SIGMA2, init=False)

    def __post_init__(self):
        if self.delta < 0 or self.bigJ < 0:
            raise ConfigError("delta and J must be non-negative")
        if self.delta0 <= 0:
            raise ConfigError("delta0 must be positive")
        limit = self.warn_fraction * self.delta0
        if self.delta > limit or self.bigJ > limit:
            warnings.warn(
                f"weak-imperfection assumption violated: delta={self.delta}, J={self.bigJ}, "
                f"delta0={self.delta0}",
                stacklevel=2,
            )

    @property
    def coupling_variance(self) -> float:
        """Variance of a single J_ij draw, 4 J^2 sigma^2."""
        return 4.0 * self.bigJ**2 * self.sigma2


def _parse_bits(bits) -> tuple[int, ...]:
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise ConfigError(f"bitstring must be non-empty 0/1 text, got {bits!r}")
        return tuple(int(ch) for ch in bits)
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ConfigError("bits must be 0 or 1")
    return out


def link_census(geom: LatticeGeometry, bits) -> tuple[int, int]:
    """Return ``(n_antiparallel, n_parallel)`` for the product state ``bits``."""
    b = _parse_bits(bits)
    if len(b) != geom.n:
        raise ConfigError(f"bitstring has length {len(b)}, lattice has {geom.n} sites")
    n_ud = sum(b[i] != b[j] for i, j in geom.links)
    return n_ud, len(geom.links) - n_ud


@dataclass(frozen=True)
class ProductState:
    """A computational-basis state; character j of ``bits`` is qubit j (1 = up)."""

    bits: str
    n_up: int
    n_antiparallel: int
    n_parallel: int

    @property
    def index(self) -> int:
        return sum(int(ch) << j for j, ch in enumerate(self.bits))

    @property
    def census(self) -> tuple[int, int]:
        return self.n_antiparallel, self.n_parallel


def product_state(geom: LatticeGeometry, bits, central_band: bool = True) -> ProductState:
    b = _parse_bits(bits)
    n_ud, n_uu = link_census(geom, b)
    n_up = sum(b)
    if central_band and 2 * n_up != geom.n:
        raise ConfigError(
            f"state {''.join(map(str, b))} has {n_up} up spins; central band needs {geom.n / 2}"
        )
    return ProductState("".join(map(str, b)), n_up, n_ud, n_uu)


def neel_bits(geom: LatticeGeometry) -> str:
    return "".join(str((r + c + 1) % 2) for r in range(geom.rows) for c in range(geom.cols))


def initial_state_vector(geom: LatticeGeometry, state: ProductState) -> np.ndarray:
    if len(state.bits) != geom.n:
        raise ConfigError("state does not match lattice size")
    psi = np.zeros(1 << geom.n, dtype=np.complex128)
    psi[state.index] = 1.0
    return psi
