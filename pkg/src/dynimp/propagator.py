"""Time evolution through piecewise-constant noise segments."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._kernels import lanczos_expm_step
from .errors import ConfigError, KrylovConvergenceError
from .hamiltonian import SegmentHamiltonian, dense_matrix
from .noise import NoiseSchedule

log = logging.getLogger(__name__)

KINDS = ("krylov", "dense-exponential")
_MAX_HALVINGS = 12


@dataclass(frozen=True)
class PropagatorMethod:
    kind: str = "krylov"
    krylov_dim: int = 30
    substep: float = 0.5
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"propagator.kind must be one of {KINDS}, got {self.kind!r}")
        if self.krylov_dim < 4:
            raise ConfigError("propagator.krylov_dim must be >= 4")
        if not self.tolerance > 0:
            raise ConfigError("propagator.tolerance must be positive")
        if not self.substep > 0:
            raise ConfigError("propagator.substep must be positive")


@dataclass
class PropagationStats:
    """Running diagnostics; one instance per realization."""

    max_norm_defect: float = 0.0
    max_error_estimate: float = 0.0
    krylov_steps: int = 0
    matvecs: int = 0

    def merge(self, other: "PropagationStats") -> None:
        self.max_norm_defect = max(self.max_norm_defect, other.max_norm_defect)
        self.max_error_estimate = max(self.max_error_estimate, other.max_error_estimate)
        self.krylov_steps += other.krylov_steps
        self.matvecs += other.matvecs


@dataclass
class EvolutionResult:
    psi_final: np.ndarray
    fidelity_samples: list[tuple[float, float]] = field(default_factory=list)
    stats: PropagationStats = field(default_factory=PropagationStats)

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.fidelity_samples])

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([s[1] for s in self.fidelity_samples])


def _krylov(h: SegmentHamiltonian, dt: float, psi: np.ndarray, method: PropagatorMethod, stats):
    diag, masks, coups = h.kernel_args()
    n_sub = max(1, math.ceil(dt / method.substep - 1e-12))
    halvings = 0
    while True:
        step = dt / n_sub
        tol = method.tolerance / n_sub
        out = psi
        ok = True
        for _ in range(n_sub):
            out, err, size = lanczos_expm_step(diag, masks, coups, out, step, method.krylov_dim, tol)
            stats.krylov_steps += 1
            stats.matvecs += size
            if err >= tol:
                ok = False
                break
            stats.max_error_estimate = max(stats.max_error_estimate, err)
        if ok:
            return out
        if halvings == _MAX_HALVINGS:
            raise KrylovConvergenceError(
                f"Krylov step did not converge with dim {method.krylov_dim} at dt={step:.3g}", err
            )
        halvings += 1
        n_sub *= 2


def _dense(h: SegmentHamiltonian, dt: float, psi: np.ndarray) -> np.ndarray:
    lam, vecs = scipy.linalg.eigh(dense_matrix(h))
    return vecs @ (np.exp(-1j * lam * dt) * (vecs.T @ psi))


def evolve_segment(
    h: SegmentHamiltonian,
    dt: float,
    psi: np.ndarray,
    method: PropagatorMethod = PropagatorMethod(),
    stats: PropagationStats | None = None,
) -> np.ndarray:
    """Return exp(-i h dt) psi, renormalized; the norm defect is recorded in ``stats``."""
    if dt < 0:
        raise ConfigError(f"negative time step {dt}")
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if stats is None:
        stats = PropagationStats()
    if dt == 0:
        return psi.copy()
    if not np.any(h.couplings):
        # diagonal Hamiltonian: the exponential is an exact phase
        return np.exp(-1j * dt * h.diagonal) * psi
    if method.kind == "krylov":
        out = _krylov(h, dt, psi, method, stats)
    else:
        out = _dense(h, dt, psi)
    norm_in = np.linalg.norm(psi)
    norm_out = np.linalg.norm(out)
    defect = abs(norm_out - norm_in)
    if defect > stats.max_norm_defect:
        stats.max_norm_defect = defect
    if defect > method.tolerance:
        log.warning("segment norm defect %.3e exceeds tolerance %.1e", defect, method.tolerance)
    return out * (norm_in / norm_out)


def fidelity(psi0: np.ndarray, psi: np.ndarray) -> float:
    return float(abs(np.vdot(psi0, psi)) ** 2)


def evolve_piecewise(
    schedule: NoiseSchedule,
    hamiltonians: list[SegmentHamiltonian],
    psi0: np.ndarray,
    sample_times=(),
    method: PropagatorMethod = PropagatorMethod(),
) -> EvolutionResult:
    """Chain the segment unitaries, earliest first, sampling |<psi0|psi(t)>|^2.

    A segment is split whenever a sample time falls inside it; the segment
    Hamiltonian is unchanged across the split.
    """
    times = np.asarray(sample_times, dtype=float)
    if times.size and (np.any(np.diff(times) < 0) or times[0] < 0):
        raise ConfigError("sample times must be sorted and non-negative")
    if times.size and times[-1] > schedule.horizon * (1 + 1e-12) + 1e-12:
        raise ConfigError("sample times extend beyond the schedule horizon")
    if len(hamiltonians) != schedule.n_segments:
        raise ConfigError("one Hamiltonian per schedule segment required")

    stats = PropagationStats()
    result = EvolutionResult(psi0, [], stats)
    psi = np.ascontiguousarray(psi0, dtype=np.complex128)
    bounds = schedule.boundaries
    now = 0.0
    ti = 0
    for k, h in enumerate(hamiltonians):
        end = bounds[k + 1]
        last = k == len(hamiltonians) - 1
        while ti < times.size and (times[ti] <= end or last):
            target = min(times[ti], end) if not last else times[ti]
            psi = evolve_segment(h, max(target - now, 0.0), psi, method, stats)
            now = max(now, target)
            result.fidelity_samples.append((float(times[ti]), fidelity(psi0, psi)))
            ti += 1
        if end > now:
            psi = evolve_segment(h, end - now, psi, method, stats)
            now = end
    result.psi_final = psi
    return result
