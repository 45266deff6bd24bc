"""Piecewise-constant random fields delta_j(t), J_ij(t) redrawn every tau.

Random numbers come from counter-based Philox streams: the key is derived from
``(seed, realization_index)`` and the counter from ``(segment_index, field)``,
so any segment of any realization can be regenerated independently of
execution order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .lattice import LatticeGeometry, ModelParams

FIELD_ONSITE = 0
FIELD_COUPLING = 1

# relative slack when deciding whether horizon/tau is an integer
_SPLIT_RTOL = 1e-9


def split_horizon(horizon: float, tau: float) -> tuple[int, float]:
    """Write ``horizon = N * tau + remainder`` with integer N and 0 <= remainder < tau."""
    if tau <= 0:
        raise ConfigError(f"switching period must be positive, got {tau}")
    ratio = horizon / tau
    n_full = math.floor(ratio + _SPLIT_RTOL * max(1.0, ratio))
    remainder = horizon - n_full * tau
    if remainder <= _SPLIT_RTOL * tau:
        remainder = 0.0
    return n_full, remainder


def _stream_key(seed: int, realization_index: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(realization_index),))
    return ss.generate_state(2, dtype=np.uint64)


def uniform_stream(key: np.ndarray, segment: int, field: int, size: int) -> np.ndarray:
    """``size`` uniforms on [0, 1) from the stream addressed by (segment, field)."""
    counter = np.array([0, segment, field, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter)).random(size)


@dataclass(frozen=True)
class NoiseSchedule:
    tau: float
    horizon: float
    durations: np.ndarray  # (S,)
    onsite: np.ndarray  # (S, n), values in [-delta/2, delta/2]
    couplings: np.ndarray  # (S, n_links), values in [-J, J]
    seed: int
    realization_index: int

    @property
    def n_segments(self) -> int:
        return len(self.durations)

    @property
    def boundaries(self) -> np.ndarray:
        """Segment start times followed by the horizon."""
        return np.concatenate([[0.0], np.cumsum(self.durations)])


def sample_schedule(
    geom: LatticeGeometry,
    params: ModelParams,
    tau: float,
    horizon: float,
    seed: int,
    realization_index: int,
) -> NoiseSchedule:
    if horizon < 0:
        raise ConfigError(f"horizon must be non-negative, got {horizon}")
    n_full, remainder = split_horizon(horizon, tau)
    durations = [tau] * n_full + ([remainder] if remainder > 0 else [])
    if not durations:
        # zero horizon: keep one empty segment so the schedule is never degenerate
        durations = [0.0]
    n_seg = len(durations)
    n_links = len(geom.links)

    key = _stream_key(seed, realization_index)
    onsite = np.empty((n_seg, geom.n))
    couplings = np.empty((n_seg, n_links))
    for k in range(n_seg):
        onsite[k] = params.delta * (uniform_stream(key, k, FIELD_ONSITE, geom.n) - 0.5)
        couplings[k] = params.bigJ * (2.0 * uniform_stream(key, k, FIELD_COUPLING, n_links) - 1.0)

    assert np.all(np.abs(onsite) <= params.delta / 2)
    assert np.all(np.abs(couplings) <= params.bigJ)

    durations = np.asarray(durations, dtype=float)
    for arr in (durations, onsite, couplings):
        arr.setflags(write=False)
    return NoiseSchedule(tau, horizon, durations, onsite, couplings, int(seed), int(realization_index))


def static_schedule(geom, params, horizon, seed, realization_index) -> NoiseSchedule:
    """One draw held for the whole run (static imperfections)."""
    if horizon <= 0:
        return sample_schedule(geom, params, 1.0, 0.0, seed, realization_index)
    return sample_schedule(geom, params, horizon, horizon, seed, realization_index)
