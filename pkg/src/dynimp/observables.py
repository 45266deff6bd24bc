"""Fidelity, error and Monte Carlo ensembles over noise realizations."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .config import ExperimentConfig
from .errors import ConfigError, FitError, NumericalError
from .hamiltonian import segment_hamiltonians
from .lattice import initial_state_vector
from .noise import sample_schedule, static_schedule
from .propagator import PropagationStats, evolve_piecewise

log = logging.getLogger(__name__)

FIDELITY_FLOOR = 1e-300
_F_SLACK = 1e-10


def error_of_fidelity(F: float) -> float:
    """E = -ln F, with F floored at 1e-300."""
    if not F > 0:
        raise ValueError(f"fidelity must be positive, got {F}")
    if F > 1 + _F_SLACK:
        raise ValueError(f"fidelity {F} exceeds 1")
    return -math.log(min(max(F, FIDELITY_FLOOR), 1.0))


def errors_of_fidelities(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized error; returns ``(E, floored_mask)``.  Exact zeros are floored, not fatal."""
    F = np.asarray(F, dtype=float)
    if np.any(F < 0) or np.any(F > 1 + _F_SLACK):
        raise NumericalError("fidelity outside [0, 1]")
    floored = F < FIDELITY_FLOOR
    return -np.log(np.clip(F, FIDELITY_FLOOR, 1.0)), floored


@dataclass
class ErrorCurve:
    sweep_variable: str
    x: np.ndarray
    E_mean: np.ndarray
    E_stderr: np.ndarray
    R: int
    convention: str = "mean-error"
    meta: dict = field(default_factory=dict)
    # per-realization errors, shape (len(x), R); kept in memory only
    samples: np.ndarray | None = None

    @property
    def points(self):
        return [(float(a), float(b), float(c), self.R) for a, b, c in zip(self.x, self.E_mean, self.E_stderr)]

    def subset(self, mask) -> "ErrorCurve":
        mask = np.asarray(mask)
        return ErrorCurve(self.sweep_variable, self.x[mask], self.E_mean[mask], self.E_stderr[mask],
                          self.R, self.convention, dict(self.meta),
                          None if self.samples is None else self.samples[mask])


def aggregate(fidelities: np.ndarray, convention: str) -> tuple[np.ndarray, np.ndarray]:
    """Reduce an (points, R) fidelity table in realization order."""
    R = fidelities.shape[1]
    if convention == "mean-error":
        E, _ = errors_of_fidelities(fidelities)
        mean = E.mean(axis=1)
        err = E.std(axis=1, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mean)
    elif convention == "log-mean-fidelity":
        Fm = fidelities.mean(axis=1)
        mean, _ = errors_of_fidelities(Fm)
        err = (fidelities.std(axis=1, ddof=1) / math.sqrt(R) / Fm) if R > 1 else np.zeros_like(mean)
    else:
        raise ConfigError(f"unknown averaging convention {convention!r}")
    return np.maximum(mean, 0.0), err


def _schedule(cfg: ExperimentConfig, params, tau, horizon, r):
    geom = cfg.geometry
    if tau is None or tau >= horizon:
        return static_schedule(geom, params, horizon, cfg.seed, r)
    return sample_schedule(geom, params, tau, horizon, cfg.seed, r)


def run_realization(cfg: ExperimentConfig, point: int | None, r: int):
    """Fidelities of realization ``r`` at one sweep point (or all times for a time sweep)."""
    geom = cfg.geometry
    psi0 = initial_state_vector(geom, cfg.state)
    params = cfg.params
    if cfg.sweep_variable == "time":
        times = list(cfg.sweep_values)
        horizon, tau = max(times), cfg.tau
    else:
        x = cfg.sweep_values[point]
        horizon, times = cfg.horizon, [cfg.horizon]
        if cfg.sweep_variable == "tau":
            tau = x
        else:
            tau = cfg.tau
            params = cfg.with_(delta=x).params
    sched = _schedule(cfg, params, tau, horizon, r)
    hams = segment_hamiltonians(geom, params.delta0, sched)
    res = evolve_piecewise(sched, hams, psi0, times, cfg.propagator)
    return res.fidelities, res.stats


def _tasks(cfg: ExperimentConfig):
    points = [None] if cfg.sweep_variable == "time" else range(len(cfg.sweep_values))
    return [(p, r) for p in points for r in range(cfg.realizations)]


def _run_chunk(cfg: ExperimentConfig, tasks):
    out = []
    for p, r in tasks:
        try:
            F, st = run_realization(cfg, p, r)
        except NumericalError as exc:
            where = "time sweep" if p is None else f"{cfg.sweep_variable}={cfg.sweep_values[p]!r}"
            raise NumericalError(f"realization {r} at {where} failed: {exc}") from exc
        out.append((p, r, F, st))
    return out


def ensemble_error(cfg: ExperimentConfig, workers: int | None = None) -> ErrorCurve:
    """Average E over ``cfg.realizations`` noise realizations at every sweep point.

    Realization r always uses the noise streams of ``(cfg.seed, r)``, so the
    result is independent of ``workers``.
    """
    workers = cfg.workers if workers is None else workers
    tasks = _tasks(cfg)
    if workers > 1 and len(tasks) > 1:
        chunks = [tasks[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [item for part in pool.map(_run_chunk, [cfg] * len(chunks), chunks) for item in part]
    else:
        results = _run_chunk(cfg, tasks)

    n_points = len(cfg.sweep_values)
    R = cfg.realizations
    table = np.empty((n_points, R))
    stats = PropagationStats()
    for p, r, F, st in results:
        if p is None:
            table[:, r] = F
        else:
            table[p, r] = F[-1]
        stats.merge(st)

    E_all, floored = errors_of_fidelities(table)
    if floored.any():
        log.warning("%d fidelities floored at %g", int(floored.sum()), FIDELITY_FLOOR)
    mean, err = aggregate(table, cfg.convention)
    state = cfg.state
    meta = {
        "config_hash": cfg.config_hash,
        "name": cfg.name,
        "horizon": cfg.t_final,
        "tau": cfg.tau,
        "delta": cfg.delta,
        "J": cfg.bigJ,
        "delta0": cfg.delta0,
        "sigma2": cfg.params.sigma2,
        "n_qubits": cfg.rows * cfg.cols,
        "bits": cfg.bits,
        "n_ud": state.n_antiparallel,
        "n_uu": state.n_parallel,
        "seed": cfg.seed,
        "epsilon": cfg.epsilon,
        "floored": int(floored.sum()),
        "max_norm_defect": float(stats.max_norm_defect),
        "max_error_estimate": float(stats.max_error_estimate),
        "matvecs": int(stats.matvecs),
    }
    return ErrorCurve(cfg.sweep_variable, np.asarray(cfg.sweep_values, dtype=float), mean, err, R,
                      cfg.convention, meta, E_all)


CSV_COLUMNS = ("x", "E_mean", "E_stderr", "R", "convention")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def curve_to_csv(curve: ErrorCurve) -> str:
    lines = [
        f"# config_hash: {curve.meta.get('config_hash', '')}",
        f"# sweep: {curve.sweep_variable}",
        "# meta: " + json.dumps({k: v for k, v in curve.meta.items() if k != "config_hash"}, sort_keys=True),
        ",".join(CSV_COLUMNS),
    ]
    for x, m, s in zip(curve.x, curve.E_mean, curve.E_stderr):
        lines.append(f"{_fmt(x)},{_fmt(m)},{_fmt(s)},{curve.R},{curve.convention}")
    return "\n".join(lines) + "\n"


def curve_from_csv(text: str) -> ErrorCurve:
    meta: dict = {}
    sweep = "tau"
    rows = []
    header_seen = False
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config_hash:"):
                meta["config_hash"] = body.split(":", 1)[1].strip()
            elif body.startswith("sweep:"):
                sweep = body.split(":", 1)[1].strip()
            elif body.startswith("meta:"):
                meta.update(json.loads(body.split(":", 1)[1]))
            continue
        if not line.strip():
            continue
        if not header_seen:
            if tuple(c.strip() for c in line.split(",")) != CSV_COLUMNS:
                raise ConfigError(f"unexpected CSV header {line!r}")
            header_seen = True
            continue
        rows.append(line.split(","))
    if not rows:
        raise ConfigError("CSV has no data rows")
    x = np.array([float(r[0]) for r in rows])
    m = np.array([float(r[1]) for r in rows])
    s = np.array([float(r[2]) for r in rows])
    return ErrorCurve(sweep, x, m, s, int(rows[0][3]), rows[0][4].strip(), meta)


@dataclass(frozen=True)
class DecayFit:
    shape: str  # "exponential" | "gaussian"
    rate: float
    goodness: dict  # shape -> coefficient of determination
    n_points: int


def fit_decay(curve: ErrorCurve, window=(0.05, 2.0), min_points: int = 8) -> DecayFit:
    """Classify E(t) as exponential (E linear in t) or gaussian (E linear in t^2).

    Both candidates are affine least-squares fits on the points whose E lies
    inside ``window``; the one with the larger R^2 wins.  Rates: F = exp(-rate t)
    or F = exp(-(rate t)^2).
    """
    t = np.asarray(curve.x, dtype=float)
    E = np.asarray(curve.E_mean, dtype=float)
    sel = (E >= window[0]) & (E <= window[1])
    if sel.sum() < min_points:
        raise FitError(f"only {int(sel.sum())} points inside fit window {window}; need {min_points}")
    t, E = t[sel], E[sel]
    lin = sstats.linregress(t, E)
    quad = sstats.linregress(t**2, E)
    goodness = {"exponential": lin.rvalue**2, "gaussian": quad.rvalue**2}
    shape = max(goodness, key=goodness.get)
    slope = lin.slope if shape == "exponential" else quad.slope
    if not slope > 0:
        raise FitError(f"non-positive {shape} slope {slope}")
    rate = slope if shape == "exponential" else math.sqrt(slope)
    return DecayFit(shape, float(rate), goodness, int(sel.sum()))
