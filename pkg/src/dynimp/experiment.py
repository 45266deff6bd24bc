"""Sweep orchestration, output files and curve analysis."""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from . import __version__
from .analytics import predict, tau_p
from .config import ExperimentConfig, TheoremConfig, dump_config, dump_theorem_config
from .errors import ConfigError
from .noise import split_horizon
from .observables import ErrorCurve, aggregate, curve_to_csv, ensemble_error

ANALYTIC_COLUMNS = ("x", "E_predicted", "g_value", "regime", "source")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def analytic_overlay(cfg: ExperimentConfig) -> list[tuple]:
    """Rows ``(x, E_predicted, g_value, regime)`` for the configured sweep."""
    state = cfg.state
    n = cfg.rows * cfg.cols
    rows = []
    for x in cfg.sweep_values:
        if cfg.sweep_variable == "tau":
            t, tau, params = cfg.horizon, x, cfg.params
        elif cfg.sweep_variable == "time":
            t, params = x, cfg.params
            tau = cfg.tau if cfg.tau is not None else max(cfg.t_final, x)
        else:
            t, params = cfg.horizon, cfg.with_(delta=x).params
            tau = cfg.tau if cfg.tau is not None else cfg.horizon
        if t == 0:
            rows.append((x, 0.0, 0.0, "pre-kink"))
            continue
        pred = predict(t, tau, params, state.n_antiparallel, state.n_parallel, n, cfg.epsilon)
        rows.append((x, pred.E_predicted, pred.g_value, pred.regime))
    return rows


def analytic_csv(cfg: ExperimentConfig) -> str:
    lines = [f"# config_hash: {cfg.config_hash}", f"# sweep: {cfg.sweep_variable}", ",".join(ANALYTIC_COLUMNS)]
    for x, e, g, regime in analytic_overlay(cfg):
        lines.append(f"{_fmt(x)},{_fmt(e)},{_fmt(g)},{regime},analytic")
    return "\n".join(lines) + "\n"


def _versions() -> dict:
    import numba
    import scipy

    return {
        "dynimp": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


@dataclass
class RunOutput:
    curve: ErrorCurve
    curve_path: Path
    analytic_path: Path
    manifest_path: Path
    manifest: dict = field(default_factory=dict)


def run(cfg: ExperimentConfig, output_dir=None, workers: int | None = None) -> RunOutput:
    """Simulate the ensemble and write ``<name>.csv``, ``<name>.analytic.csv``, ``<name>.manifest.json``."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    curve = ensemble_error(cfg, workers)
    wall = time.perf_counter() - start

    curve_path = out / f"{cfg.name}.csv"
    analytic_path = out / f"{cfg.name}.analytic.csv"
    manifest_path = out / f"{cfg.name}.manifest.json"
    curve_path.write_text(curve_to_csv(curve))
    analytic_path.write_text(analytic_csv(cfg))
    manifest = {
        "config_hash": cfg.config_hash,
        "config": dump_config(cfg),
        "versions": _versions(),
        "wall_time_s": wall,
        "workers": workers or cfg.workers,
        "averaging_convention": cfg.convention,
        "seeds": {
            "base_seed": cfg.seed,
            "realization_indices": [0, cfg.realizations - 1],
            "rule": "row i, realization r uses noise streams keyed by (base_seed, r)",
        },
        "norm_defect": {
            "max": curve.meta["max_norm_defect"],
            "max_krylov_error_estimate": curve.meta["max_error_estimate"],
        },
        "floored_fidelities": curve.meta["floored"],
        "matvecs": curve.meta["matvecs"],
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return RunOutput(curve, curve_path, analytic_path, manifest_path, manifest)


# -- tau_c detection -------------------------------------------------------------

def effective_period(t: float, taus) -> np.ndarray:
    """(N tau^2 + dt^2) / t: the abscissa on which the linear-regime error is exactly linear.

    Equals tau whenever t / tau is an integer; it absorbs the partial last segment.
    """
    out = []
    for tau in np.atleast_1d(taus):
        n_full, rem = split_horizon(t, tau)
        out.append((n_full * tau**2 + rem**2) / t)
    return np.array(out)


@dataclass(frozen=True)
class TauCResult:
    tau_c: float | None  # None = deviation never reached on the grid
    tau_c_std: float
    analytic_slope: float
    fitted_slope: float
    threshold: float
    reference: str
    bootstrap_reached: float = 1.0  # fraction of bootstrap resamples that reached a crossing

    @property
    def reached(self) -> bool:
        return self.tau_c is not None

    def __str__(self):
        if not self.reached:
            return "not reached"
        return f"{self.tau_c:.6g} +- {self.tau_c_std:.2g}"


def _crossing(taus, dev, thr, tp, persistence):
    above = dev > thr
    for i in range(len(taus)):
        if taus[i] < tp or not above[i]:
            continue
        if not above[i:i + persistence].all():
            continue
        if i > 0 and taus[i - 1] >= tp and not above[i - 1]:
            d0, d1 = dev[i - 1] - thr, dev[i] - thr
            return taus[i - 1] + (taus[i] - taus[i - 1]) * (-d0) / (d1 - d0)
        return float(taus[i])
    return None


def detect_tau_c(curve: ErrorCurve, epsilon: float | None = None, *, reference: str = "analytic",
                 window_factor: float = 4.0, persistence: int = 2, bootstrap: int = 200,
                 seed: int = 0) -> TauCResult:
    """Smallest tau at which the error falls below the linear regime by ``epsilon`` of the plot range.

    The linear regime is E = 4 J^2 sigma^2 n_ud (N tau^2 + dt^2); the plot range is
    4 J^2 sigma^2 n_ud t^2.  ``reference='fit'`` replaces the analytic slope by a
    least-squares slope on tau in [tau_p, window_factor * tau_p].  The crossing is
    linearly interpolated between grid points and must persist for ``persistence``
    points.  With per-realization samples available, the uncertainty is a
    bootstrap over realizations.
    """
    if curve.sweep_variable != "tau":
        raise ConfigError("tau_c detection needs a curve swept over tau")
    meta = curve.meta
    try:
        t, J, n_ud = float(meta["horizon"]), float(meta["J"]), float(meta["n_ud"])
    except KeyError as exc:
        raise ConfigError(f"curve metadata lacks {exc}") from exc
    sigma2 = float(meta.get("sigma2", 1.0 / 12.0))
    delta0 = float(meta.get("delta0", 1.0))
    eps = float(meta.get("epsilon", 1.0 / 40.0)) if epsilon is None else epsilon

    order = np.argsort(curve.x)
    taus = np.asarray(curve.x, dtype=float)[order]
    xe = effective_period(t, taus)
    tp = tau_p(delta0)
    unit = 4.0 * J**2 * sigma2 * n_ud
    analytic = unit * t
    window = (taus >= tp) & (taus <= window_factor * tp)

    def slope_of(E):
        if window.sum() < 2:
            return math.nan
        return float(np.sum(xe[window] * E[window]) / np.sum(xe[window] ** 2))

    E = np.asarray(curve.E_mean, dtype=float)[order]
    fitted = slope_of(E)
    if reference == "analytic":
        slope = analytic
    elif reference == "fit":
        if not np.isfinite(fitted):
            raise ConfigError("fewer than two grid points inside the fit window")
        slope = fitted
    else:
        raise ConfigError(f"unknown reference {reference!r}")
    thr = eps * unit * t**2
    tc = _crossing(taus, slope * xe - E, thr, tp, persistence)

    std, reached_frac = 0.0, 1.0
    if curve.samples is not None and bootstrap > 0 and curve.samples.shape[1] > 1:
        samples = curve.samples[order]
        R = samples.shape[1]
        rng = np.random.default_rng(seed)
        found = []
        for _ in range(bootstrap):
            pick = rng.integers(0, R, R)
            Eb, _ = aggregate(np.exp(-samples[:, pick]), curve.convention)
            sb = slope if reference == "analytic" else slope_of(Eb)
            c = _crossing(taus, sb * xe - Eb, thr, tp, persistence)
            if c is not None:
                found.append(c)
        reached_frac = len(found) / bootstrap
        if len(found) > 1:
            std = float(np.std(found, ddof=1))
    return TauCResult(None if tc is None else float(tc), std, analytic, fitted, thr, reference, reached_frac)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    slope_stderr: float
    deltas: tuple[float, ...]
    tau_cs: tuple[float, ...]
    sizes: tuple[int, ...] = ()
    by_size: dict = field(default_factory=dict)  # n -> slope fitted on that lattice alone


def fit_tau_c_scaling(deltas, tau_cs, sizes=()) -> ScalingFit:
    """Least-squares exponent of tau_c vs delta on log-log axes (all points jointly)."""
    d = np.asarray(deltas, dtype=float)
    tc = np.asarray(tau_cs, dtype=float)
    if len(set(d.tolist())) < 2 or np.any(~np.isfinite(tc)):
        raise ConfigError("need finite tau_c values at two or more delta values")
    fit = sstats.linregress(np.log(d), np.log(tc))
    by_size = {}
    for n in sorted(set(sizes)):
        sel = np.array([s == n for s in sizes])
        if len(set(d[sel].tolist())) >= 2:
            by_size[n] = float(sstats.linregress(np.log(d[sel]), np.log(tc[sel])).slope)
    return ScalingFit(float(fit.slope), float(fit.stderr), tuple(d), tuple(tc), tuple(sizes), by_size)


def reproduce_fig3_inset(configs, epsilon: float | None = None, workers: int | None = None,
                         curves=None) -> ScalingFit:
    """Detect tau_c for each config and fit tau_c ~ delta^slope.

    Configs may mix lattice sizes; the returned slope is the joint fit and
    ``by_size`` holds the per-size slopes.  ``curves`` may supply already
    simulated curves in the same order as ``configs``.
    """
    configs = list(configs)
    deltas, tcs, sizes = [], [], []
    for i, cfg in enumerate(configs):
        curve = curves[i] if curves is not None else ensemble_error(cfg, workers)
        res = detect_tau_c(curve, cfg.epsilon if epsilon is None else epsilon, bootstrap=0)
        if not res.reached:
            raise ConfigError(f"tau_c not reached for {cfg.name} (delta={cfg.delta})")
        deltas.append(cfg.delta)
        tcs.append(res.tau_c)
        sizes.append(cfg.rows * cfg.cols)
    return fit_tau_c_scaling(deltas, tcs, sizes)


def kink_slope_ratio(curve: ErrorCurve, below: float = 0.5, band=(1.5, 4.0)) -> float:
    """Slope of E vs tau for tau <= ``below`` over the slope inside ``band`` (affine fits)."""
    x = np.asarray(curve.x, dtype=float)
    E = np.asarray(curve.E_mean, dtype=float)
    lo = x <= below
    hi = (x >= band[0]) & (x <= band[1])
    if lo.sum() < 2 or hi.sum() < 2:
        raise ConfigError("not enough grid points on one side of the kink")
    return float(sstats.linregress(x[lo], E[lo]).slope / sstats.linregress(x[hi], E[hi]).slope)


# -- theorem scans ----------------------------------------------------------------

THEOREM_COLUMNS = ("tau", "N", "median_dev", "P_hat", "CI_lo", "CI_hi")


@dataclass
class TheoremOutput:
    report: object
    csv_path: Path
    summary_path: Path
    summary: dict = field(default_factory=dict)


def run_theorem(cfg: TheoremConfig, output_dir=None) -> TheoremOutput:
    """Convergence scan (and optional surrogate comparison) with CSV and JSON summary."""
    from .theorem import convergence_scan, gaussian_surrogate

    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    instance = cfg.build_instance()
    report = convergence_scan(instance, cfg.trials, cfg.epsilon, cfg.seed)
    surrogate = []
    if cfg.surrogate_trials:
        for n in (min(cfg.steps), max(cfg.steps)):
            cmp = gaussian_surrogate(instance, cfg.t / n, cfg.surrogate_trials, seed=cfg.seed + 1)
            surrogate.append({"N": n, "ks_element": cmp.ks_element, "ks_fidelity": cmp.ks_fidelity})
    wall = time.perf_counter() - start

    lines = [f"# config_hash: {cfg.config_hash}", f"# instance: {instance.label}", ",".join(THEOREM_COLUMNS)]
    for tau, n, med, p, lo, hi in report.rows():
        lines.append(",".join([_fmt(tau), str(n), _fmt(med), _fmt(p), _fmt(lo), _fmt(hi)]))
    csv_path = out / f"{cfg.name}.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    summary = {
        "config_hash": cfg.config_hash,
        "config": dump_theorem_config(cfg),
        "versions": _versions(),
        "wall_time_s": wall,
        "instance": instance.label,
        "exponent": report.exponent,
        "exponent_stderr": report.exponent_stderr,
        "p_hat_non_increasing_within_ci": report.monotone_within_ci(),
        "surrogate": surrogate,
    }
    summary_path = out / f"{cfg.name}.summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return TheoremOutput(report, csv_path, summary_path, summary)
