"""Experiment configuration: INI-style text with one section per subsystem.

Parsing rules
-------------
* Standard ``configparser`` syntax; keys are case-insensitive, ``#`` and ``;``
  start comments.
* Numbers are Python float literals or exact fractions such as ``1/40``.
* Lists are comma separated.  A sweep grid may instead be given as
  ``grid = log <start> <stop> <count>``, ``grid = linear <start> <stop> <count>``,
  ``grid = mixed <start> <stop> <count>`` (union of a log grid from start and a
  linear grid from 0, half the points each, sorted and deduplicated) or
  ``grid = divisors <horizon> <n_min> <n_max>`` (tau = horizon / N for
  N = n_max .. n_min, so that horizon / tau is an integer).
* ``tau = static`` means one noise draw for the whole run.

Example::

    [experiment]
    name = fig2-fgr
    [lattice]
    rows = 2
    cols = 5
    bits = 1110001010
    [model]
    delta = 0.3
    J = 0.005
    [noise]
    seed = 7
    realizations = 50
    [sweep]
    variable = tau
    grid = log 0.1 50 40
    horizon = 25
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .lattice import MAX_QUBITS, ModelParams, build_lattice, product_state
from .propagator import PropagatorMethod

SWEEP_VARIABLES = ("time", "tau", "delta")
CONVENTIONS = ("mean-error", "log-mean-fidelity")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    rows: int = 2
    cols: int = 5
    bits: str = "1110001010"
    central_band: bool = True
    delta0: float = 1.0
    delta: float = 0.3
    bigJ: float = 5e-3
    seed: int = 1
    realizations: int = 50
    tau: float | None = None  # fixed period for time/delta sweeps; None = static
    sweep_variable: str = "tau"
    sweep_values: tuple[float, ...] = ()
    horizon: float = 25.0
    propagator: PropagatorMethod = field(default_factory=PropagatorMethod)
    convention: str = "mean-error"
    epsilon: float = 1.0 / 40.0
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        problems = []
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols > MAX_QUBITS:
            problems.append(f"lattice: invalid geometry {self.rows}x{self.cols}")
        if len(self.bits) != self.rows * self.cols:
            problems.append(f"lattice.bits: length {len(self.bits)} != {self.rows * self.cols}")
        if self.delta < 0:
            problems.append("model.delta: must be >= 0")
        if self.bigJ < 0:
            problems.append("model.J: must be >= 0")
        if self.delta0 <= 0:
            problems.append("model.delta0: must be > 0")
        if self.realizations < 1:
            problems.append("noise.realizations: must be >= 1")
        if self.tau is not None and self.tau <= 0:
            problems.append("noise.tau: must be positive or 'static'")
        if self.sweep_variable not in SWEEP_VARIABLES:
            problems.append(f"sweep.variable: must be one of {SWEEP_VARIABLES}")
        if not self.sweep_values:
            problems.append("sweep: empty grid")
        elif any(v < 0 for v in self.sweep_values):
            problems.append("sweep: negative grid value")
        elif self.sweep_variable == "tau" and min(self.sweep_values) <= 0:
            problems.append("sweep: tau values must be positive")
        elif self.sweep_variable == "time" and list(self.sweep_values) != sorted(self.sweep_values):
            problems.append("sweep: time grid must be sorted")
        if self.horizon < 0:
            problems.append("sweep.horizon: must be >= 0")
        if self.convention not in CONVENTIONS:
            problems.append(f"observables.convention: must be one of {CONVENTIONS}")
        if not self.epsilon > 0:
            problems.append("analysis.epsilon: must be positive")
        if self.workers < 1:
            problems.append("run.workers: must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def geometry(self):
        return build_lattice(self.rows, self.cols)

    @property
    def state(self):
        return product_state(self.geometry, self.bits, self.central_band)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.delta, self.bigJ, self.delta0)

    @property
    def t_final(self) -> float:
        if self.sweep_variable == "time":
            return max(self.sweep_values)
        return self.horizon

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def physics_dict(self) -> dict:
        """Everything that determines the numbers (excludes workers/output_dir)."""
        d = dataclasses.asdict(self)
        d.pop("workers")
        d.pop("output_dir")
        d["sweep_values"] = list(self.sweep_values)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.physics_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_number(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def mixed_grid(start: float, stop: float, count: int) -> tuple[float, ...]:
    """Log-spaced points resolve early times, linear ones the tail."""
    if not 0 < start < stop or count < 2:
        raise ConfigError("mixed grid needs 0 < start < stop and count >= 2")
    n_log = count // 2
    pts = np.concatenate([np.geomspace(start, stop, n_log), np.linspace(0.0, stop, count - n_log + 1)[1:]])
    return tuple(float(v) for v in np.unique(pts))


def parse_grid(spec: str) -> tuple[float, ...]:
    parts = spec.split()
    if not parts:
        return ()
    kind, args = parts[0].lower(), parts[1:]
    if kind in ("log", "linear"):
        if len(args) != 3:
            raise ConfigError(f"grid {kind!r} needs start stop count")
        start, stop = parse_number(args[0]), parse_number(args[1])
        count = int(args[2])
        if kind == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log grid bounds must be positive")
            return tuple(float(v) for v in np.geomspace(start, stop, count))
        return tuple(float(v) for v in np.linspace(start, stop, count))
    if kind == "mixed":
        if len(args) != 3:
            raise ConfigError("grid 'mixed' needs start stop count")
        return mixed_grid(parse_number(args[0]), parse_number(args[1]), int(args[2]))
    if kind == "divisors":
        if len(args) != 3:
            raise ConfigError("grid 'divisors' needs horizon n_min n_max")
        horizon = parse_number(args[0])
        n_min, n_max = int(args[1]), int(args[2])
        return tuple(horizon / n for n in range(n_max, n_min - 1, -1))
    raise ConfigError(f"unknown grid kind {kind!r}")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _tau(text: str) -> float | None:
    if text.strip().lower() in ("static", "none", ""):
        return None
    return parse_number(text)


# (section, key) -> (ExperimentConfig field, converter)
_FIELDS = {
    ("experiment", "name"): ("name", str.strip),
    ("lattice", "rows"): ("rows", int),
    ("lattice", "cols"): ("cols", int),
    ("lattice", "bits"): ("bits", str.strip),
    ("lattice", "central_band"): ("central_band", _bool),
    ("model", "delta0"): ("delta0", parse_number),
    ("model", "delta"): ("delta", parse_number),
    ("model", "j"): ("bigJ", parse_number),
    ("noise", "seed"): ("seed", int),
    ("noise", "realizations"): ("realizations", int),
    ("noise", "tau"): ("tau", _tau),
    ("sweep", "variable"): ("sweep_variable", str.strip),
    ("sweep", "horizon"): ("horizon", parse_number),
    ("observables", "convention"): ("convention", str.strip),
    ("analysis", "epsilon"): ("epsilon", parse_number),
    ("run", "workers"): ("workers", int),
    ("run", "output_dir"): ("output_dir", str.strip),
}
_PROPAGATOR_FIELDS = {
    "kind": str.strip,
    "krylov_dim": int,
    "substep": parse_number,
    "tolerance": parse_number,
}


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc

    kwargs: dict = {}
    prop: dict = {}
    problems = []
    for section in cp.sections():
        for key, raw in cp.items(section):
            try:
                if section == "propagator":
                    if key not in _PROPAGATOR_FIELDS:
                        raise ConfigError("unknown key")
                    prop[key] = _PROPAGATOR_FIELDS[key](raw)
                elif section == "sweep" and key == "values":
                    kwargs["sweep_values"] = tuple(
                        parse_number(v) for v in raw.split(",") if v.strip()
                    )
                elif section == "sweep" and key == "grid":
                    kwargs["sweep_values"] = parse_grid(raw)
                elif (section, key) in _FIELDS:
                    name, conv = _FIELDS[(section, key)]
                    kwargs[name] = conv(raw)
                else:
                    raise ConfigError("unknown key")
            except (ConfigError, ValueError) as exc:
                problems.append(f"{section}.{key}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))
    try:
        if prop:
            kwargs["propagator"] = PropagatorMethod(**prop)
        cfg = ExperimentConfig(**kwargs)
        cfg.state  # validates bits against the central-band requirement
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def format_number(x: float) -> str:
    return f"{x:.17g}"


def dump_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` (round-trips exactly)."""
    p = cfg.propagator
    lines = [
        "[experiment]", f"name = {cfg.name}",
        "[lattice]", f"rows = {cfg.rows}", f"cols = {cfg.cols}", f"bits = {cfg.bits}",
        f"central_band = {str(cfg.central_band).lower()}",
        "[model]", f"delta0 = {format_number(cfg.delta0)}", f"delta = {format_number(cfg.delta)}",
        f"J = {format_number(cfg.bigJ)}",
        "[noise]", f"seed = {cfg.seed}", f"realizations = {cfg.realizations}",
        f"tau = {'static' if cfg.tau is None else format_number(cfg.tau)}",
        "[sweep]", f"variable = {cfg.sweep_variable}",
        "values = " + ", ".join(format_number(v) for v in cfg.sweep_values),
        f"horizon = {format_number(cfg.horizon)}",
        "[propagator]", f"kind = {p.kind}", f"krylov_dim = {p.krylov_dim}",
        f"substep = {format_number(p.substep)}", f"tolerance = {format_number(p.tolerance)}",
        "[observables]", f"convention = {cfg.convention}",
        "[analysis]", f"epsilon = {format_number(cfg.epsilon)}",
        "[run]", f"workers = {cfg.workers}", f"output_dir = {cfg.output_dir}",
    ]
    return "\n".join(lines) + "\n"


# -- theorem scans ----------------------------------------------------------------

@dataclass(frozen=True)
class TheoremConfig:
    """Convergence-in-probability scan of one (H0, V) instance.

    Config sections: ``[experiment] name``, ``[theorem] instance = lattice|random``,
    ``rows``, ``cols``, ``delta0`` (lattice), ``dim``, ``commuting`` (random),
    ``instance_seed``, ``strength``, ``t``, ``steps`` (comma list of N),
    ``noise = uniform|gaussian``, ``noise_scale``, ``trials``, ``epsilon``,
    ``seed``, ``surrogate_trials`` (0 skips the Gaussian-surrogate comparison),
    and ``[run] output_dir``.
    """

    name: str = "theorem"
    instance: str = "lattice"
    rows: int = 2
    cols: int = 3
    delta0: float = 1.0
    dim: int = 32
    commuting: bool = False
    instance_seed: int = 5
    strength: float = 0.4 / 7
    t: float = 1.0
    steps: tuple[int, ...] = (4, 16, 64, 256, 1024)
    noise: str = "uniform"
    noise_scale: float = 1.0
    trials: int = 40
    epsilon: float = 0.02
    seed: int = 0
    surrogate_trials: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        problems = []
        if self.instance not in ("lattice", "random"):
            problems.append("theorem.instance: must be 'lattice' or 'random'")
        if self.instance == "lattice" and not 1 <= self.rows * self.cols <= 10:
            problems.append("theorem.rows/cols: dense lattice instances need 1..10 qubits")
        if self.instance == "random" and not 2 <= self.dim <= 1024:
            problems.append("theorem.dim: must be in 2..1024")
        if not self.strength > 0:
            problems.append("theorem.strength: must be positive")
        if not self.t > 0:
            problems.append("theorem.t: must be positive")
        if len(self.steps) < 2 or min(self.steps) < 1:
            problems.append("theorem.steps: need at least two positive step counts")
        if self.noise not in ("uniform", "gaussian"):
            problems.append("theorem.noise: must be 'uniform' or 'gaussian'")
        if self.trials < 20:
            problems.append("theorem.trials: must be >= 20")
        if not self.epsilon > 0:
            problems.append("theorem.epsilon: must be positive")
        if self.surrogate_trials < 0:
            problems.append("theorem.surrogate_trials: must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))

    def with_(self, **changes) -> "TheoremConfig":
        return dataclasses.replace(self, **changes)

    @property
    def config_hash(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def build_instance(self):
        from .theorem import NoiseDistribution, lattice_instance, random_instance

        noise = NoiseDistribution(self.noise, self.noise_scale)
        if self.instance == "lattice":
            geom = build_lattice(self.rows, self.cols)
            return lattice_instance(geom, self.strength, self.t, self.steps, self.delta0, noise)
        return random_instance(self.dim, self.instance_seed, self.strength, self.t, self.steps,
                               self.commuting, noise)


_THEOREM_FIELDS = {
    ("experiment", "name"): ("name", str.strip),
    ("theorem", "instance"): ("instance", str.strip),
    ("theorem", "rows"): ("rows", int),
    ("theorem", "cols"): ("cols", int),
    ("theorem", "delta0"): ("delta0", parse_number),
    ("theorem", "dim"): ("dim", int),
    ("theorem", "commuting"): ("commuting", _bool),
    ("theorem", "instance_seed"): ("instance_seed", int),
    ("theorem", "strength"): ("strength", parse_number),
    ("theorem", "t"): ("t", parse_number),
    ("theorem", "steps"): ("steps", lambda raw: tuple(int(v) for v in raw.split(",") if v.strip())),
    ("theorem", "noise"): ("noise", str.strip),
    ("theorem", "noise_scale"): ("noise_scale", parse_number),
    ("theorem", "trials"): ("trials", int),
    ("theorem", "epsilon"): ("epsilon", parse_number),
    ("theorem", "seed"): ("seed", int),
    ("theorem", "surrogate_trials"): ("surrogate_trials", int),
    ("run", "output_dir"): ("output_dir", str.strip),
}


def parse_theorem_config(text: str) -> TheoremConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    kwargs, problems = {}, []
    for section in cp.sections():
        for key, raw in cp.items(section):
            if (section, key) not in _THEOREM_FIELDS:
                problems.append(f"{section}.{key}: unknown key")
                continue
            name, conv = _THEOREM_FIELDS[(section, key)]
            try:
                kwargs[name] = conv(raw)
            except (ConfigError, ValueError) as exc:
                problems.append(f"{section}.{key}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))
    return TheoremConfig(**kwargs)


def dump_theorem_config(cfg: TheoremConfig) -> str:
    lines = ["[experiment]", f"name = {cfg.name}", "[theorem]"]
    for (section, key), (name, _) in _THEOREM_FIELDS.items():
        if section != "theorem":
            continue
        v = getattr(cfg, name)
        if isinstance(v, bool):
            text = str(v).lower()
        elif isinstance(v, tuple):
            text = ", ".join(str(s) for s in v)
        elif isinstance(v, float):
            text = format_number(v)
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    lines += ["[run]", f"output_dir = {cfg.output_dir}"]
    return "\n".join(lines) + "\n"


def is_theorem_config(text: str) -> bool:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error:
        return False
    return cp.has_section("theorem")
