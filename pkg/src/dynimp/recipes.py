"""Read-only presets that expand into the experiments behind each figure.

``desk`` scale runs on a laptop (n = 10, R = 50); ``full`` scale uses the
published lattice sizes and large ensembles and is long-running.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .config import ExperimentConfig, TheoremConfig, mixed_grid
from .errors import ConfigError
from .lattice import NEEL_2X5, WITNESS_2X5_8_5
from .propagator import PropagatorMethod

RECIPE_NAMES = ("fig1", "fig1-inset", "fig2", "fig3", "fig3-inset", "theorem")
SCALES = ("desk", "full")

# Krylov settings for the recipes: long substeps with a larger basis are
# cheaper per unit time at the same tolerance.
RECIPE_PROPAGATOR = PropagatorMethod(kind="krylov", krylov_dim=40, substep=2.0, tolerance=1e-10)

# Parameters fixed by the figure captions.
CAPTIONS = MappingProxyType({
    "fig1": {"n": 14, "J": 2e-2, "delta": 0.4, "taus": (1.0, 3.0, 5.0, 10.0, 20.0, 25.0)},
    "fig1-inset": {"n": 14, "fgr": (2e-2, 0.4), "ergodic": (2e-2, 2e-2)},
    "fig2": {"t": 25.0, "n": 10, "J": 5e-3, "ergodic_delta": 5e-3, "fgr_delta": 0.3,
             "censuses": ((8, 5), (13, 0))},
    "fig3": {"t": 50.0, "n": 10, "J": 5e-3, "deltas": (0.1, 0.2, 0.3, 0.5)},
    "fig3-inset": {"t": 50.0, "sizes": (10, 12, 14), "J": 5e-3, "deltas": (0.1, 0.2, 0.3, 0.5)},
})

# Central-band product states per lattice (two rows).
STATES = MappingProxyType({
    5: WITNESS_2X5_8_5,
    6: "111000101010",
    7: "11100010101010",
})


@dataclass(frozen=True)
class FigureRecipe:
    name: str
    scale: str
    configs: tuple[ExperimentConfig, ...] = ()
    theorem: tuple[TheoremConfig, ...] = ()
    long_running: bool = False

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.configs + self.theorem)


def _base(name, cols, R, seed, **kw) -> ExperimentConfig:
    return ExperimentConfig(name=name, rows=2, cols=cols, bits=STATES[cols], realizations=R, seed=seed,
                            propagator=RECIPE_PROPAGATOR, **kw)


def _log_grid(lo, hi, count):
    return tuple(float(v) for v in np.geomspace(lo, hi, count))


def _fig1(scale):
    cols, R = (5, 50) if scale == "desk" else (7, 500)
    cap = CAPTIONS["fig1"]
    times = mixed_grid(0.1, 25.0, 200)
    return tuple(
        _base(f"fig1-tau{tau:g}", cols, R, 11, delta=cap["delta"], bigJ=cap["J"], sweep_variable="time",
              sweep_values=times, tau=None if tau >= times[-1] else tau)
        for tau in cap["taus"]
    )


def _fig1_inset(scale):
    cols, R = (5, 100) if scale == "desk" else (7, 500)
    cap = CAPTIONS["fig1-inset"]
    out = []
    for label, (J, delta), horizon in (("fgr", cap["fgr"], 50.0), ("ergodic", cap["ergodic"], 50.0)):
        out.append(_base(f"fig1-inset-{label}", cols, R, 12, delta=delta, bigJ=J, sweep_variable="time",
                         sweep_values=mixed_grid(0.1, horizon, 200)))
    return tuple(out)


def _fig2(scale):
    R = 50 if scale == "desk" else 1000
    cap = CAPTIONS["fig2"]
    grid = _log_grid(0.1, 50.0, 40)
    common = dict(bigJ=cap["J"], horizon=cap["t"], sweep_values=grid)
    return (
        _base("fig2-ergodic-8-5", 5, R, 21, delta=cap["ergodic_delta"], **common),
        _base("fig2-ergodic-13-0", 5, R, 22, delta=cap["ergodic_delta"], **common).with_(bits=NEEL_2X5),
        _base("fig2-fgr", 5, R, 23, delta=cap["fgr_delta"], **common),
    )


def _fig3(scale):
    R = 50 if scale == "desk" else 1000
    cap = CAPTIONS["fig3"]
    grid = _log_grid(0.1, 50.0, 40)
    deltas = (cap["J"],) + cap["deltas"]
    return tuple(
        _base(f"fig3-delta{d:g}", 5, R, 30 + i, delta=d, bigJ=cap["J"], horizon=cap["t"], sweep_values=grid)
        for i, d in enumerate(deltas)
    )


def _fig3_inset(scale):
    R = 50 if scale == "desk" else 500
    cap = CAPTIONS["fig3-inset"]
    sizes = cap["sizes"][:2] if scale == "desk" else cap["sizes"]
    grid = _log_grid(0.8, 30.0, 16)
    return tuple(
        _base(f"fig3-inset-n{n}-delta{d:g}", n // 2, R, 40 + 10 * n + i, delta=d, bigJ=cap["J"],
              horizon=cap["t"], sweep_values=grid)
        for n in sizes for i, d in enumerate(cap["deltas"])
    )


def _theorem(scale):
    trials = 40 if scale == "desk" else 400
    return (
        TheoremConfig(name="theorem-lattice", instance="lattice", rows=2, cols=3, strength=0.4 / 7,
                      trials=trials, epsilon=0.02, seed=1),
        TheoremConfig(name="theorem-random", instance="random", dim=32, instance_seed=5, strength=0.5,
                      trials=trials, epsilon=0.02, seed=2, surrogate_trials=trials),
    )


_BUILDERS = {
    "fig1": _fig1,
    "fig1-inset": _fig1_inset,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig3-inset": _fig3_inset,
    "theorem": _theorem,
}


def _close(a, b):
    return abs(a - b) <= 1e-12 * max(1.0, abs(b))


def self_test(recipe: FigureRecipe) -> None:
    """Raise ConfigError if a recipe drifted from its caption parameters."""
    problems = []
    name, cfgs = recipe.name, recipe.configs
    full = recipe.scale == "full"

    def expect(cond, msg):
        if not cond:
            problems.append(msg)

    if name in ("fig1", "fig1-inset") and full:
        expect(all(c.rows * c.cols == CAPTIONS[name]["n"] for c in cfgs), f"{name}: lattice size")
    if name == "fig1":
        cap = CAPTIONS["fig1"]
        expect(all(_close(c.bigJ, cap["J"]) and _close(c.delta, cap["delta"]) for c in cfgs), "fig1: J/delta")
        taus = tuple(c.tau if c.tau is not None else c.t_final for c in cfgs)
        expect(len(taus) == len(cap["taus"]) and all(_close(a, b) for a, b in zip(taus, cap["taus"])),
               "fig1: tau list")
    elif name == "fig1-inset":
        cap = CAPTIONS["fig1-inset"]
        pairs = [(c.bigJ, c.delta) for c in cfgs]
        expect(len(pairs) == 2 and all(_close(a, b) for p, q in zip(pairs, (cap["fgr"], cap["ergodic"]))
                                       for a, b in zip(p, q)), "fig1-inset: J/delta pairs")
        expect(all(c.tau is None and c.sweep_variable == "time" for c in cfgs), "fig1-inset: static time series")
    elif name == "fig2":
        cap = CAPTIONS["fig2"]
        expect(all(c.rows * c.cols == cap["n"] and _close(c.horizon, cap["t"]) and _close(c.bigJ, cap["J"])
                   for c in cfgs), "fig2: n/t/J")
        censuses = {c.state.census for c in cfgs if _close(c.delta, cap["ergodic_delta"])}
        expect(censuses == set(cap["censuses"]), "fig2: ergodic link censuses")
        expect(any(_close(c.delta, cap["fgr_delta"]) and c.state.census == cap["censuses"][0] for c in cfgs),
               "fig2: FGR set")
        expect(all(min(c.sweep_values) <= 0.1 + 1e-12 and max(c.sweep_values) >= 50 - 1e-9 for c in cfgs),
               "fig2: tau grid must span [0.1, 50]")
    elif name == "fig3":
        cap = CAPTIONS["fig3"]
        expect(all(c.rows * c.cols == cap["n"] and _close(c.horizon, cap["t"]) and _close(c.bigJ, cap["J"])
                   for c in cfgs), "fig3: n/t/J")
        expect(sorted(c.delta for c in cfgs) == sorted((cap["J"],) + cap["deltas"]), "fig3: delta set")
    elif name == "fig3-inset":
        cap = CAPTIONS["fig3-inset"]
        sizes = sorted({c.rows * c.cols for c in cfgs})
        expect(set(sizes) <= set(cap["sizes"]) and len(sizes) >= 2, "fig3-inset: lattice sizes")
        for n in sizes:
            ds = sorted(c.delta for c in cfgs if c.rows * c.cols == n)
            expect(ds == sorted(cap["deltas"]), f"fig3-inset: delta set at n={n}")
        expect(all(_close(c.horizon, cap["t"]) and _close(c.bigJ, cap["J"]) for c in cfgs), "fig3-inset: t/J")
    elif name == "theorem":
        kinds = {c.instance for c in recipe.theorem}
        expect(kinds == {"lattice", "random"}, "theorem: needs a lattice and a random instance")
        expect(all(min(c.steps) == 4 and max(c.steps) == 1024 for c in recipe.theorem), "theorem: N range")
    if problems:
        raise ConfigError(f"recipe {name} ({recipe.scale}) drifted: " + "; ".join(problems))


def get_recipe(name: str, scale: str = "desk") -> FigureRecipe:
    if name not in _BUILDERS:
        raise ConfigError(f"unknown recipe {name!r}; choose from {', '.join(RECIPE_NAMES)}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; choose desk or full")
    items = _BUILDERS[name](scale)
    if name == "theorem":
        recipe = FigureRecipe(name, scale, theorem=items, long_running=scale == "full")
    else:
        recipe = FigureRecipe(name, scale, configs=items, long_running=scale == "full")
    self_test(recipe)
    return recipe
