"""Command-line entry point: ``dynimp run|recipe|analyze|theorem``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config, parse_theorem_config
from .errors import CapabilityError, ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("dynimp")


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.realizations is not None:
        out["realizations"] = args.realizations
    if args.output_dir is not None:
        out["output_dir"] = args.output_dir
    if args.workers is not None:
        out["workers"] = args.workers
    return out


def _theorem_overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.realizations is not None:
        out["trials"] = args.realizations
    if args.output_dir is not None:
        out["output_dir"] = args.output_dir
    return out


def _run_experiment(cfg) -> None:
    from .experiment import run

    res = run(cfg)
    print(f"{cfg.name}: {res.curve_path} ({res.manifest['wall_time_s']:.1f} s, "
          f"max norm defect {res.manifest['norm_defect']['max']:.2e})")
    return res


def _run_theorem(cfg) -> None:
    from .experiment import run_theorem

    res = run_theorem(cfg)
    s = res.summary
    print(f"{cfg.name}: exponent {s['exponent']:.3f} +- {s['exponent_stderr']:.3f}, "
          f"P_hat non-increasing: {s['p_hat_non_increasing_within_ci']} -> {res.csv_path}")


def cmd_run(args) -> int:
    cfg = load_config(args.config).with_(**_overrides(args))
    _run_experiment(cfg)
    return EXIT_OK


def cmd_theorem(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = parse_theorem_config(text).with_(**_theorem_overrides(args))
    _run_theorem(cfg)
    return EXIT_OK


def cmd_recipe(args) -> int:
    from .experiment import detect_tau_c, fit_tau_c_scaling
    from .recipes import get_recipe

    recipe = get_recipe(args.name, args.scale)
    if recipe.long_running:
        log.warning("recipe %s at %s scale is long-running", recipe.name, recipe.scale)
    for cfg in recipe.theorem:
        _run_theorem(cfg.with_(**_theorem_overrides(args)))
    results = [_run_experiment(cfg.with_(**_overrides(args))) for cfg in recipe.configs]

    tau_sweeps = [r for r in results if r.curve.sweep_variable == "tau"]
    if tau_sweeps:
        rows, deltas, tcs, sizes = [], [], [], []
        for r in tau_sweeps:
            res = detect_tau_c(r.curve)
            rows.append({"name": r.curve.meta["name"], "delta": r.curve.meta["delta"],
                         "n": r.curve.meta["n_qubits"], "tau_c": res.tau_c, "tau_c_std": res.tau_c_std,
                         "fitted_over_analytic_slope": res.fitted_slope / res.analytic_slope})
            print(f"  tau_c[{rows[-1]['name']}] = {res}")
            if res.reached:
                deltas.append(r.curve.meta["delta"])
                tcs.append(res.tau_c)
                sizes.append(r.curve.meta["n_qubits"])
        summary = {"recipe": recipe.name, "scale": recipe.scale, "tau_c": rows}
        if recipe.name in ("fig3", "fig3-inset") and len(set(deltas)) >= 2:
            fit = fit_tau_c_scaling(deltas, tcs, sizes)
            summary["scaling"] = {"slope": fit.slope, "slope_stderr": fit.slope_stderr,
                                  "by_size": {str(k): v for k, v in fit.by_size.items()}}
            print(f"  tau_c ~ delta^{fit.slope:.3f} +- {fit.slope_stderr:.3f}")
        out = Path(recipe.configs[0].with_(**_overrides(args)).output_dir)
        (out / f"{recipe.name}.tau_c.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .experiment import detect_tau_c
    from .observables import curve_from_csv

    try:
        text = Path(args.csv).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc}") from exc
    curve = curve_from_csv(text)
    res = detect_tau_c(curve, args.epsilon, reference=args.reference)
    print(f"tau_c = {res}")
    print(f"fitted/analytic linear slope = {res.fitted_slope / res.analytic_slope:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynimp", description="Dynamical imperfections in a qubit lattice")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--realizations", type=int, help="ensemble size (trials for theorem scans)")
        p.add_argument("--output-dir")
        p.add_argument("--workers", type=int)

    p = sub.add_parser("run", help="simulate one experiment config")
    p.add_argument("config")
    add_overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("recipe", help="run a figure preset")
    p.add_argument("name")
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    add_overrides(p)
    p.set_defaults(func=cmd_recipe)

    p = sub.add_parser("analyze", help="analyze a saved curve")
    asub = p.add_subparsers(dest="analysis", required=True)
    q = asub.add_parser("tau-c", help="detect the linear-regime departure tau_c")
    q.add_argument("csv")
    q.add_argument("--epsilon", type=float, default=None)
    q.add_argument("--reference", choices=("analytic", "fit"), default="analytic")
    q.set_defaults(func=cmd_analyze)

    p = sub.add_parser("theorem", help="convergence scan for a theorem config")
    p.add_argument("config")
    add_overrides(p)
    p.set_defaults(func=cmd_theorem)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CapabilityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
