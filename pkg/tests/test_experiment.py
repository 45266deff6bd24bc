import json
import math

import numpy as np
import pytest

from dynimp.analytics import predicted_error, tau_c
from dynimp.cli import main
from dynimp.config import ExperimentConfig
from dynimp.errors import ConfigError
from dynimp.experiment import (
    analytic_overlay, detect_tau_c, effective_period, fit_tau_c_scaling, kink_slope_ratio, run,
)
from dynimp.lattice import ModelParams
from dynimp.observables import ErrorCurve, curve_from_csv, ensemble_error
from dynimp.propagator import PropagatorMethod
from dynimp.recipes import CAPTIONS, RECIPE_NAMES, FigureRecipe, get_recipe, self_test

FAST = PropagatorMethod(krylov_dim=40, substep=2.0)


def analytic_curve(delta, t, taus, J=5e-3, n_ud=8, n_uu=5):
    p = ModelParams(delta, J)
    E = np.array([predicted_error(t, tau, p, n_ud, n_uu) for tau in taus])
    meta = {"horizon": t, "J": J, "n_ud": n_ud, "n_uu": n_uu, "delta0": 1.0, "sigma2": 1 / 12}
    return ErrorCurve("tau", np.asarray(taus, dtype=float), E, np.zeros_like(E), 1, meta=meta)


def test_effective_period():
    assert effective_period(25.0, [25 / 7])[0] == pytest.approx(25 / 7)
    # partial segment: (2 * 10^2 + 5^2) / 25
    assert effective_period(25.0, [10.0])[0] == pytest.approx(9.0)


def test_tau_c_from_analytic_curve_matches_formula():
    taus = np.geomspace(0.5, 20, 60)
    res = detect_tau_c(analytic_curve(0.3, 25.0, taus), 1 / 40)
    assert res.reached
    assert res.tau_c == pytest.approx(tau_c(25.0, 0.3), rel=0.1)
    assert res.fitted_slope / res.analytic_slope == pytest.approx(1.0, rel=0.05)
    fit = detect_tau_c(analytic_curve(0.3, 25.0, taus), 1 / 40, reference="fit")
    assert fit.tau_c == pytest.approx(res.tau_c, rel=0.1)


def test_ergodic_curve_never_departs():
    taus = np.geomspace(0.1, 50, 40)
    res = detect_tau_c(analytic_curve(5e-3, 25.0, taus), 1 / 40)
    assert not res.reached and str(res) == "not reached"


def test_fig3_exponent_on_analytic_curves():
    taus = np.geomspace(0.8, 40, 80)
    deltas = (0.1, 0.2, 0.3, 0.5)
    tcs = [detect_tau_c(analytic_curve(d, 50.0, taus), 1 / 40).tau_c for d in deltas]
    fit = fit_tau_c_scaling(deltas, tcs, [10] * 4)
    assert fit.slope == pytest.approx(-2 / 3, abs=0.15)
    assert fit.by_size[10] == pytest.approx(fit.slope)
    exact = fit_tau_c_scaling(deltas, [d ** (-2 / 3) for d in deltas])
    assert exact.slope == pytest.approx(-2 / 3, abs=1e-12)
    with pytest.raises(ConfigError):
        fit_tau_c_scaling([0.1], [3.0])


def test_kink_ratio_on_analytic_ergodic_curve():
    taus = np.concatenate([np.linspace(0.05, 0.5, 10), np.linspace(1.5, 4, 10)])
    ratio = kink_slope_ratio(analytic_curve(5e-3, 25.0, taus))
    assert ratio == pytest.approx(13 / 8, rel=0.2)


def test_detect_rejects_non_tau_curves():
    c = analytic_curve(0.3, 25.0, [1.0, 2.0])
    c.sweep_variable = "time"
    with pytest.raises(ConfigError):
        detect_tau_c(c)


def test_bootstrap_error_from_samples():
    cfg = ExperimentConfig(delta=0.3, horizon=25.0, sweep_values=tuple(np.geomspace(1, 12, 10)),
                           realizations=8, seed=4, propagator=FAST)
    res = detect_tau_c(ensemble_error(cfg), bootstrap=50)
    assert res.reached and res.tau_c_std > 0 and 0 < res.bootstrap_reached <= 1


def test_analytic_overlay_labels():
    cfg = ExperimentConfig(delta=0.3, horizon=25.0, sweep_values=(0.5, 2.0, 40.0))
    rows = analytic_overlay(cfg)
    assert [r[3] for r in rows] == ["pre-kink", "linear", "fgr-saturated"]
    assert rows[1][1] == pytest.approx(predicted_error(25, 2.0, cfg.params, 8, 5))


# -- run / CLI ------------------------------------------------------------------

SMALL = """
[experiment]
name = small
[lattice]
rows = 2
cols = 2
bits = 1010
[model]
delta = 0.3
J = 0.05
[noise]
seed = 2
realizations = 4
[sweep]
variable = tau
values = 0.5, 1, 2, 4
horizon = 8
[propagator]
substep = 2
krylov_dim = 40
"""


def test_run_writes_outputs(tmp_path):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    assert main(["run", str(cfg_path), "--output-dir", str(tmp_path), "--realizations", "5"]) == 0
    curve = curve_from_csv((tmp_path / "small.csv").read_text())
    assert curve.R == 5 and len(curve.x) == 4
    overlay = (tmp_path / "small.analytic.csv").read_text().splitlines()
    assert overlay[2] == "x,E_predicted,g_value,regime,source" and overlay[3].endswith(",analytic")
    manifest = json.loads((tmp_path / "small.manifest.json").read_text())
    assert manifest["config_hash"] == curve.meta["config_hash"]
    assert manifest["seeds"]["realization_indices"] == [0, 4]
    assert {"numpy", "scipy", "numba", "dynimp"} <= set(manifest["versions"])
    assert manifest["norm_defect"]["max"] < 1e-9


def test_csv_independent_of_worker_count(tmp_path):
    from dynimp.config import parse_config

    cfg = parse_config(SMALL)
    a = run(cfg, tmp_path / "w1", workers=1).curve_path.read_text()
    b = run(cfg, tmp_path / "w2", workers=2).curve_path.read_text()
    assert a == b


def test_exit_codes(tmp_path, capsys):
    empty = tmp_path / "empty.ini"
    empty.write_text(SMALL.replace("values = 0.5, 1, 2, 4", "values ="))
    assert main(["run", str(empty)]) == 2
    assert "empty grid" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2
    assert main(["recipe", "fig9"]) == 2
    broken = tmp_path / "broken.ini"
    broken.write_text(SMALL + "tolerance = 1e-300\n" + f"[run]\noutput_dir = {tmp_path}\n")
    assert main(["run", str(broken)]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_analyze_command(tmp_path, capsys):
    c = analytic_curve(0.3, 25.0, np.geomspace(0.5, 20, 40))
    c.meta["config_hash"] = "x"
    from dynimp.observables import curve_to_csv

    path = tmp_path / "a.csv"
    path.write_text(curve_to_csv(c))
    assert main(["analyze", "tau-c", str(path), "--epsilon", "0.025"]) == 0
    out = capsys.readouterr().out
    assert "tau_c = 5." in out


def test_theorem_command(tmp_path):
    cfg = tmp_path / "th.ini"
    cfg.write_text("[theorem]\ninstance = random\ndim = 6\nsteps = 4, 16, 64\ntrials = 20\n"
                   f"[run]\noutput_dir = {tmp_path}\n")
    assert main(["theorem", str(cfg)]) == 0
    rows = (tmp_path / "theorem.csv").read_text().splitlines()
    assert rows[2] == "tau,N,median_dev,P_hat,CI_lo,CI_hi" and len(rows) == 6
    summary = json.loads((tmp_path / "theorem.summary.json").read_text())
    assert "exponent" in summary


def test_recipe_command(tmp_path):
    assert main(["recipe", "fig1-inset", "--realizations", "2", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "fig1-inset-fgr.csv").exists() and (tmp_path / "fig1-inset-ergodic.csv").exists()


# -- recipes --------------------------------------------------------------------

@pytest.mark.parametrize("name", RECIPE_NAMES)
@pytest.mark.parametrize("scale", ["desk", "full"])
def test_recipes_pass_self_test(name, scale):
    r = get_recipe(name, scale)
    assert r.long_running == (scale == "full")
    assert r.configs or r.theorem


def test_fig2_grid_and_sets():
    r = get_recipe("fig2")
    for cfg in r.configs:
        assert min(cfg.sweep_values) == pytest.approx(0.1) and max(cfg.sweep_values) == pytest.approx(50)
        assert cfg.rows * cfg.cols == 10 and cfg.horizon == 25
    assert sorted(c.state.census for c in r.configs) == [(8, 5), (8, 5), (13, 0)]


def test_full_scale_uses_caption_sizes():
    assert {c.rows * c.cols for c in get_recipe("fig1", "full").configs} == {CAPTIONS["fig1"]["n"]}
    assert {c.rows * c.cols for c in get_recipe("fig3-inset", "full").configs} == {10, 12, 14}


def test_drifted_recipe_fails_self_test():
    r = get_recipe("fig2")
    drifted = FigureRecipe(r.name, r.scale, tuple(c.with_(bigJ=1e-2) for c in r.configs))
    with pytest.raises(ConfigError, match="drifted"):
        self_test(drifted)
    r3 = get_recipe("fig3")
    with pytest.raises(ConfigError):
        self_test(FigureRecipe("fig3", "desk", r3.configs[:-1]))
    with pytest.raises(ConfigError):
        get_recipe("fig2", "huge")
