import json
import os
import subprocess
import sys

import pytest

from bdsdelab.cli import (
    ITERATIONS_HEADER,
    PLOT_HEADER,
    RESULTS_HEADER,
    emit_plot_data,
    main,
)
from bdsdelab.errors import InvalidArgument
from bdsdelab.grids import make_uniform_grid
from bdsdelab.iteration import IterationConfig, run_minimal
from bdsdelab.noise import NoiseConfig, generate
from bdsdelab.problem import BdsdeProblem, builtin_generator, builtin_terminal
from bdsdelab.scenarios import SCENARIOS
from bdsdelab.solver import SolverConfig, backward_sweep


def _write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


_FAST_ODE = ("scenario = ode-oracle\nn_steps = 100\nm_outer = 2\nn_inner = 32\n")


def _run_cli(args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run([sys.executable, "-m", "bdsdelab.cli", *args],
                          capture_output=True, text=True, env=env)


# ---------------------------------------------------------------------------
# exit-code contract
# ---------------------------------------------------------------------------

def test_passing_scenario_exit_zero(tmp_path):
    cfg = _write_cfg(tmp_path, _FAST_ODE)
    out = tmp_path / "out"
    proc = _run_cli(["--config", cfg, "--out", str(out)])
    assert proc.returncode == 0, proc.stderr
    assert (out / "results.csv").exists()
    assert (out / "manifest.json").exists()
    assert "PASS" in proc.stdout


def test_failing_check_exit_two(tmp_path):
    # engineered comparison precondition violation
    cfg = _write_cfg(tmp_path, "scenario = comparison\nxi_shift = -1.0\n"
                               "n_steps = 20\nm_outer = 2\nn_inner = 50\n")
    out = tmp_path / "out"
    proc = _run_cli(["--config", cfg, "--out", str(out)])
    assert proc.returncode == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["checks"]["preconditions_ok"] is False


def test_unknown_key_exit_one(tmp_path):
    cfg = _write_cfg(tmp_path, "scenario = martingale\nn_stepz = 10\n")
    proc = _run_cli(["--config", cfg])
    assert proc.returncode == 1
    assert "n_stepz" in proc.stderr


def test_unknown_scenario_exit_one_lists_names(tmp_path):
    cfg = _write_cfg(tmp_path, "scenario = bogus\n")
    proc = _run_cli(["--config", cfg])
    assert proc.returncode == 1
    assert "ode-oracle" in proc.stderr and "martingale" in proc.stderr


def test_missing_config_exit_one():
    proc = _run_cli([])
    assert proc.returncode == 1
    assert "--config" in proc.stderr


def test_unreadable_config_exit_one(tmp_path):
    proc = _run_cli(["--config", str(tmp_path / "nope.cfg")])
    assert proc.returncode == 1


# ---------------------------------------------------------------------------
# --list
# ---------------------------------------------------------------------------

def test_list_prints_ten_stable_lines(capsys):
    assert main(["--list"]) == 0
    first = capsys.readouterr().out
    assert main(["--list"]) == 0
    second = capsys.readouterr().out
    assert first == second
    lines = [ln for ln in first.splitlines() if ln]
    assert len(lines) == 10
    names = {ln.split(":")[0] for ln in lines}
    assert names == set(SCENARIOS)


def test_each_catalog_name_is_runnable():
    for name, scenario in SCENARIOS.items():
        assert scenario.name == name
        assert callable(scenario.runner)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def test_results_and_plot_headers(tmp_path):
    cfg = _write_cfg(tmp_path, _FAST_ODE)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    results = (out / "results.csv").read_text().splitlines()
    assert results[0] == RESULTS_HEADER == "scenario,check,metric,value,threshold,pass"
    plot = (out / "plot.csv").read_text().splitlines()
    assert plot[0] == PLOT_HEADER == "series,t,mean,ci_lo,ci_hi"
    iters = (out / "iterations.csv").read_text().splitlines()
    assert iters[0] == ITERATIONS_HEADER


def test_seed_override_recorded(tmp_path):
    cfg = _write_cfg(tmp_path, _FAST_ODE)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--seed", "123",
                 "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["resolved_config"]["seed"] == 123
    assert manifest["rng_method"]
    assert manifest["scenario"] == "ode-oracle"


def test_default_seed_is_42(tmp_path):
    cfg = _write_cfg(tmp_path, _FAST_ODE)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["resolved_config"]["seed"] == 42


def test_rerun_byte_identical_across_worker_counts(tmp_path):
    cfg = _write_cfg(tmp_path, _FAST_ODE)
    o1, o2 = tmp_path / "o1", tmp_path / "o2"
    p1 = _run_cli(["--config", cfg, "--out", str(o1), "--quiet"],
                  env_extra={"BDSDE_THREADS": "1"})
    p2 = _run_cli(["--config", cfg, "--out", str(o2), "--quiet"],
                  env_extra={"BDSDE_THREADS": "4"})
    assert p1.returncode == p2.returncode == 0
    for name in ("results.csv", "plot.csv", "iterations.csv"):
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()
    # manifests may differ only in duration
    m1 = json.loads((o1 / "manifest.json").read_text())
    m2 = json.loads((o2 / "manifest.json").read_text())
    m1.pop("duration_seconds")
    m2.pop("duration_seconds")
    assert m1 == m2


# ---------------------------------------------------------------------------
# emit_plot_data
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_solution():
    grid = make_uniform_grid(1.0, 8)
    bundle = generate(grid, NoiseConfig(seed=2, m_outer=2, n_inner=30))
    prob = BdsdeProblem(grid=grid, generator=builtin_generator("zero"),
                        terminal=builtin_terminal("constant", (2.0,)))
    return backward_sweep(prob, bundle, SolverConfig())


def test_plot_constant_solution_degenerate_intervals(tiny_solution, tmp_path):
    path = tmp_path / "plot.csv"
    emit_plot_data(tiny_solution, path)
    lines = path.read_text().splitlines()
    n_nodes = tiny_solution.grid.n_steps + 1
    assert len(lines) == 1 + 2 * n_nodes  # Y series + Z series
    for ln in lines[1:]:
        series, t, mean, lo, hi = ln.split(",")
        assert float(lo) <= float(mean) <= float(hi)
        if series == "Y":
            assert float(mean) == pytest.approx(2.0, abs=1e-8)


def test_plot_reemission_byte_identical(tiny_solution, tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_plot_data(tiny_solution, p1)
    emit_plot_data(tiny_solution, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_plot_iteration_report_row_count(tmp_path):
    grid = make_uniform_grid(1.0, 10)
    bundle = generate(grid, NoiseConfig(seed=3, m_outer=2, n_inner=60))
    prob = BdsdeProblem(grid=grid,
                        generator=builtin_generator("step_plus_linear", (1.0, 0.0)),
                        terminal=builtin_terminal("w_abs"))
    rep = run_minimal(prob, bundle, IterationConfig(solver=SolverConfig()))
    path = tmp_path / "it.csv"
    emit_plot_data(rep, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + len(rep.iterates) * (grid.n_steps + 1)
    series = {ln.split(",")[0] for ln in lines[1:]}
    assert len(series) == len(rep.iterates)


def test_plot_rejects_unknown_object(tmp_path):
    with pytest.raises(InvalidArgument):
        emit_plot_data(object(), tmp_path / "x.csv")
