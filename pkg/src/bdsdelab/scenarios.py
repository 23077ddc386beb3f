"""Runnable experiment scenarios shared by the CLI and the HTTP service."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .grids import make_uniform_grid
from .iteration import (
    IterationConfig,
    IterationReport,
    run_maximal_h6,
    run_minimal,
    run_sandwich,
    run_upper_bound,
)
from .noise import BrownianBundle, NoiseConfig, generate
from .problem import BdsdeProblem, GeneratorSpec, builtin_g, builtin_generator, builtin_terminal
from .regression import BasisSpec
from .solver import DiscreteSolution, SolverConfig, backward_sweep
from .verify import (
    Lemma22Spec,
    check_nonnegativity,
    check_order,
    comparison_experiment,
    lemma22_run,
    oracle_martingale,
    oracle_ode,
)


@dataclass(frozen=True)
class CheckRow:
    check: str
    metric: str
    value: float
    threshold: float
    passed: bool


@dataclass
class ScenarioOutcome:
    scenario: str
    checks: list[CheckRow]
    plot_source: Optional[Union[DiscreteSolution, IterationReport]] = None
    iteration_rows: list[dict] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.checks)


def _solver_cfg(r: dict) -> SolverConfig:
    return SolverConfig(basis=BasisSpec(degree=r["degree"]),
                        picard_inner=r["picard_inner"])


def _iter_cfg(r: dict, epsilon_order: float = 0.01) -> IterationConfig:
    return IterationConfig(tol_iter=r["tol_iter"], i_max=r["i_max"],
                           solver=_solver_cfg(r),
                           epsilon_order=epsilon_order, p_order=r["p"])


def _bundle(r: dict) -> BrownianBundle:
    grid = make_uniform_grid(r["T"], r["n_steps"])
    cfg = NoiseConfig(seed=r["seed"], m_outer=r["m_outer"], n_inner=r["n_inner"])
    return generate(grid, cfg)


def _check(name: str, metric: str, value: float, threshold: float,
           below: bool = True) -> CheckRow:
    passed = value <= threshold if below else value >= threshold
    return CheckRow(check=name, metric=metric, value=float(value),
                    threshold=float(threshold), passed=bool(passed))


def _iteration_rows(rep: IterationReport) -> list[dict]:
    rows = []
    for i, delta in enumerate(rep.deltas, start=1):
        rows.append({
            "iteration": i,
            "delta": delta,
            "mono_violation_fraction": rep.monotonicity[i - 1].violation_fraction,
            "norm_sup_Y2": rep.iterates[i].norm_sup_Y2,
            "norm_int_Z2": rep.iterates[i].norm_int_Z2,
        })
    return rows


# ---------------------------------------------------------------------------
# scenario implementations
# ---------------------------------------------------------------------------

def _sc_ode_oracle(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    gen = builtin_generator("linear", (r["a"], r["c0"]))
    problem = BdsdeProblem(grid=bundle.grid, generator=gen,
                           terminal=builtin_terminal("constant", (r["xi0"],)))
    sol = backward_sweep(problem, bundle, _solver_cfg(r))
    ref = oracle_ode(r["a"], r["c0"], r["xi0"], bundle.grid)
    y0 = float(sol.Y[:, :, 0].mean())
    checks = [_check("ode_oracle", "abs_error_Y0", abs(y0 - ref[0]), 0.05)]
    return ScenarioOutcome("ode-oracle", checks, plot_source=sol)


def _sc_martingale(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    problem = BdsdeProblem(grid=bundle.grid, generator=builtin_generator("zero"),
                           terminal=builtin_terminal("w_identity"))
    sol = backward_sweep(problem, bundle, _solver_cfg(r))
    ref_y, _ref_z = oracle_martingale(bundle)
    n_total = sol.Y.shape[0] * sol.Y.shape[1]
    se = float(sol.Y[:, :, -1].std()) / np.sqrt(n_total)
    z_interior = float(sol.Z[:, :, 1:-1, 0].mean())
    checks = [
        _check("martingale_mean", "abs_mean_Y0", abs(float(sol.Y[:, :, 0].mean())), 4 * se),
        _check("martingale_z", "abs_error_mean_Z", abs(z_interior - 1.0), 0.1),
        _check("martingale_mse", "mse_Y", float(((sol.Y - ref_y) ** 2).mean()), 0.01),
    ]
    return ScenarioOutcome("martingale", checks, plot_source=sol)


def _sc_backward_centering(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    g, c, alpha = builtin_g("linear_y", (0.3,))
    gen = builtin_generator("zero").with_g(g, c, alpha)
    problem = BdsdeProblem(grid=bundle.grid, generator=gen,
                           terminal=builtin_terminal("constant", (1.0,)))
    sol = backward_sweep(problem, bundle, _solver_cfg(r))
    outer_means = sol.Y[:, :, 0].mean(axis=1)
    se = float(outer_means.std()) / np.sqrt(len(outer_means))
    err = abs(float(outer_means.mean()) - 1.0)
    checks = [_check("backward_centering", "abs_error_mean_Y0", err, 4 * se)]
    return ScenarioOutcome("backward-centering", checks, plot_source=sol)


def _lemma22_spec(r: dict, terminal_name: str, terminal_params: tuple) -> Lemma22Spec:
    g, c, alpha = builtin_g("linear_y", (0.2,))
    return Lemma22Spec(
        l=0.5, m=0.5,
        phi=lambda t, w: np.ones_like(w),
        terminal=builtin_terminal(terminal_name, terminal_params),
        g=g, g_c=c, g_alpha=alpha,
        epsilon=r["epsilon"], p=r["p"],
    )


def _sc_lemma22(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    r1, r2 = lemma22_run(_lemma22_spec(r, "w_abs", ()), bundle, _solver_cfg(r))
    rc, _ = lemma22_run(_lemma22_spec(r, "constant", (-1.0,)), bundle, _solver_cfg(r))
    checks = [
        _check("lemma22_f1_nonneg", "violation_fraction", r1.violation_fraction, r["p"]),
        _check("lemma22_f2_nonneg", "violation_fraction", r2.violation_fraction, r["p"]),
        _check("lemma22_negative_control_fails", "violation_fraction",
               rc.violation_fraction, r["p"], below=False),
    ]
    return ScenarioOutcome("lemma22", checks)


def _step_minimal_problem(r: dict, bundle: BrownianBundle) -> BdsdeProblem:
    g, c, alpha = builtin_g("linear_y", (0.3,))
    gen = builtin_generator("step_plus_linear", (1.0, 0.0)).with_g(g, c, alpha)
    return BdsdeProblem(grid=bundle.grid, generator=gen,
                        terminal=builtin_terminal("w_abs"))


def _sc_step_minimal(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    rep = run_minimal(_step_minimal_problem(r, bundle), bundle, _iter_cfg(r))
    mono_max = max(o.violation_fraction for o in rep.monotonicity)
    low_max = max(o.violation_fraction for o in rep.per_iterate_lower)
    high_max = max(o.violation_fraction for o in rep.per_iterate_upper)
    checks = [
        _check("minimal_converged", "converged", float(rep.converged), 1.0, below=False),
        _check("minimal_monotone", "max_violation_fraction", mono_max, r["p"]),
        _check("minimal_above_lower_env", "max_violation_fraction", low_max, r["p"]),
        _check("minimal_below_upper_env", "max_violation_fraction", high_max, r["p"]),
    ]
    return ScenarioOutcome("step-minimal", checks, plot_source=rep,
                           iteration_rows=_iteration_rows(rep))


def _sc_upper_bound(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    problem = _step_minimal_problem(r, bundle)
    rep_min = run_minimal(problem, bundle, _iter_cfg(r))
    rep_ub = run_upper_bound(problem, bundle, _iter_cfg(r))
    mono_max = max(o.violation_fraction for o in rep_ub.monotonicity)
    below = check_order(rep_min.final, rep_ub.final, r["epsilon"], r["p"])
    checks = [
        _check("upper_bound_converged", "converged", float(rep_ub.converged), 1.0, below=False),
        _check("upper_bound_decreasing", "max_violation_fraction", mono_max, r["p"]),
        _check("minimal_below_upper_bound", "violation_fraction",
               below.violation_fraction, r["p"]),
    ]
    return ScenarioOutcome("upper-bound", checks, plot_source=rep_ub,
                           iteration_rows=_iteration_rows(rep_ub))


def _sc_sandwich(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    gen = builtin_generator("step_threshold", (1.0,))
    pair = (builtin_generator("zero"), builtin_generator("linear", (0.0, 1.0)))
    problem = BdsdeProblem(grid=bundle.grid, generator=gen,
                           terminal=builtin_terminal("w_abs"), bounding_pair=pair)
    rep = run_sandwich(problem, bundle, _iter_cfg(r, epsilon_order=r["epsilon"]))
    mono_max = max(o.violation_fraction for o in rep.monotonicity)
    low_max = max(o.violation_fraction for o in rep.per_iterate_lower)
    high_max = max(o.violation_fraction for o in rep.per_iterate_upper)
    checks = [
        _check("sandwich_bracket_ordered", "violation_fraction",
               rep.order_checks["Y1<=Y2"].violation_fraction, r["p"]),
        _check("sandwich_monotone", "max_violation_fraction", mono_max, r["p"]),
        _check("sandwich_above_Y1", "max_violation_fraction", low_max, r["p"]),
        _check("sandwich_below_Y2", "max_violation_fraction", high_max, r["p"]),
        _check("sandwich_converged", "converged", float(rep.converged), 1.0, below=False),
    ]
    return ScenarioOutcome("sandwich", checks, plot_source=rep,
                           iteration_rows=_iteration_rows(rep))


def _shifted(gen: GeneratorSpec, shift: float) -> GeneratorSpec:
    base = gen.f

    def f(t, y, z):
        return np.asarray(base(t, y, z)) + shift

    from dataclasses import replace
    return replace(gen, f=f, name=f"{gen.name}+{shift}")


def _sc_comparison(r: dict) -> ScenarioOutcome:
    grid = make_uniform_grid(r["T"], r["n_steps"])
    g, c, alpha = builtin_g("linear_y", (0.3,))
    gen2 = builtin_generator("step_plus_linear", (1.0, 0.0)).with_g(g, c, alpha)
    gen1 = _shifted(gen2, r["f_shift"])
    p2 = BdsdeProblem(grid=grid, generator=gen2, terminal=builtin_terminal("w_abs"))
    p1 = BdsdeProblem(grid=grid, generator=gen1,
                      terminal=builtin_terminal("w_abs", (r["xi_shift"],)))
    noise = NoiseConfig(seed=r["seed"], m_outer=r["m_outer"], n_inner=r["n_inner"])
    verdict = comparison_experiment(p1, p2, noise, _iter_cfg(r),
                                    epsilon=r["epsilon"], p=r["p"])
    checks = [
        _check("comparison_preconditions", "preconditions_ok",
               float(verdict.preconditions_ok), 1.0, below=False),
        _check("comparison_confirmed", "confirmed", float(verdict.confirmed),
               1.0, below=False),
    ]
    if verdict.preconditions_ok:
        checks.append(_check("comparison_gap", "mean_gap", verdict.mean_gap,
                             0.1, below=False))
    return ScenarioOutcome("comparison", checks)


def _sc_maximal_h6(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    g, c, alpha = builtin_g("linear_y", (0.3,))
    gen = builtin_generator("step_threshold_rc", (1.0,)).with_g(g, c, alpha)
    problem = BdsdeProblem(grid=bundle.grid, generator=gen,
                           terminal=builtin_terminal("w_abs"))
    rep = run_maximal_h6(problem, bundle, _iter_cfg(r))
    mono_max = max(o.violation_fraction for o in rep.monotonicity)
    checks = [
        _check("maximal_converged", "converged", float(rep.converged), 1.0, below=False),
        _check("maximal_monotone_mirror", "max_violation_fraction", mono_max, r["p"]),
    ]
    return ScenarioOutcome("maximal-h6", checks, plot_source=rep,
                           iteration_rows=_iteration_rows(rep))


def _sc_negative_controls(r: dict) -> ScenarioOutcome:
    bundle = _bundle(r)
    rc, _ = lemma22_run(_lemma22_spec(r, "constant", (-1.0,)), bundle, _solver_cfg(r))
    grid = bundle.grid
    gen = builtin_generator("step_plus_linear", (1.0, 0.0))
    p2 = BdsdeProblem(grid=grid, generator=gen, terminal=builtin_terminal("w_abs"))
    p1 = BdsdeProblem(grid=grid, generator=gen,
                      terminal=builtin_terminal("w_abs", (-1.0,)))
    noise = NoiseConfig(seed=r["seed"], m_outer=r["m_outer"], n_inner=r["n_inner"])
    verdict = comparison_experiment(p1, p2, noise, _iter_cfg(r))
    checks = [
        _check("nonneg_control_fails", "violation_fraction", rc.violation_fraction,
               r["p"], below=False),
        _check("comparison_precondition_detected", "preconditions_not_ok",
               float(not verdict.preconditions_ok), 1.0, below=False),
    ]
    return ScenarioOutcome("negative-controls", checks)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    defaults: dict
    runner: Callable[[dict], ScenarioOutcome]


_DESK = {"T": 1.0, "n_steps": 100, "m_outer": 32, "n_inner": 2000}

SCENARIOS: dict[str, Scenario] = {
    s.name: s for s in [
        Scenario("ode-oracle",
                 "linear drift against the closed-form ODE solution",
                 {"T": 1.0, "n_steps": 200, "m_outer": 2, "n_inner": 64},
                 _sc_ode_oracle),
        Scenario("martingale",
                 "zero generator, terminal W_T: Y tracks W and Z tracks 1",
                 {"T": 1.0, "n_steps": 100, "m_outer": 2, "n_inner": 10000},
                 _sc_martingale),
        Scenario("backward-centering",
                 "pure-dB generator keeps the mean of Y0 at the terminal mean",
                 dict(_DESK), _sc_backward_centering),
        Scenario("lemma22",
                 "nonnegativity of the two linear-drift solutions plus a failing control",
                 dict(_DESK), _sc_lemma22),
        Scenario("step-minimal",
                 "increasing penalized iteration for a step drift",
                 dict(_DESK), _sc_step_minimal),
        Scenario("upper-bound",
                 "decreasing penalized iteration bounding the same step problem",
                 dict(_DESK), _sc_upper_bound),
        Scenario("sandwich",
                 "iteration bracketed by two Lipschitz bounding problems",
                 dict(_DESK), _sc_sandwich),
        Scenario("comparison",
                 "ordered problems on shared noise keep ordered minimal solutions",
                 dict(_DESK), _sc_comparison),
        Scenario("maximal-h6",
                 "right-continuous drift handled through the reflection mirror",
                 dict(_DESK), _sc_maximal_h6),
        Scenario("negative-controls",
                 "engineered violations must be detected by the order checks",
                 {"T": 1.0, "n_steps": 50, "m_outer": 8, "n_inner": 500},
                 _sc_negative_controls),
    ]
}


def run_scenario(name: str, resolved: dict) -> ScenarioOutcome:
    if name not in SCENARIOS:
        known = ", ".join(sorted(SCENARIOS))
        from .errors import InvalidArgument
        raise InvalidArgument(f"unknown scenario {name!r}; valid names: {known}")
    return SCENARIOS[name].runner(resolved)


def catalog_lines() -> list[str]:
    return [f"{s.name}: {s.description}" for s in SCENARIOS.values()]
