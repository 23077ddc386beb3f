"""Command-line entry point: run a scenario config, emit CSV/JSON artifacts."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Union

import numpy as np

from . import __version__
from .config import RunManifest, load_config, resolve
from .errors import BdsdeError, InvalidArgument
from .iteration import IterationReport
from .noise import RNG_METHOD
from .scenarios import SCENARIOS, ScenarioOutcome, run_scenario
from .solver import DiscreteSolution
from .verify import mean_ci

_FLOAT_FMT = "%.12g"

RESULTS_HEADER = "scenario,check,metric,value,threshold,pass"
PLOT_HEADER = "series,t,mean,ci_lo,ci_hi"
ITERATIONS_HEADER = "iteration,delta,mono_violation_fraction,norm_sup_Y2,norm_int_Z2"


def _fmt(x: float) -> str:
    return _FLOAT_FMT % float(x)


def results_csv(outcome: ScenarioOutcome) -> str:
    lines = [RESULTS_HEADER]
    for row in outcome.checks:
        lines.append(",".join([
            outcome.scenario, row.check, row.metric,
            _fmt(row.value), _fmt(row.threshold),
            "true" if row.passed else "false",
        ]))
    return "\n".join(lines) + "\n"


def iterations_csv(outcome: ScenarioOutcome) -> str:
    lines = [ITERATIONS_HEADER]
    for r in outcome.iteration_rows:
        lines.append(",".join([
            str(r["iteration"]), _fmt(r["delta"]),
            _fmt(r["mono_violation_fraction"]),
            _fmt(r["norm_sup_Y2"]), _fmt(r["norm_int_Z2"]),
        ]))
    return "\n".join(lines) + "\n"


def _plot_rows_solution(sol: DiscreteSolution) -> list[str]:
    rows = []
    nodes = sol.grid.nodes
    for series, values in (("Y", sol.Y), ("Z", sol.Z[:, :, :, 0])):
        for k, t in enumerate(nodes):
            cloud = values[:, :, k].ravel()
            m = float(cloud.mean())
            if cloud.std() == 0.0:
                lo = hi = m
            else:
                lo, hi = mean_ci(cloud)
            rows.append(",".join([series, _fmt(t), _fmt(m), _fmt(lo), _fmt(hi)]))
    return rows


def _plot_rows_iteration(rep: IterationReport) -> list[str]:
    rows = []
    for summary in rep.iterates:
        series = f"iterate-{summary.index:02d}"
        for t, m, h in zip(rep.final.grid.nodes, summary.node_means,
                           summary.node_half_width):
            rows.append(",".join([series, _fmt(t), _fmt(m),
                                  _fmt(m - h), _fmt(m + h)]))
    return rows


def emit_plot_data(report: Union[DiscreteSolution, IterationReport], path) -> None:
    """Write per-node mean and 95% interval curves as CSV."""
    if isinstance(report, DiscreteSolution):
        rows = _plot_rows_solution(report)
    elif isinstance(report, IterationReport):
        rows = _plot_rows_iteration(report)
    else:
        raise InvalidArgument(f"cannot plot object of type {type(report).__name__}")
    Path(path).write_text(PLOT_HEADER + "\n" + "\n".join(rows) + "\n",
                          encoding="utf-8")


def list_scenarios(out=None) -> None:
    for s in SCENARIOS.values():
        print(f"{s.name}: {s.description}", file=out or sys.stdout)


def run(config_path, out_dir, seed=None, quiet=False) -> int:
    config = load_config(config_path)
    name = config["scenario"]
    if name not in SCENARIOS:
        known = ", ".join(sorted(SCENARIOS))
        raise InvalidArgument(f"unknown scenario {name!r}; valid names: {known}")
    if seed is not None:
        config["seed"] = seed
    resolved = resolve(config, SCENARIOS[name].defaults)
    resolved.pop("scenario", None)

    start = time.monotonic()
    outcome = run_scenario(name, resolved)
    duration = time.monotonic() - start

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(outcome), encoding="utf-8")
    (out / "iterations.csv").write_text(iterations_csv(outcome), encoding="utf-8")
    if outcome.plot_source is not None:
        emit_plot_data(outcome.plot_source, out / "plot.csv")

    checks = {row.check: {"metric": row.metric, "value": row.value,
                          "threshold": row.threshold, "pass": row.passed}
              for row in outcome.checks}
    if name in ("comparison", "negative-controls"):
        pre = next((r for r in outcome.checks
                    if r.check == "comparison_preconditions"), None)
        if pre is not None:
            checks["preconditions_ok"] = bool(pre.value >= 1.0)
    manifest = RunManifest(scenario=name, resolved_config=resolved,
                           code_version=__version__, rng_method=RNG_METHOD,
                           duration_seconds=duration, checks=checks)
    (out / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")

    if not quiet:
        for row in outcome.checks:
            status = "PASS" if row.passed else "FAIL"
            print(f"[{status}] {name}/{row.check}: {row.metric} = {_fmt(row.value)}"
                  f" (threshold {_fmt(row.threshold)})")
        print(f"artifacts written to {out}")
    return 0 if outcome.all_passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdsdelab",
        description="Run backward doubly stochastic experiment scenarios.")
    parser.add_argument("--config", help="path to a key = value scenario config")
    parser.add_argument("--out", default="./out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--list", action="store_true",
                        help="list available scenarios and exit")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress per-check console output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        list_scenarios()
        return 0
    if args.config is None:
        print("error: --config is required unless --list is given", file=sys.stderr)
        return 1
    try:
        return run(args.config, args.out, seed=args.seed, quiet=args.quiet)
    except (BdsdeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
