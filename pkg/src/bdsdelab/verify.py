"""Statistical order checks, closed-form oracles, and paired experiments.

Almost-sure inequalities from the continuous theory are checked here as
violation-fraction statements over the whole (outer, inner, node) cloud;
comparison experiments always couple the two runs on one shared noise bundle.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument
from .grids import TimeGrid
from .noise import BrownianBundle, NoiseConfig, generate, w_node_values
from .problem import (
    BdsdeProblem,
    GeneratorSpec,
    TerminalSpec,
    _probe_points,
    builtin_generator,
)
from .solver import DiscreteSolution, SolverConfig, backward_sweep, terminal_values

DEFAULT_EPSILON = 0.02
DEFAULT_P = 0.01


@dataclass(frozen=True)
class OrderReport:
    """Statistical verdict on a <= b over a sample cloud."""

    violation_fraction: float
    max_violation: float
    mean_gap: float
    epsilon: float
    p: float

    @property
    def passed(self) -> bool:
        return self.violation_fraction < self.p


def order_report_from_arrays(a: np.ndarray, b: np.ndarray,
                             epsilon: float, p: float) -> OrderReport:
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch: {a.shape} vs {b.shape}")
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    if not 0 < p < 1:
        raise InvalidArgument("p must lie in (0, 1)")
    excess = a - b
    return OrderReport(
        violation_fraction=float(np.mean(excess > epsilon)),
        max_violation=float(max(excess.max(), 0.0)),
        mean_gap=float(np.mean(b - a)),
        epsilon=epsilon,
        p=p,
    )


def check_order(a: DiscreteSolution, b: DiscreteSolution,
                epsilon: float = DEFAULT_EPSILON, p: float = DEFAULT_P) -> OrderReport:
    """Check a.Y <= b.Y over all (outer, inner, node) points."""
    if a.grid != b.grid:
        raise InvalidArgument("solutions live on different grids")
    return order_report_from_arrays(a.Y, b.Y, epsilon, p)


def check_nonnegativity(sol: DiscreteSolution, epsilon: float = DEFAULT_EPSILON,
                        p: float = DEFAULT_P) -> OrderReport:
    return order_report_from_arrays(np.zeros_like(sol.Y), sol.Y, epsilon, p)


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------

def oracle_ode(a: float, c0: float, xi0: float, grid: TimeGrid) -> np.ndarray:
    """Deterministic solution of Y'(t) = -a Y - c0, Y(T) = xi0, at the nodes."""
    tau = grid.horizon - grid.nodes
    if a == 0.0:
        return xi0 + c0 * tau
    e = np.exp(a * tau)
    return xi0 * e + (c0 / a) * (e - 1.0)


def oracle_martingale(bundle: BrownianBundle):
    """Reference for f = g = 0, terminal = W_T (d = 1): Y = W path, Z = 1."""
    if bundle.config.d != 1:
        raise InvalidArgument("martingale oracle requires d = 1")
    w = w_node_values(bundle)[:, :, :, 0]
    z = np.ones_like(w)
    return w, z


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation confidence interval for the mean."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise InvalidArgument("mean_ci needs at least 2 values")
    if not 0 < level < 1:
        raise InvalidArgument("level must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    half = z * float(v.std()) / np.sqrt(v.size)
    m = float(v.mean())
    return m - half, m + half


# ---------------------------------------------------------------------------
# Lemma-style nonnegativity experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lemma22Spec:
    """Linear drifts l*y + m|z| and l|y| + m|z| plus a nonnegative forcing phi."""

    l: float
    m: float
    phi: Callable[[float, np.ndarray], np.ndarray]  # (t, W values) -> nonneg
    terminal: TerminalSpec
    g: Callable
    g_c: float = 0.0
    g_alpha: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    p: float = DEFAULT_P


def lemma22_run(spec: Lemma22Spec, bundle: BrownianBundle,
                solver_cfg: SolverConfig) -> tuple[OrderReport, OrderReport]:
    """Solve both forced equations on the shared bundle; nonnegativity reports."""
    reports = []
    for name in ("lemma22_f1", "lemma22_f2"):
        gen = builtin_generator(name, (spec.l, spec.m)).with_g(
            spec.g, spec.g_c, spec.g_alpha)
        problem = BdsdeProblem(grid=bundle.grid, generator=gen,
                               terminal=spec.terminal,
                               d=bundle.config.d, l=bundle.config.l)
        base_f = gen.f

        def drift(sl, k, t, y, z, w, _f=base_f):
            m_, nin = y.shape
            fv = np.asarray(_f(t, y.reshape(-1), z.reshape(m_ * nin, -1)))
            phi = np.asarray(spec.phi(t, w[..., 0].reshape(-1)), dtype=np.float64)
            if np.any(phi < 0):
                raise InvalidArgument("phi must be nonnegative")
            return (fv + phi).reshape(m_, nin)

        sol = backward_sweep(problem, bundle, solver_cfg, drift=drift)
        reports.append(check_nonnegativity(sol, spec.epsilon, spec.p))
    return reports[0], reports[1]


# ---------------------------------------------------------------------------
# comparison of minimal solutions on coupled noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonVerdict:
    preconditions_ok: bool
    order_report: Optional[OrderReport]
    seed: int
    mean_gap: float

    @property
    def confirmed(self) -> bool:
        return self.preconditions_ok and self.order_report is not None \
            and self.order_report.passed


def comparison_experiment(p1: BdsdeProblem, p2: BdsdeProblem,
                          noise: NoiseConfig, iter_cfg,
                          epsilon: float = DEFAULT_EPSILON,
                          p: float = DEFAULT_P) -> ComparisonVerdict:
    """Minimal solutions of two ordered problems on one shared bundle.

    Preconditions (terminal ordering samplewise, drift ordering on the probe
    set) are checked first; on failure no order claim is made.
    """
    from .iteration import run_minimal  # local import to avoid a cycle

    if p1.grid != p2.grid or p1.d != p2.d or p1.l != p2.l:
        raise InvalidArgument("compared problems must share grid and dimensions")
    bundle = generate(p1.grid, noise)

    xi1 = terminal_values(p1, bundle)
    xi2 = terminal_values(p2, bundle)
    pre_ok = bool(np.all(xi1 >= xi2 - 1e-12))
    ts, ys, zs = _probe_points(p1.grid.horizon, p1.d)
    for i in range(len(ts)):
        f1v = float(np.asarray(p1.generator.f(ts[i], np.array([ys[i]]),
                                              zs[i].reshape(1, -1)))[0])
        f2v = float(np.asarray(p2.generator.f(ts[i], np.array([ys[i]]),
                                              zs[i].reshape(1, -1)))[0])
        if f1v < f2v - 1e-12:
            pre_ok = False
            break
    if not pre_ok:
        return ComparisonVerdict(preconditions_ok=False, order_report=None,
                                 seed=noise.seed, mean_gap=float("nan"))

    sol1 = run_minimal(p1, bundle, iter_cfg).final
    sol2 = run_minimal(p2, bundle, iter_cfg).final
    report = check_order(sol2, sol1, epsilon, p)
    return ComparisonVerdict(preconditions_ok=True, order_report=report,
                             seed=noise.seed, mean_gap=report.mean_gap)
