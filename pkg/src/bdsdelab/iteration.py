"""Monotone penalization schemes built on the Lipschitz backward sweep.

The constructive ladder: envelope equations with drifts -K|y| - K|z| - |f(t,0,0)|
(below) and +K|y| + K|z| + |f(t,0,0)| (above) bracket every iterate; each
iteration freezes the rough drift at the previous iterate's sampled paths and
adds the linear/absolute penalty -K(y - y_prev) +- K|z - z_prev|, which is
globally Lipschitz no matter how discontinuous the base drift is.  Increasing
iterations approach the minimal solution; the decreasing variant yields an
upper bound that is reported as a bound, never as a solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .noise import BrownianBundle
from .problem import (
    AssumptionProfile,
    BdsdeProblem,
    GeneratorSpec,
    Mode,
    TerminalKind,
    TerminalSpec,
    validate,
)
from .solver import DiscreteSolution, SolverConfig, backward_sweep, build_projector_cache
from .verify import OrderReport, check_order


class Direction(Enum):
    MINIMAL = "MINIMAL"
    UPPER_BOUND = "UPPER_BOUND"
    SANDWICH = "SANDWICH"
    MAXIMAL_H6 = "MAXIMAL_H6"


@dataclass(frozen=True)
class IterationConfig:
    K: Optional[float] = None  # defaults to the generator's declared constant
    tol_iter: float = 1e-3
    i_max: int = 25
    solver: SolverConfig = field(default_factory=SolverConfig)
    epsilon_order: float = 0.01
    p_order: float = 0.01

    def __post_init__(self):
        if not self.tol_iter > 0:
            raise InvalidArgument("tol_iter must be positive")
        if self.i_max < 1:
            raise InvalidArgument("i_max must be >= 1")


@dataclass(frozen=True)
class IterateSummary:
    index: int
    node_means: np.ndarray
    node_half_width: np.ndarray  # 95% normal half-width per node
    norm_sup_Y2: float
    norm_int_Z2: float


@dataclass(frozen=True)
class IterationReport:
    direction: Direction
    iterates: list[IterateSummary]
    deltas: list[float]
    monotonicity: list[OrderReport]
    per_iterate_lower: list[OrderReport]  # bracket_low <= iterate_i
    per_iterate_upper: list[OrderReport]  # iterate_i <= bracket_high
    uniform_bound: float
    converged: bool
    final: DiscreteSolution
    bounds: dict[str, DiscreteSolution]
    order_checks: dict[str, OrderReport]


# ---------------------------------------------------------------------------
# envelope equations
# ---------------------------------------------------------------------------

def _envelope_drift(f, K: float, sign: int):
    def drift(sl, k, t, y, z, w):
        d = z.shape[-1]
        f00 = abs(float(np.asarray(f(t, np.zeros(1), np.zeros((1, d))))[0]))
        return sign * (K * np.abs(y) + K * np.linalg.norm(z, axis=-1) + f00)
    return drift


def _require_profile(problem: BdsdeProblem, mode: Mode) -> None:
    report = validate(problem, AssumptionProfile(mode))
    if not report.ok:
        msgs = "; ".join(f"{hid}: {msg}" for hid, msg, _ in report.violations)
        raise InvalidArgument(f"profile {mode.value} not satisfied ({msgs})")


def _resolved_K(problem: BdsdeProblem, cfg: IterationConfig) -> float:
    return problem.generator.K if cfg.K is None else cfg.K


def lower_envelope(problem: BdsdeProblem, bundle: BrownianBundle,
                   cfg: IterationConfig, projectors=None) -> DiscreteSolution:
    """Solve the Lipschitz equation with drift -K|y| - K|z| - |f(t,0,0)|."""
    K = _resolved_K(problem, cfg)
    return backward_sweep(problem, bundle, cfg.solver,
                          drift=_envelope_drift(problem.generator.f, K, -1),
                          projectors=projectors)


def upper_envelope(problem: BdsdeProblem, bundle: BrownianBundle,
                   cfg: IterationConfig, projectors=None) -> DiscreteSolution:
    """Mirror of lower_envelope with drift +K|y| + K|z| + |f(t,0,0)|."""
    K = _resolved_K(problem, cfg)
    return backward_sweep(problem, bundle, cfg.solver,
                          drift=_envelope_drift(problem.generator.f, K, +1),
                          projectors=projectors)


# ---------------------------------------------------------------------------
# penalized drift anchored at a previous iterate
# ---------------------------------------------------------------------------

class PenalizedDrift:
    """f frozen at the previous iterate plus the contraction penalty.

    F(t, y, z) = f(t, y_prev, z_prev) - K (y - y_prev) + sign * K |z - z_prev|
    with (y_prev, z_prev) read pathwise at the matching (outer, inner, node);
    F is affine in y with slope -K and K-Lipschitz in z.
    """

    def __init__(self, f_base, prev: DiscreteSolution, K: float, sign: int):
        if sign not in (-1, +1):
            raise InvalidArgument("sign must be -1 or +1")
        self.f_base = f_base
        self.prev = prev
        self.K = K
        self.sign = sign

    def evaluate(self, t, y, z, y_anchor, z_anchor):
        y = np.asarray(y, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        fv = np.asarray(self.f_base(t, np.asarray(y_anchor, dtype=np.float64),
                                    np.asarray(z_anchor, dtype=np.float64)))
        pen_y = -self.K * (y - y_anchor)
        pen_z = self.sign * self.K * np.linalg.norm(z - z_anchor, axis=-1)
        return fv + pen_y + pen_z

    def __call__(self, sl, k, t, y, z, w):
        m, nin = y.shape
        y_prev = self.prev.Y[sl, :, k]
        z_prev = self.prev.Z[sl, :, k, :]
        fv = np.asarray(self.f_base(t, y_prev.reshape(-1),
                                    z_prev.reshape(m * nin, -1))).reshape(m, nin)
        pen_y = -self.K * (y - y_prev)
        pen_z = self.sign * self.K * np.linalg.norm(z - z_prev, axis=-1)
        return fv + pen_y + pen_z


def penalized(f_base: GeneratorSpec, prev: DiscreteSolution, K: float,
              sign: int, bundle: Optional[BrownianBundle] = None) -> PenalizedDrift:
    """Build the penalized drift; checks grid/cloud agreement when a bundle is given."""
    if bundle is not None:
        m, nin = bundle.config.m_outer, bundle.dW.shape[1]
        want = (m, nin, bundle.grid.n_steps + 1)
        if prev.Y.shape != want or prev.grid != bundle.grid:
            raise InvalidArgument(
                f"previous iterate shape {prev.Y.shape} does not match cloud {want}")
    return PenalizedDrift(f_base.f, prev, K, sign)


# ---------------------------------------------------------------------------
# iteration drivers
# ---------------------------------------------------------------------------

_Z95 = 1.959963984540054


def _summary(index: int, sol: DiscreteSolution) -> IterateSummary:
    m, nin, _ = sol.Y.shape
    half = _Z95 * sol.Y.std(axis=(0, 1)) / np.sqrt(m * nin)
    return IterateSummary(index=index, node_means=sol.node_means(),
                          node_half_width=half,
                          norm_sup_Y2=sol.norm_sup_Y2, norm_int_Z2=sol.norm_int_Z2)


def _delta(a: DiscreteSolution, b: DiscreteSolution) -> float:
    return float(np.abs(a.Y - b.Y).mean(axis=(0, 1)).max())


def _iterate(problem: BdsdeProblem, bundle: BrownianBundle, cfg: IterationConfig,
             direction: Direction, start: DiscreteSolution, sign: int,
             bracket_low: Optional[DiscreteSolution],
             bracket_high: Optional[DiscreteSolution],
             bounds: dict, order_checks: dict, projectors=None) -> IterationReport:
    K = _resolved_K(problem, cfg)
    eps, p = cfg.epsilon_order, cfg.p_order

    iterates = [_summary(0, start)]
    deltas: list[float] = []
    mono: list[OrderReport] = []
    lows: list[OrderReport] = []
    highs: list[OrderReport] = []
    uniform_bound = start.norm_sup_Y2 + start.norm_int_Z2
    converged = False
    prev = start
    for i in range(1, cfg.i_max + 1):
        drift = penalized(problem.generator, prev, K, sign, bundle)
        sol = backward_sweep(problem, bundle, cfg.solver, drift=drift,
                             projectors=projectors)
        deltas.append(_delta(sol, prev))
        if sign < 0:
            mono.append(check_order(prev, sol, eps, p))  # increasing
        else:
            mono.append(check_order(sol, prev, eps, p))  # decreasing
        if bracket_low is not None:
            lows.append(check_order(bracket_low, sol, eps, p))
        if bracket_high is not None:
            highs.append(check_order(sol, bracket_high, eps, p))
        iterates.append(_summary(i, sol))
        uniform_bound = max(uniform_bound, sol.norm_sup_Y2 + sol.norm_int_Z2)
        prev = sol
        if deltas[-1] < cfg.tol_iter:
            converged = True
            break

    if bracket_low is not None:
        order_checks["bracket_low<=final"] = check_order(bracket_low, prev, eps, p)
    if bracket_high is not None:
        order_checks["final<=bracket_high"] = check_order(prev, bracket_high, eps, p)
    return IterationReport(
        direction=direction, iterates=iterates, deltas=deltas, monotonicity=mono,
        per_iterate_lower=lows, per_iterate_upper=highs,
        uniform_bound=uniform_bound, converged=converged, final=prev,
        bounds=bounds, order_checks=order_checks,
    )


def run_minimal(problem: BdsdeProblem, bundle: BrownianBundle,
                cfg: IterationConfig) -> IterationReport:
    """Increasing iteration from the lower envelope toward the minimal solution."""
    _require_profile(problem, Mode.MINIMAL_H5)
    projs = build_projector_cache(bundle, cfg.solver.basis.degree)
    low = lower_envelope(problem, bundle, cfg, projectors=projs)
    high = upper_envelope(problem, bundle, cfg, projectors=projs)
    return _iterate(problem, bundle, cfg, Direction.MINIMAL, start=low, sign=-1,
                    bracket_low=low, bracket_high=high,
                    bounds={"lower_envelope": low, "upper_envelope": high},
                    order_checks={}, projectors=projs)


def run_upper_bound(problem: BdsdeProblem, bundle: BrownianBundle,
                    cfg: IterationConfig) -> IterationReport:
    """Decreasing iteration from the upper envelope.

    The limit is reported as an upper bound only; nothing here claims it
    solves the original equation.
    """
    _require_profile(problem, Mode.MINIMAL_H5)
    projs = build_projector_cache(bundle, cfg.solver.basis.degree)
    low = lower_envelope(problem, bundle, cfg, projectors=projs)
    high = upper_envelope(problem, bundle, cfg, projectors=projs)
    return _iterate(problem, bundle, cfg, Direction.UPPER_BOUND, start=high, sign=+1,
                    bracket_low=low, bracket_high=high,
                    bounds={"lower_envelope": low, "upper_envelope": high},
                    order_checks={}, projectors=projs)


def run_sandwich(problem: BdsdeProblem, bundle: BrownianBundle,
                 cfg: IterationConfig) -> IterationReport:
    """Increasing iteration started from the lower bracketing solution.

    Solves the two bracketing Lipschitz problems first; iterates stay between
    them.  The bracket ordering on solutions is checked a posteriori and
    reported, never assumed.  No minimality claim attaches to the limit.
    """
    _require_profile(problem, Mode.SANDWICH_H2)
    projs = build_projector_cache(bundle, cfg.solver.basis.degree)
    f1, f2 = problem.bounding_pair
    sol1 = backward_sweep(replace(problem, generator=f1.with_g(
        problem.generator.g, problem.generator.c, problem.generator.alpha),
        bounding_pair=None), bundle, cfg.solver, projectors=projs)
    sol2 = backward_sweep(replace(problem, generator=f2.with_g(
        problem.generator.g, problem.generator.c, problem.generator.alpha),
        bounding_pair=None), bundle, cfg.solver, projectors=projs)
    order_checks = {"Y1<=Y2": check_order(sol1, sol2, cfg.epsilon_order, cfg.p_order)}
    return _iterate(problem, bundle, cfg, Direction.SANDWICH, start=sol1, sign=-1,
                    bracket_low=sol1, bracket_high=sol2,
                    bounds={"Y1": sol1, "Y2": sol2}, order_checks=order_checks,
                    projectors=projs)


# ---------------------------------------------------------------------------
# maximal solutions via reflection
# ---------------------------------------------------------------------------

def reflect_problem(problem: BdsdeProblem) -> BdsdeProblem:
    """Mirror y -> -y: negates terminal and both coefficients at (-y, -z).

    An involution at floating-point level: reflecting twice evaluates to
    bit-identical values.
    """
    spec = problem.generator
    base_f, base_g = spec.f, spec.g

    def f_ref(t, y, z):
        return -np.asarray(base_f(t, -np.asarray(y), -np.asarray(z)))

    def g_ref(t, y, z):
        return -np.asarray(base_g(t, -np.asarray(y), -np.asarray(z)))

    gen = replace(
        spec, f=f_ref, g=g_ref,
        f_left_continuous=spec.f_right_continuous_H6,
        f_right_continuous_H6=spec.f_left_continuous,
        name=f"reflected({spec.name})",
    )
    term = problem.terminal
    if term.kind is TerminalKind.CONSTANT:
        base_payoff = term.payoff
        payoff = lambda _p=base_payoff: -_p()
    else:
        base_payoff = term.payoff
        payoff = lambda *args, _p=base_payoff: -np.asarray(_p(*args))
    term_ref = TerminalSpec(kind=term.kind, payoff=payoff,
                            name=f"reflected({term.name})")
    return replace(problem, generator=gen, terminal=term_ref)


def _negate_solution(sol: DiscreteSolution) -> DiscreteSolution:
    return replace(sol, Y=-sol.Y, Z=-sol.Z)


def run_maximal_h6(problem: BdsdeProblem, bundle: BrownianBundle,
                   cfg: IterationConfig) -> IterationReport:
    """Maximal-solution candidate: minimal run on the reflected problem, negated.

    Monotonicity and bracket reports are those of the reflected (increasing)
    run; on the original scale the iteration is decreasing.
    """
    _require_profile(problem, Mode.MAXIMAL_H6)
    rep = run_minimal(reflect_problem(problem), bundle, cfg)
    return replace(
        rep, direction=Direction.MAXIMAL_H6,
        final=_negate_solution(rep.final),
        bounds={k: _negate_solution(v) for k, v in rep.bounds.items()},
    )
