"""Problem definitions: generator pairs, terminal data, and assumption checks.

Drift functions have signature ``f(t, y, z) -> array`` where ``y`` has shape
``(n,)`` and ``z`` has shape ``(n, d)``; the backward-diffusion coefficient
``g(t, y, z)`` returns shape ``(n, l)``.  All builtins are vectorized numpy
functions of this form.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument
from .grids import TimeGrid

#: tolerance separating genuine assumption violations from rounding
ALGEBRA_TOL = 1e-9

#: probe values straddling the builtin step thresholds
PROBE_LATTICE = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)

_PROBE_SEED = 20240817
_N_RANDOM_PROBES = 100


@dataclass(frozen=True)
class GeneratorSpec:
    """The coefficient pair (f, g) with its regularity constants and flags."""

    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    K: float
    c: float = 0.0
    alpha: float = 0.0
    f_left_continuous: bool = True
    f_left_lipschitz: bool = True
    f_lipschitz_z: bool = True
    f_linear_growth_H5: bool = True
    f_right_continuous_H6: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.K < 0:
            raise InvalidArgument(f"K must be nonnegative, got {self.K}")
        if self.c < 0:
            raise InvalidArgument(f"c must be nonnegative, got {self.c}")
        if not self.alpha < 1:
            raise InvalidArgument(f"alpha must be < 1, got {self.alpha}")

    def with_g(self, g, c: float, alpha: float) -> "GeneratorSpec":
        """Attach a backward-diffusion coefficient with its own constants."""
        return replace(self, g=g, c=c, alpha=alpha)


class TerminalKind(Enum):
    CONSTANT = "constant"
    FUNCTION_OF_WT = "function-of-W_T"
    FUNCTION_OF_WT_BPATH = "function-of-(W_T, B-path)"


@dataclass(frozen=True)
class TerminalSpec:
    """Terminal datum: a payoff of the declared inputs at time T."""

    kind: TerminalKind
    payoff: Callable
    name: str = "custom"


class Mode(Enum):
    SANDWICH_H2 = "SANDWICH_H2"
    MINIMAL_H5 = "MINIMAL_H5"
    MAXIMAL_H6 = "MAXIMAL_H6"


@dataclass(frozen=True)
class AssumptionProfile:
    mode: Mode


@dataclass(frozen=True)
class BdsdeProblem:
    """A full problem instance on a time grid."""

    grid: TimeGrid
    generator: GeneratorSpec
    terminal: TerminalSpec
    d: int = 1
    l: int = 1
    bounding_pair: Optional[tuple[GeneratorSpec, GeneratorSpec]] = None

    def __post_init__(self):
        if self.d < 1 or self.l < 1:
            raise InvalidArgument("noise dimensions d and l must be positive")


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple = ()


# ---------------------------------------------------------------------------
# builtin drift catalog
# ---------------------------------------------------------------------------

def _as_drift(fn):
    def drift(t, y, z):
        y = np.asarray(y, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        return fn(t, y, z)
    return drift


def _znorm(z):
    return np.linalg.norm(z, axis=-1)


def zero_g(t, y, z):
    y = np.asarray(y, dtype=np.float64)
    return np.zeros(y.shape + (1,))


def builtin_g(name: str, params: tuple = ()) -> tuple[Callable, float, float]:
    """Catalog of backward-diffusion coefficients: (g, c, alpha)."""
    if name == "zero":
        return zero_g, 0.0, 0.0
    if name == "linear_y":
        (b,) = params

        def g(t, y, z):
            y = np.asarray(y, dtype=np.float64)
            return (b * y)[..., None]

        return g, float(b * b), 0.0
    raise InvalidArgument(f"unknown builtin g {name!r}; known: zero, linear_y(b)")


def builtin_generator(name: str, params: tuple = ()) -> GeneratorSpec:
    """Catalog of drift generators used by the scenarios and tests.

    All entries are left-continuous and one-sidedly (left-) Lipschitz; the
    step drifts jump upward and are discontinuous from the right.
    """
    if name == "zero":
        return GeneratorSpec(
            f=_as_drift(lambda t, y, z: np.zeros_like(y)),
            g=zero_g, K=0.0, f_right_continuous_H6=True, name="zero",
        )
    if name == "linear":
        a, c0 = params

        def f_lin(t, y, z):
            return a * y + c0

        return GeneratorSpec(
            f=_as_drift(f_lin), g=zero_g, K=abs(float(a)),
            f_right_continuous_H6=True, name=f"linear({a},{c0})",
        )
    if name == "step_threshold":
        (h,) = params
        if h <= 0:
            raise InvalidArgument("step_threshold requires h > 0")

        def f_step(t, y, z):
            return (y > h).astype(np.float64)

        return GeneratorSpec(
            f=_as_drift(f_step), g=zero_g, K=1.0 / h, name=f"step_threshold({h})",
        )
    if name == "step_threshold_rc":
        # right-continuous mirror of step_threshold, for the maximal scheme
        (h,) = params
        if h <= 0:
            raise InvalidArgument("step_threshold_rc requires h > 0")

        def f_step_rc(t, y, z):
            return (y >= h).astype(np.float64)

        return GeneratorSpec(
            f=_as_drift(f_step_rc), g=zero_g, K=1.0 / h,
            f_left_continuous=False, f_right_continuous_H6=True,
            name=f"step_threshold_rc({h})",
        )
    if name == "step_plus_linear":
        h, a = params
        if h <= 0:
            raise InvalidArgument("step_plus_linear requires h > 0")

        def f_sl(t, y, z):
            return (y > h).astype(np.float64) + a * y

        return GeneratorSpec(
            f=_as_drift(f_sl), g=zero_g, K=abs(float(a)) + 1.0 / h,
            name=f"step_plus_linear({h},{a})",
        )
    if name == "lemma22_f1":
        l_, m = params

        def f1(t, y, z):
            return l_ * y + m * _znorm(z)

        return GeneratorSpec(
            f=_as_drift(f1), g=zero_g, K=max(abs(float(l_)), abs(float(m))),
            f_right_continuous_H6=True, name=f"lemma22_f1({l_},{m})",
        )
    if name == "lemma22_f2":
        l_, m = params

        def f2(t, y, z):
            return l_ * np.abs(y) + m * _znorm(z)

        return GeneratorSpec(
            f=_as_drift(f2), g=zero_g, K=max(abs(float(l_)), abs(float(m))),
            f_right_continuous_H6=True, name=f"lemma22_f2({l_},{m})",
        )
    raise InvalidArgument(
        f"unknown builtin generator {name!r}; known: zero, linear(a,c0), "
        "step_threshold(h), step_threshold_rc(h), step_plus_linear(h,a), "
        "lemma22_f1(l,m), lemma22_f2(l,m)"
    )


def builtin_terminal(name: str, params: tuple = ()) -> TerminalSpec:
    """Catalog of terminal payoffs addressed from scenario configs."""
    if name == "constant":
        (v,) = params
        return TerminalSpec(TerminalKind.CONSTANT, lambda: float(v), name=f"constant({v})")
    if name == "w_identity":
        return TerminalSpec(
            TerminalKind.FUNCTION_OF_WT, lambda wT: wT[..., 0], name="w_identity",
        )
    if name == "w_abs":
        shift = params[0] if params else 0.0
        return TerminalSpec(
            TerminalKind.FUNCTION_OF_WT,
            lambda wT: np.abs(wT[..., 0]) + shift,
            name=f"w_abs({shift})" if shift else "w_abs",
        )
    raise InvalidArgument(
        f"unknown builtin terminal {name!r}; known: constant(v), w_identity, w_abs([shift])"
    )


# ---------------------------------------------------------------------------
# assumption validation
# ---------------------------------------------------------------------------

def _probe_points(T: float, d: int):
    """Deterministic lattice plus seeded random probes in (t, y, z)."""
    ts, ys, zs = [], [], []
    for t in (0.0, T / 2.0, T):
        for y in PROBE_LATTICE:
            for zv in PROBE_LATTICE:
                z = np.zeros(d)
                z[0] = zv
                ts.append(t)
                ys.append(y)
                zs.append(z)
    rng = np.random.default_rng(_PROBE_SEED)
    for _ in range(_N_RANDOM_PROBES):
        ts.append(float(rng.uniform(0.0, T)))
        ys.append(float(rng.uniform(-3.0, 3.0)))
        zs.append(rng.uniform(-3.0, 3.0, size=d))
    return np.array(ts), np.array(ys), np.array(zs)


def _f_at(spec: GeneratorSpec, t: float, y: float, z: np.ndarray) -> float:
    return float(np.asarray(spec.f(t, np.array([y]), z.reshape(1, -1)))[0])


def _mode_flag_requirements(mode: Mode):
    if mode is Mode.SANDWICH_H2:
        return (("H1", "f_left_continuous"), ("H1", "f_lipschitz_z"),
                ("H3", "f_left_lipschitz"))
    if mode is Mode.MINIMAL_H5:
        return (("H1", "f_left_continuous"), ("H1", "f_lipschitz_z"),
                ("H3", "f_left_lipschitz"), ("H5", "f_linear_growth_H5"))
    return (("H6", "f_right_continuous_H6"), ("H6", "f_lipschitz_z"),
            ("H3", "f_left_lipschitz"), ("H5", "f_linear_growth_H5"))


def validate(problem: BdsdeProblem, profile: AssumptionProfile) -> ValidationReport:
    """Spot-check the declared assumptions on a fixed probe set.

    Violations are data, not errors: the report lists every failure with a
    witness point where one exists.  Two calls on identical inputs produce
    identical reports.
    """
    spec = problem.generator
    violations: list[tuple[str, str, object]] = []

    if not spec.alpha < 1:
        violations.append(("H4", "alpha must be < 1", spec.alpha))
    for hid, flag in _mode_flag_requirements(profile.mode):
        if not getattr(spec, flag):
            violations.append((hid, f"{flag} flag required for {profile.mode.value}", None))

    T, d = problem.grid.horizon, problem.d
    ts, ys, zs = _probe_points(T, d)
    npts = len(ts)

    # H3: left Lipschitz in y, combined with the H1 z-term (Remark 2.3 bound)
    if spec.f_left_lipschitz:
        for i in range(0, npts - 1, 2):
            t = ts[i]
            y1, y2 = max(ys[i], ys[i + 1]), min(ys[i], ys[i + 1])
            z = zs[i]
            gap = _f_at(spec, t, y1, z) - _f_at(spec, t, y2, z) + spec.K * (y1 - y2)
            if gap < -ALGEBRA_TOL:
                violations.append(("H3", "left-Lipschitz bound violated", (t, y1, y2, z.tolist())))
                break

    # H1: Lipschitz in z
    if spec.f_lipschitz_z:
        for i in range(0, npts - 1, 2):
            t, y = ts[i], ys[i]
            z1, z2 = zs[i], zs[i + 1]
            lhs = abs(_f_at(spec, t, y, z1) - _f_at(spec, t, y, z2))
            if lhs > spec.K * np.linalg.norm(z1 - z2) + ALGEBRA_TOL:
                violations.append(("H1", "z-Lipschitz bound violated", (t, y, z1.tolist(), z2.tolist())))
                break

    # H4: squared modulus bound on g
    for i in range(0, npts - 1, 2):
        t = ts[i]
        g1 = np.asarray(spec.g(t, np.array([ys[i]]), zs[i].reshape(1, -1)))[0]
        g2 = np.asarray(spec.g(t, np.array([ys[i + 1]]), zs[i + 1].reshape(1, -1)))[0]
        lhs = float(np.sum((g1 - g2) ** 2))
        rhs = spec.c * (ys[i] - ys[i + 1]) ** 2 + spec.alpha * float(
            np.sum((zs[i] - zs[i + 1]) ** 2))
        if lhs > rhs + ALGEBRA_TOL:
            violations.append(("H4", "g modulus bound violated", (t, ys[i], ys[i + 1])))
            break

    # H5: linear growth at z = 0
    if spec.f_linear_growth_H5:
        z0 = np.zeros(d)
        for i in range(npts):
            t, y = ts[i], ys[i]
            f00 = abs(_f_at(spec, t, 0.0, z0))
            if abs(_f_at(spec, t, y, z0)) > f00 + spec.K * abs(y) + ALGEBRA_TOL:
                violations.append(("H5", "linear growth bound violated", (t, y)))
                break

    if profile.mode is Mode.SANDWICH_H2:
        if problem.bounding_pair is None:
            violations.append(("H2", "bounding generators required", None))
        else:
            f1, f2 = problem.bounding_pair
            for i in range(npts):
                t, y, z = ts[i], ys[i], zs[i]
                lo, mid, hi = _f_at(f1, t, y, z), _f_at(spec, t, y, z), _f_at(f2, t, y, z)
                if lo > mid + ALGEBRA_TOL or mid > hi + ALGEBRA_TOL:
                    violations.append(("H2", "f not between bounding generators", (t, y, z.tolist())))
                    break

    return ValidationReport(ok=not violations, violations=tuple(violations))
