import numpy as np
import pytest

from bdsdelab.errors import InvalidArgument
from bdsdelab.grids import make_uniform_grid
from bdsdelab.iteration import (
    Direction,
    IterationConfig,
    lower_envelope,
    penalized,
    reflect_problem,
    run_maximal_h6,
    run_minimal,
    run_sandwich,
    run_upper_bound,
    upper_envelope,
)
from bdsdelab.noise import NoiseConfig, generate
from bdsdelab.problem import BdsdeProblem, builtin_generator, builtin_terminal
from bdsdelab.regression import BasisSpec
from bdsdelab.solver import SolverConfig, backward_sweep
from bdsdelab.verify import check_order


def _problem(bundle, gen, term=("constant", (0.0,)), pair=None):
    return BdsdeProblem(grid=bundle.grid, generator=gen,
                        terminal=builtin_terminal(*term), bounding_pair=pair)


@pytest.fixture(scope="module")
def iter_bundle():
    grid = make_uniform_grid(1.0, 40)
    return generate(grid, NoiseConfig(seed=21, m_outer=6, n_inner=600))


_CFG = IterationConfig(solver=SolverConfig(basis=BasisSpec(degree=3)))


def test_config_guards():
    with pytest.raises(InvalidArgument):
        IterationConfig(tol_iter=0.0)
    with pytest.raises(InvalidArgument):
        IterationConfig(i_max=0)


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------

def test_envelopes_zero_fixed_point(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("zero"))
    lo = lower_envelope(prob, iter_bundle, _CFG)
    hi = upper_envelope(prob, iter_bundle, _CFG)
    assert np.allclose(lo.Y, 0.0, atol=1e-8)
    assert np.allclose(hi.Y, 0.0, atol=1e-8)


def test_lower_envelope_nonpositive_for_step(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_threshold", (1.0,)))
    lo = lower_envelope(prob, iter_bundle, _CFG)
    assert np.all(lo.Y <= 1e-8)  # drift <= 0, terminal 0


def test_upper_envelope_above_positive_terminal(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("zero"),
                    term=("constant", (1.0,)))
    cfg = IterationConfig(K=1.0, solver=_CFG.solver)
    hi = upper_envelope(prob, iter_bundle, cfg)
    assert np.all(hi.Y >= 1.0 - 1e-6)


def test_envelope_ordering(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_plus_linear", (1.0, 0.0)),
                    term=("w_abs", ()))
    lo = lower_envelope(prob, iter_bundle, _CFG)
    hi = upper_envelope(prob, iter_bundle, _CFG)
    rep = check_order(lo, hi, 0.01, 0.01)
    assert rep.passed


def test_envelope_reflection_symmetry(iter_bundle):
    # upper envelope of (xi, f) = -(lower envelope of (-xi, f mirrored)), g = 0
    prob = _problem(iter_bundle, builtin_generator("step_plus_linear", (1.0, 0.0)),
                    term=("w_abs", ()))
    hi = upper_envelope(prob, iter_bundle, _CFG)
    lo_ref = lower_envelope(reflect_problem(prob), iter_bundle, _CFG)
    assert np.allclose(hi.Y, -lo_ref.Y, atol=1e-8)


# ---------------------------------------------------------------------------
# penalized drift
# ---------------------------------------------------------------------------

def test_penalty_vanishes_at_anchor(iter_bundle):
    gen = builtin_generator("step_threshold", (1.0,))
    prob = _problem(iter_bundle, gen)
    prev = backward_sweep(prob, iter_bundle, _CFG.solver)
    pen = penalized(gen, prev, K=1.0, sign=-1, bundle=iter_bundle)
    y = np.array([0.3, 1.4])
    z = np.array([[0.2], [-0.5]])
    out = pen.evaluate(0.1, y, z, y, z)
    base = np.asarray(gen.f(0.1, y, z))
    assert np.allclose(out, base)


def test_penalized_affine_in_y():
    grid = make_uniform_grid(1.0, 5)
    bundle = generate(grid, NoiseConfig(seed=1, m_outer=1, n_inner=4))
    gen = builtin_generator("step_threshold", (1.0,))
    prev = backward_sweep(_problem(bundle, gen), bundle, SolverConfig())
    pen = penalized(gen, prev, K=2.0, sign=-1)
    anchor_y = np.array([0.5])
    anchor_z = np.array([[0.0]])
    z = np.array([[0.3]])
    f_a = pen.evaluate(0.0, np.array([1.0]), z, anchor_y, anchor_z)
    f_b = pen.evaluate(0.0, np.array([4.0]), z, anchor_y, anchor_z)
    assert abs((f_a - f_b)[0]) == pytest.approx(2.0 * 3.0)


def test_penalized_constant_anchor_formula():
    # prev identically 0.5: F(t,y,z) = 0 - K(y - 0.5) + sign*K|z|
    grid = make_uniform_grid(1.0, 5)
    bundle = generate(grid, NoiseConfig(seed=1, m_outer=1, n_inner=4))
    gen = builtin_generator("step_threshold", (1.0,))
    pen = penalized(gen, backward_sweep(_problem(bundle, gen), bundle,
                                        SolverConfig()), K=1.0, sign=+1)
    y = np.array([2.0])
    z = np.array([[1.5]])
    out = pen.evaluate(0.0, y, z, np.array([0.5]), np.array([[0.0]]))
    assert out[0] == pytest.approx(0.0 - 1.0 * (2.0 - 0.5) + 1.0 * 1.5)


def test_penalized_shape_mismatch_rejected(iter_bundle):
    grid = make_uniform_grid(1.0, 5)
    other = generate(grid, NoiseConfig(seed=1, m_outer=1, n_inner=4))
    gen = builtin_generator("zero")
    prev = backward_sweep(_problem(other, gen), other, SolverConfig())
    with pytest.raises(InvalidArgument):
        penalized(gen, prev, K=1.0, sign=-1, bundle=iter_bundle)
    with pytest.raises(InvalidArgument):
        penalized(gen, prev, K=1.0, sign=0)


# ---------------------------------------------------------------------------
# iteration drivers (small scale; desk scale lives in the acceptance tests)
# ---------------------------------------------------------------------------

def test_minimal_matches_direct_sweep_for_lipschitz(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("linear", (1.0, 0.0)),
                    term=("constant", (1.0,)))
    rep = run_minimal(prob, iter_bundle, _CFG)
    direct = backward_sweep(prob, iter_bundle, _CFG.solver)
    assert rep.converged
    gap = abs(rep.final.Y[:, :, 0].mean() - direct.Y[:, :, 0].mean())
    assert gap <= 2 * _CFG.tol_iter


def test_minimal_report_structure(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_plus_linear", (1.0, 0.0)),
                    term=("w_abs", ()))
    rep = run_minimal(prob, iter_bundle, _CFG)
    assert rep.direction is Direction.MINIMAL
    assert rep.converged
    assert len(rep.iterates) == len(rep.deltas) + 1
    assert rep.deltas[-1] < _CFG.tol_iter
    assert np.isfinite(rep.uniform_bound)
    assert set(rep.bounds) == {"lower_envelope", "upper_envelope"}
    assert rep.order_checks["bracket_low<=final"].passed
    assert rep.order_checks["final<=bracket_high"].passed
    for mono in rep.monotonicity:
        assert mono.violation_fraction < 0.01


def test_minimal_requires_profile(iter_bundle):
    gen = builtin_generator("step_threshold_rc", (1.0,))  # not left-continuous
    with pytest.raises(InvalidArgument):
        run_minimal(_problem(iter_bundle, gen), iter_bundle, _CFG)


def test_upper_bound_starts_at_upper_envelope(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_plus_linear", (1.0, 0.0)),
                    term=("w_abs", ()))
    rep = run_upper_bound(prob, iter_bundle, _CFG)
    hi = upper_envelope(prob, iter_bundle, _CFG)
    assert np.allclose(rep.iterates[0].node_means, hi.node_means())
    assert rep.direction is Direction.UPPER_BOUND
    for mono in rep.monotonicity:  # decreasing
        assert mono.violation_fraction < 0.01


def test_minimal_below_upper_bound(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_plus_linear", (1.0, 0.0)),
                    term=("w_abs", ()))
    lo = run_minimal(prob, iter_bundle, _CFG)
    hi = run_upper_bound(prob, iter_bundle, _CFG)
    assert check_order(lo.final, hi.final, 0.02, 0.01).passed


def test_sandwich_degenerate_pair(iter_bundle):
    f = builtin_generator("linear", (0.5, 0.2))
    prob = _problem(iter_bundle, f, term=("w_abs", ()), pair=(f, f))
    rep = run_sandwich(prob, iter_bundle, _CFG)
    assert rep.converged
    assert rep.direction is Direction.SANDWICH
    # degenerate bracket: Y1 = Y2 and the limit sits on it
    y1 = rep.bounds["Y1"].Y
    y2 = rep.bounds["Y2"].Y
    assert np.array_equal(y1, y2)
    assert abs(rep.final.Y[:, :, 0].mean() - y1[:, :, 0].mean()) <= 2 * _CFG.tol_iter


def test_sandwich_requires_bounding_pair(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_threshold", (1.0,)),
                    term=("w_abs", ()))
    with pytest.raises(InvalidArgument):
        run_sandwich(prob, iter_bundle, _CFG)


# ---------------------------------------------------------------------------
# reflection / maximal
# ---------------------------------------------------------------------------

def test_reflection_is_involution(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_threshold_rc", (1.0,)),
                    term=("w_abs", ()))
    twice = reflect_problem(reflect_problem(prob))
    y = np.linspace(-2, 2, 9)
    z = np.zeros((9, 1))
    assert np.array_equal(np.asarray(prob.generator.f(0.3, y, z)),
                          np.asarray(twice.generator.f(0.3, y, z)))
    wT = np.array([[1.0], [-2.0]])
    assert np.array_equal(prob.terminal.payoff(wT), twice.terminal.payoff(wT))


def test_reflection_swaps_continuity_flags(iter_bundle):
    gen = builtin_generator("step_threshold_rc", (1.0,))
    ref = reflect_problem(_problem(iter_bundle, gen)).generator
    assert ref.f_left_continuous and not ref.f_right_continuous_H6


def test_maximal_equals_negated_minimal_of_reflection(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_threshold_rc", (1.0,)),
                    term=("w_abs", ()))
    rep = run_maximal_h6(prob, iter_bundle, _CFG)
    mirror = run_minimal(reflect_problem(prob), iter_bundle, _CFG)
    assert np.array_equal(rep.final.Y, -mirror.final.Y)  # bit-identical mirror
    assert rep.direction is Direction.MAXIMAL_H6


def test_maximal_agrees_with_minimal_for_linear(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("linear", (0.5, 0.0)),
                    term=("constant", (1.0,)))
    mx = run_maximal_h6(prob, iter_bundle, _CFG)
    mn = run_minimal(prob, iter_bundle, _CFG)
    y0_gap = abs(mx.final.Y[:, :, 0].mean() - mn.final.Y[:, :, 0].mean())
    se = mn.final.Y[:, :, 0].std() / np.sqrt(mn.final.Y[:, :, 0].size)
    assert y0_gap <= 2 * _CFG.tol_iter + 2 * se


def test_maximal_requires_right_continuity(iter_bundle):
    prob = _problem(iter_bundle, builtin_generator("step_threshold", (1.0,)),
                    term=("w_abs", ()))
    with pytest.raises(InvalidArgument):
        run_maximal_h6(prob, iter_bundle, _CFG)
