"""Numerical laboratory for one-dimensional doubly-driven backward SDEs.

Solves terminal-value equations driven forward by a Brownian motion W and
backward by an independent Brownian motion B, including drifts that are only
left-continuous and one-sidedly Lipschitz in y.  Monotone penalization
schemes produce minimal solutions, upper bounds, and sandwich brackets, and
a statistical harness checks the resulting order relations.
"""

__version__ = "0.1.0"

from .grids import TimeGrid, make_uniform_grid
from .problem import (
    AssumptionProfile,
    BdsdeProblem,
    GeneratorSpec,
    TerminalSpec,
    ValidationReport,
    builtin_g,
    builtin_generator,
    builtin_terminal,
    validate,
)
from .noise import BrownianBundle, NoiseConfig, antithetic_extend, cumulative, generate
from .regression import BasisSpec, RegressionFit, design_matrix, estimate_z, fit, predict
from .solver import DiscreteSolution, SolverConfig, backward_sweep, solution_norms, terminal_values
from .iteration import (
    IterationConfig,
    IterationReport,
    lower_envelope,
    penalized,
    run_maximal_h6,
    run_minimal,
    run_sandwich,
    run_upper_bound,
    upper_envelope,
)
from .verify import (
    ComparisonVerdict,
    Lemma22Spec,
    OrderReport,
    check_nonnegativity,
    check_order,
    comparison_experiment,
    lemma22_run,
    mean_ci,
    oracle_martingale,
    oracle_ode,
)
