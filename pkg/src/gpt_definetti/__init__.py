"""Relative entropy, de Finetti bounds and convergent LP hierarchies for polytopal state spaces."""
from .config import override, settings
from .entropy import (
    DeFinettiConstants,
    EntropyResult,
    definetti_bound,
    definetti_constants,
    kl_divergence,
    mutual_information_marginal,
    mutual_information_upper,
    pinsker_gap,
    relative_entropy,
)
from .exceptions import *  # noqa: F401,F403
from .games import GameSpec, chsh, classical_value, compile_game, seesaw_lower
from .geometry import (
    Effect,
    Measurement,
    StateSpace,
    base_dual_norm,
    effect_sup,
    ic_measurement,
    injectivity_bound,
    injectivity_constant,
    lambda_for_tau,
    optimize_tau,
    order_bounds,
    polygon,
    simplex,
    square,
    validate,
)
from .hierarchy import LiftData, LocalProblem, OuterReport, build_level, lift_program, run_schedule, solve_level
from .rounding import ConditionalEnsemble, InnerReport, conditionals, inner_search
from .solver import LinearProgram, Solution, Status, solve
from .tensor import (
    ProductSpace,
    SymExtension,
    apply_on_first_factor,
    eval_sym_functional,
    from_affine,
    max_tensor,
    partial_unit,
    separable_distance,
    sym_index,
)

__version__ = "0.1.0"
