"""Communications-aware trajectory planning problems and their solvers."""
from .problem import (
    CONSTRAINT_KINDS,
    PENALTY_CEILING,
    PENALTY_EXP_CAP,
    BatchEvaluation,
    CaTPProblem,
    ConstraintSpec,
    DegenerateObjectiveError,
    Evaluator,
    MissingSlackError,
    ObjectiveSpec,
    apply_slack,
    breakdown,
    evaluate_constraints,
    evaluate_objective,
    penalize,
)
from .solver import (
    BRUTE_FORCE_LIMIT,
    SearchSpaceTooLarge,
    Solution,
    SolverConfig,
    brute_force_solve,
    feasibility_table,
    rank_order,
    solve,
)

__all__ = [
    "BRUTE_FORCE_LIMIT",
    "BatchEvaluation",
    "CONSTRAINT_KINDS",
    "CaTPProblem",
    "ConstraintSpec",
    "DegenerateObjectiveError",
    "Evaluator",
    "MissingSlackError",
    "ObjectiveSpec",
    "PENALTY_CEILING",
    "PENALTY_EXP_CAP",
    "SearchSpaceTooLarge",
    "Solution",
    "SolverConfig",
    "apply_slack",
    "breakdown",
    "brute_force_solve",
    "evaluate_constraints",
    "evaluate_objective",
    "feasibility_table",
    "penalize",
    "rank_order",
    "solve",
]
