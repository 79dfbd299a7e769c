"""Self-contained linear and mixed-integer solver used by the denoiser."""

from .branch_bound import solve_milp
from .problem import (
    STATUS_INFEASIBLE,
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    LinearConstraint,
    Objective,
    ProblemSpec,
    SolveResult,
    VariableSpec,
    freeze_stage,
    to_lp_text,
    with_objective,
)
from .simplex import solve_lp

__all__ = [
    "LinearConstraint",
    "Objective",
    "ProblemSpec",
    "SolveResult",
    "VariableSpec",
    "STATUS_INFEASIBLE",
    "STATUS_ITERATION_LIMIT",
    "STATUS_OPTIMAL",
    "STATUS_UNBOUNDED",
    "freeze_stage",
    "solve_lp",
    "solve_milp",
    "to_lp_text",
    "with_objective",
]
