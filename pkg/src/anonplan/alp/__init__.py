"""Approximate linear programming over factored models.

Builds the weighted-basis LP either by exhaustive constraint enumeration or by
compiling the max constraint into linear constraints with (redundant
representation) variable elimination, solves it with a pluggable LP backend,
and exports it in a standard text format.
"""

from .expr import LinearExpr
from .model import LinearProgramModel, SolverResult, SolveError
from .generate import (
    GuardExceeded,
    objective_coefficients,
    constraint_terms,
    generate_constraints,
    exhaustive_lp,
    basis_values_over_states,
)
from .solve import solve_lp
from .export import export_lp, read_lp

__all__ = [
    "LinearExpr",
    "LinearProgramModel",
    "SolverResult",
    "SolveError",
    "GuardExceeded",
    "objective_coefficients",
    "constraint_terms",
    "generate_constraints",
    "exhaustive_lp",
    "basis_values_over_states",
    "solve_lp",
    "export_lp",
    "read_lp",
]
