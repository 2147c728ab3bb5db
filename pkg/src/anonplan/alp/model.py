"""LP container and solver result types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .expr import LinearExpr

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7


class SolveError(RuntimeError):
    pass


@dataclass
class LinearProgramModel:
    """min objective . x  subject to  a_ub x <= b_ub, all variables free.

    Variables 0..n_weights-1 are the basis weights; the rest are elimination
    auxiliaries named u_<stage>_<entry>.  `meta` records per-stage counts; the
    reported constraint count is the number of emitted inequality rows
    (including the final row closing the max constraint).
    """

    objective: np.ndarray
    a_ub: sp.csr_matrix
    b_ub: np.ndarray
    names: list[str]
    n_weights: int
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return int(self.objective.size)

    @property
    def n_constraints(self) -> int:
        return int(self.b_ub.size)

    def constraint(self, i: int) -> tuple[LinearExpr, LinearExpr]:
        """Row i as (lhs >= rhs): constant rhs bound >= row expression."""
        row = self.a_ub.getrow(i)
        expr = LinearExpr(0.0, dict(zip(row.indices.tolist(), row.data.tolist())))
        return LinearExpr(float(self.b_ub[i])), expr

    def iter_constraints(self) -> Iterator[tuple[LinearExpr, LinearExpr]]:
        for i in range(self.n_constraints):
            yield self.constraint(i)

    def objective_expr(self) -> LinearExpr:
        return LinearExpr(0.0, {i: float(c) for i, c in enumerate(self.objective) if c})

    def check(self, x: np.ndarray, tol: float = FEASIBILITY_TOL) -> float:
        """Largest constraint violation of x."""
        if self.n_constraints == 0:
            return 0.0
        resid = self.a_ub @ x - self.b_ub
        return float(np.max(resid)) if resid.size else 0.0


@dataclass
class SolverResult:
    status: str  # optimal | infeasible | unbounded
    weights: np.ndarray | None
    objective: float | None
    solve_seconds: float
    x: np.ndarray | None = None
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"
