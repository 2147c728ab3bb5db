"""Pluggable LP solving.

Backends: "highs" (scipy.optimize.linprog, default at any real scale),
"simplex" (the embedded reference solver), "auto" (highs when scipy's
optimizer is importable, else simplex).  Optimal solutions are verified
against the LP's rows at the 1e-7 feasibility tolerance.
"""

from __future__ import annotations

import time

import numpy as np

from .model import FEASIBILITY_TOL, LinearProgramModel, SolveError, SolverResult
from .simplex import simplex_solve

__all__ = ["solve_lp"]


def _solve_highs(lp: LinearProgramModel) -> tuple[str, np.ndarray | None, float | None]:
    from scipy.optimize import linprog

    res = linprog(
        lp.objective,
        A_ub=lp.a_ub if lp.n_constraints else None,
        b_ub=lp.b_ub if lp.n_constraints else None,
        bounds=(None, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status)
    if status is None:
        raise SolveError(f"LP backend failed: {res.message}")
    if status != "optimal":
        return status, None, None
    return status, res.x, float(res.fun)


def solve_lp(lp: LinearProgramModel, backend: str = "auto") -> SolverResult:
    """Solve to an optimal basic solution; unbounded/infeasible are statuses."""
    if backend == "auto":
        try:
            import scipy.optimize  # noqa: F401

            backend = "highs"
        except ImportError:  # pragma: no cover - scipy is a hard dependency
            backend = "simplex"
    t0 = time.perf_counter()
    if backend == "highs":
        status, x, obj = _solve_highs(lp)
    elif backend == "simplex":
        status, x, obj = simplex_solve(lp.objective, lp.a_ub, lp.b_ub)
    else:
        raise SolveError(f"unknown LP backend {backend!r}")
    dt = time.perf_counter() - t0
    if status != "optimal":
        return SolverResult(status, None, None, dt, backend=backend)
    violation = lp.check(x)
    if violation > FEASIBILITY_TOL:
        raise SolveError(f"solution violates constraints by {violation:.3e}")
    return SolverResult(status, x[: lp.n_weights].copy(), obj, dt, x=x, backend=backend)
