"""Reference LP solver: two-phase revised primal simplex on sparse data.

Solves min c.x subject to A x <= b with free variables, by splitting x into
nonnegative parts and adding slacks (artificials on rows with negative right
hand side).  Entering and leaving variables follow Bland's anti-cycling rule,
so the pivot sequence is deterministic and finite.  The basis is
refactorized every iteration with a sparse LU; intended for reference-scale
problems, not the large instances (use the HiGHS backend there).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["simplex_solve"]

REDUCED_COST_TOL = 1e-9
RATIO_TOL = 1e-10
PHASE1_TOL = 1e-7


def _phase(A: sp.csc_matrix, b: np.ndarray, c: np.ndarray, basis: list[int],
           allowed: np.ndarray, max_iter: int) -> tuple[str, list[int], np.ndarray]:
    m = b.size
    for _ in range(max_iter):
        B = A[:, basis]
        lu = spla.splu(B.tocsc())
        x_b = lu.solve(b)
        y = lu.solve(c[basis], trans="T")
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        candidates = np.flatnonzero((reduced < -REDUCED_COST_TOL) & allowed)
        if candidates.size == 0:
            x = np.zeros(A.shape[1])
            x[basis] = x_b
            return "optimal", basis, x
        j = int(candidates[0])  # Bland: smallest index enters
        d = lu.solve(A[:, [j]].toarray().ravel())
        pos = np.flatnonzero(d > RATIO_TOL)
        if pos.size == 0:
            return "unbounded", basis, np.zeros(A.shape[1])
        ratios = x_b[pos] / d[pos]
        rmin = ratios.min()
        tied = pos[ratios <= rmin + RATIO_TOL]
        leave = int(tied[np.argmin([basis[i] for i in tied])])  # Bland on ties
        basis[leave] = j
    raise RuntimeError("simplex iteration limit reached")


def simplex_solve(
    c: np.ndarray, a_ub: sp.spmatrix, b_ub: np.ndarray, max_iter: int = 100000
) -> tuple[str, np.ndarray | None, float | None]:
    """Returns (status, x, objective) with x for the original free variables."""
    c = np.asarray(c, dtype=float)
    b = np.asarray(b_ub, dtype=float).copy()
    m, n = a_ub.shape[0], c.size
    A = sp.csc_matrix(a_ub, dtype=float)
    if m == 0:
        # Unconstrained: bounded only if the objective is identically zero.
        if np.any(c != 0.0):
            return "unbounded", None, None
        return "optimal", np.zeros(n), 0.0

    neg = b < 0
    sign = np.where(neg, -1.0, 1.0)
    A = sp.diags(sign) @ A
    b = sign * b
    n_art = int(neg.sum())
    slack_diag = sp.diags(sign)  # slack enters as +1 on original rows, -1 on negated ones
    art_cols = sp.csc_matrix((np.ones(n_art), (np.flatnonzero(neg), np.arange(n_art))),
                             shape=(m, n_art))
    full = sp.hstack([A, -A, slack_diag, art_cols], format="csc")
    n_total = full.shape[1]
    slack_of = 2 * n + np.arange(m)
    art_of = 2 * n + m + np.arange(n_art)

    basis = slack_of.tolist()
    art_rows = np.flatnonzero(neg)
    for k, r in enumerate(art_rows):
        basis[r] = int(art_of[k])

    if n_art:
        c1 = np.zeros(n_total)
        c1[art_of] = 1.0
        allowed = np.ones(n_total, dtype=bool)
        status, basis, x = _phase(full, b, c1, basis, allowed, max_iter)
        if status != "optimal":
            return "infeasible", None, None
        if float(c1 @ x) > PHASE1_TOL:
            return "infeasible", None, None

    c2 = np.zeros(n_total)
    c2[:n] = c
    c2[n : 2 * n] = -c
    allowed = np.ones(n_total, dtype=bool)
    allowed[art_of] = False  # artificials may leave but never re-enter
    status, basis, x = _phase(full, b, c2, basis, allowed, max_iter)
    if status != "optimal":
        return status, None, None
    sol = x[:n] - x[n : 2 * n]
    return "optimal", sol, float(c @ sol)
