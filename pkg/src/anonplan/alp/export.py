"""Textual LP export/import (CPLEX LP file dialect).

The writer emits the minimization objective, all inequality rows, and free
declarations for every variable, which mainstream external solvers read
directly.  `read_lp` parses the same dialect back for round-trip checks.
"""

from __future__ import annotations

import re

import numpy as np
import scipy.sparse as sp

from .model import LinearProgramModel

__all__ = ["export_lp", "read_lp"]

FORMAT_TAG = "anonplan-lp/1"


def _terms(names: list[str], cols: np.ndarray, vals: np.ndarray) -> str:
    parts: list[str] = []
    for c, v in zip(cols, vals):
        if v == 0.0:
            continue
        mag = repr(abs(float(v)))
        if not parts:
            parts.append(f"{'-' if v < 0 else ''}{mag} {names[c]}")
        else:
            parts.append(f"{'+' if v >= 0 else '-'} {mag} {names[c]}")
    if not parts:
        parts.append(f"0 {names[0]}")
    return " ".join(parts)


def export_lp(lp: LinearProgramModel, path, provenance: str | None = None) -> None:
    a = lp.a_ub.tocsr()
    with open(path, "w") as fh:
        fh.write(f"\\ {FORMAT_TAG}\n")
        if provenance:
            fh.write(f"\\ {provenance}\n")
        fh.write("Minimize\n")
        nz = np.flatnonzero(lp.objective)
        fh.write(" obj: " + _terms(lp.names, nz, lp.objective[nz]) + "\n")
        fh.write("Subject To\n")
        for i in range(lp.n_constraints):
            lo, hi = a.indptr[i], a.indptr[i + 1]
            row = _terms(lp.names, a.indices[lo:hi], a.data[lo:hi])
            fh.write(f" c{i}: {row} <= {lp.b_ub[i]!r}\n")
        fh.write("Bounds\n")
        for name in lp.names:
            fh.write(f" {name} free\n")
        fh.write("End\n")


_TERM_RE = re.compile(r"([+-]?)\s*([0-9.eE+-]*)\s*([A-Za-z_][\w']*)")


def _parse_terms(s: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for sign, mag, name in _TERM_RE.findall(s):
        coef = float(mag) if mag not in ("", "+", "-") else 1.0
        if sign == "-":
            coef = -coef
        out[name] = out.get(name, 0.0) + coef
    return out


def read_lp(path) -> LinearProgramModel:
    """Parse the dialect written by `export_lp` back into a model."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    section = None
    objective: dict[str, float] = {}
    constraints: list[tuple[dict[str, float], float]] = []
    names: list[str] = []
    for ln in lines:
        if not ln or ln.startswith("\\"):
            continue
        low = ln.lower()
        if low in ("minimize", "subject to", "bounds", "end"):
            section = low
            continue
        if section == "minimize":
            body = ln.split(":", 1)[1] if ":" in ln else ln
            objective.update(_parse_terms(body))
        elif section == "subject to":
            body = ln.split(":", 1)[1] if ":" in ln else ln
            lhs, rhs = body.split("<=")
            constraints.append((_parse_terms(lhs), float(rhs)))
        elif section == "bounds":
            name = ln.split()[0]
            names.append(name)
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    obj = np.zeros(n)
    for name, c in objective.items():
        obj[index[name]] = c
    rows, cols, data, b = [], [], [], []
    for i, (terms, rhs) in enumerate(constraints):
        for name, c in terms.items():
            rows.append(i)
            cols.append(index[name])
            data.append(c)
        b.append(rhs)
    a = sp.csr_matrix((data, (rows, cols)), shape=(len(constraints), n))
    n_w = sum(1 for nm in names if nm.startswith("w_")) or n
    return LinearProgramModel(obj, a, np.array(b), names, n_w, {})
