"""ALP construction: objective coefficients, per-basis constraint terms, and
compilation of the max constraint into linear rows via variable elimination.

The elimination schedule mirrors the numeric algorithm in `elimination`, but
table entries are affine expressions in the LP variables: summing factors adds
expressions entrywise, and maxing a variable out introduces one fresh auxiliary
variable per consistent entry of the reduced factor plus one `aux >= branch`
row per qualifying branch.  Inconsistent entries create no variables and no
rows.  Flat factors (no counters) recover the classic construction; factors
with counters emit the same feasible weight set from fewer rows.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import factors as fa
from ..factors import CountScope, FactorError, MixedModeFactor, validity_mask
from ..fmmdp import BackProjection, BasisFunction, FactoredModel, backproject
from .model import LinearProgramModel

__all__ = [
    "GuardExceeded",
    "SymbolicFactor",
    "objective_coefficients",
    "constraint_terms",
    "generate_constraints",
    "exhaustive_lp",
    "basis_values_over_states",
]

DEFAULT_ENTRY_BUDGET = 1 << 26


class GuardExceeded(RuntimeError):
    """An intermediate table would exceed the configured entry budget."""

    def __init__(self, entries: int, budget: int):
        super().__init__(f"induced width too large: {entries} entries exceed budget {budget}")
        self.entries = entries
        self.budget = budget


class SymbolicFactor:
    """Mixed-mode factor whose entries are affine expressions.

    Entry e of the factor is `const[e] + rows[e] . x`; `valid` marks
    consistent entries.  Duck-types the structure attributes used by the
    gather machinery in `factors`.
    """

    __slots__ = ("proper", "cards", "counters", "const", "rows", "valid")

    def __init__(self, proper, cards, counters, const, rows, valid):
        self.proper = tuple(proper)
        self.cards = tuple(cards)
        self.counters = tuple(counters)
        self.const = const
        self.rows = rows
        self.valid = valid

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cards + tuple(c.size for c in self.counters)

    @property
    def n_entries(self) -> int:
        return int(self.const.size)

    @property
    def scope_vars(self) -> frozenset[int]:
        s = set(self.proper)
        for c in self.counters:
            s.update(c.members)
        return frozenset(s)

    def card_of(self, var: int) -> int:
        if var in self.proper:
            return self.cards[self.proper.index(var)]
        if any(var in c for c in self.counters):
            return 2
        raise FactorError(f"variable not in factor: {var}")

    @classmethod
    def from_numeric(cls, f: MixedModeFactor, n_cols: int) -> "SymbolicFactor":
        e = f.parameter_count
        return cls(
            f.proper, f.cards, f.counters,
            f.table.reshape(-1).copy(),
            sp.csr_matrix((e, n_cols)),
            f.validity.reshape(-1).copy(),
        )

    @classmethod
    def weighted(cls, f: MixedModeFactor, col: int, n_cols: int) -> "SymbolicFactor":
        """Entries `f(e) * x_col`: coefficient table in one LP-variable column."""
        e = f.parameter_count
        data = f.table.reshape(-1)
        mat = sp.csr_matrix(
            (data, (np.arange(e), np.full(e, col))), shape=(e, n_cols)
        )
        mat.eliminate_zeros()
        return cls(f.proper, f.cards, f.counters, np.zeros(e), mat, f.validity.reshape(-1).copy())


def _pad(mat: sp.csr_matrix, n_cols: int) -> sp.csr_matrix:
    if mat.shape[1] == n_cols:
        return mat
    return sp.csr_matrix((mat.data, mat.indices, mat.indptr), shape=(mat.shape[0], n_cols))


def _sym_augment(g: SymbolicFactor, h: SymbolicFactor, budget: int) -> SymbolicFactor:
    proper, pcards, counters, res_shape, gmap, hmap = fa._union_structure(g, h)
    entries = int(np.prod(res_shape, dtype=np.int64)) if res_shape else 1
    if entries > budget:
        raise GuardExceeded(entries, budget)
    gi = fa._gather(res_shape, g.shape, gmap)
    hi = fa._gather(res_shape, h.shape, hmap)
    n_cols = max(g.rows.shape[1], h.rows.shape[1])
    const = g.const[gi] + h.const[hi]
    rows = _pad(g.rows, n_cols)[gi] + _pad(h.rows, n_cols)[hi]
    valid = validity_mask(proper, pcards, counters).reshape(-1)
    return SymbolicFactor(proper, pcards, counters, const, rows, valid)


class _Builder:
    """Accumulates LP variables and constraint rows across elimination stages."""

    def __init__(self, names: list[str]):
        self.names = list(names)
        self.blocks: list[sp.csr_matrix] = []
        self.rhs: list[np.ndarray] = []
        self.stages: list[dict] = []

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def new_aux(self, stage: int, entry_indices: np.ndarray) -> np.ndarray:
        base = self.n_vars
        self.names.extend(f"u_{stage}_{int(e)}" for e in entry_indices)
        return np.arange(base, base + entry_indices.size)

    def add_block(self, block: sp.csr_matrix, rhs: np.ndarray) -> None:
        self.blocks.append(block)
        self.rhs.append(rhs)

    @property
    def n_rows(self) -> int:
        return sum(b.shape[0] for b in self.blocks)


def _sym_reduce(f: SymbolicFactor, var: int, builder: _Builder, stage: int) -> SymbolicFactor:
    proper, cards, counters, res_shape, src_map, hit, in_proper = fa._dropped_structure(f, var)
    entries = int(np.prod(res_shape, dtype=np.int64)) if res_shape else 1
    struct_valid = validity_mask(proper, cards, counters).reshape(-1)
    branch_idx = []
    branch_q = []
    any_q = np.zeros(entries, dtype=bool)
    for b in range(f.card_of(var)):
        gi = fa._gather(res_shape, f.shape, fa._branch_map(src_map, f, var, hit, in_proper, b))
        q = f.valid[gi]
        branch_idx.append(gi)
        branch_q.append(q)
        any_q |= q
    if not np.all(any_q | ~struct_valid):
        raise AssertionError("consistent entry with no qualifying branch during reduce")
    res_valid = struct_valid & any_q

    valid_entries = np.flatnonzero(res_valid)
    aux_ids = builder.new_aux(stage, valid_entries)
    aux_of_entry = np.full(entries, -1, dtype=np.int64)
    aux_of_entry[valid_entries] = aux_ids
    n_cols = builder.n_vars

    n_rows_before = builder.n_rows
    for gi, q in zip(branch_idx, branch_q):
        sel = np.flatnonzero(res_valid & q)
        if sel.size == 0:
            continue
        src = gi[sel]
        block = _pad(f.rows, n_cols)[src]
        minus_u = sp.csr_matrix(
            (np.full(sel.size, -1.0), (np.arange(sel.size), aux_of_entry[sel])),
            shape=(sel.size, n_cols),
        )
        builder.add_block(block + minus_u, -f.const[src])
    builder.stages.append(
        {
            "var": var,
            "entries": f.n_entries,
            "aux": int(valid_entries.size),
            "constraints": builder.n_rows - n_rows_before,
        }
    )

    const = np.zeros(entries)
    data = np.ones(valid_entries.size)
    rows = sp.csr_matrix(
        (data, (valid_entries, aux_ids)), shape=(entries, n_cols)
    )
    return SymbolicFactor(proper, cards, counters, const, rows, res_valid)


def objective_coefficients(basis: list[BasisFunction]) -> np.ndarray:
    """Objective weight of each basis coefficient under uniform state relevance:
    the mean of the basis table (the uniform marginal factorizes over variables
    outside the local scope)."""
    return np.array([float(np.mean(h.flat.table)) for h in basis])


def constraint_terms(
    model: FactoredModel,
    basis: list[BasisFunction],
    projections: list[BackProjection] | None = None,
    *,
    flat: bool = False,
) -> list[SymbolicFactor]:
    """One constant factor per reward plus, per basis i, a factor with entries
    (discount * backprojection_i - basis_i) * w_i.  With `flat=True` every
    factor is expanded to its plain tabular form (counts unrolled to members).
    """
    if projections is None:
        projections = [backproject(h, model) for h in basis]
    n_cols = len(basis)
    terms: list[SymbolicFactor] = []
    for r in model.rewards:
        f = fa.flatten(r) if flat else None
        numeric = MixedModeFactor.from_flat(f) if flat else r
        terms.append(SymbolicFactor.from_numeric(numeric, n_cols))
    for i, (h, g) in enumerate(zip(basis, projections)):
        if g.basis_id != h.id:
            raise FactorError("projection/basis id mismatch")
        h_m = MixedModeFactor(h.flat.scope, h.flat.cards, (), h.flat.table)
        c = fa.augment(g.factor.scaled(model.discount), h_m.scaled(-1.0))
        if flat:
            c = MixedModeFactor.from_flat(fa.flatten(c))
        terms.append(SymbolicFactor.weighted(c, i, n_cols))
    return terms


def generate_constraints(
    terms: list[SymbolicFactor],
    order: list[int],
    objective: np.ndarray,
    *,
    entry_budget: int = DEFAULT_ENTRY_BUDGET,
    weight_names: list[str] | None = None,
) -> LinearProgramModel:
    """Run the elimination schedule over symbolic factors and assemble the LP.

    Every variable in any term's scope must appear in `order`.  The resulting
    LP's optimal weight set equals that of the exhaustively enumerated LP.
    """
    scope_union = set()
    for t in terms:
        scope_union |= t.scope_vars
    missing = scope_union - set(order)
    if missing:
        raise FactorError(f"uneliminated variables remain: {sorted(missing)}")
    n_w = int(objective.size)
    names = weight_names or [f"w_{i}" for i in range(n_w)]
    if len(names) != n_w:
        raise FactorError("weight name count mismatch")
    builder = _Builder(names)

    work: dict[int, SymbolicFactor] = {}
    index: dict[int, set[int]] = {}
    for pos, t in enumerate(terms):
        work[pos] = t
        for v in t.scope_vars:
            index.setdefault(v, set()).add(pos)
    next_pos = len(terms)
    peak = max((t.n_entries for t in terms), default=1)

    for stage, var in enumerate(order):
        positions = sorted(index.get(var, ()))
        if not positions:
            zero = SymbolicFactor((), (), (), np.zeros(1), sp.csr_matrix((1, builder.n_vars)),
                                  np.ones(1, dtype=bool))
            work[next_pos] = zero
            next_pos += 1
            builder.stages.append({"var": var, "entries": 1, "aux": 0, "constraints": 0})
            continue
        collected = []
        for p in positions:
            t = work.pop(p)
            collected.append(t)
            for v in t.scope_vars:
                index[v].discard(p)
        f = collected[0]
        for g in collected[1:]:
            f = _sym_augment(f, g, entry_budget)
        peak = max(peak, f.n_entries)
        reduced = _sym_reduce(f, var, builder, stage)
        work[next_pos] = reduced
        for v in reduced.scope_vars:
            index.setdefault(v, set()).add(next_pos)
        next_pos += 1

    leftovers = [work[p] for p in sorted(work)]
    for t in leftovers:
        if t.scope_vars:
            raise FactorError(f"uneliminated variables remain: {sorted(t.scope_vars)}")
    n_cols = builder.n_vars
    total_row = sp.csr_matrix((1, n_cols))
    total_const = 0.0
    for t in leftovers:
        total_row = total_row + _pad(t.rows, n_cols)[[0]]
        total_const += float(t.const[0])
    builder.add_block(total_row, np.array([-total_const]))

    a_ub = sp.vstack([_pad(b, n_cols) for b in builder.blocks], format="csr")
    b_ub = np.concatenate(builder.rhs)
    obj = np.zeros(n_cols)
    obj[:n_w] = objective
    meta = {
        "stages": builder.stages,
        "constraints": int(b_ub.size),
        "aux_variables": int(n_cols - n_w),
        "peak_entries": int(peak),
    }
    return LinearProgramModel(obj, a_ub, b_ub, builder.names, n_w, meta)


# -- exhaustive construction (oracle path) -------------------------------------


def _joint_values(f: MixedModeFactor, var_bit: dict[int, int], n_bits: int) -> np.ndarray:
    """Evaluate a factor at every joint assignment of `n_bits` binary variables,
    vectorized via the flat table and bit extraction."""
    flat = fa.flatten(f)
    joint = np.arange(1 << n_bits, dtype=np.int64)
    idx = np.zeros(joint.size, dtype=np.int64)
    stride = 1
    strides = fa._strides(flat.cards)
    for v, s in zip(flat.scope, strides):
        bit = var_bit[v]
        idx += ((joint >> (n_bits - 1 - bit)) & 1) * s
    return flat.table[idx]


def exhaustive_lp(
    model: FactoredModel,
    basis: list[BasisFunction],
    projections: list[BackProjection] | None = None,
    *,
    max_joint_bits: int = 22,
) -> LinearProgramModel:
    """Directly enumerated LP: one row per joint (state, action) assignment.

    Usable as the ground-truth pipeline on small models (all variables binary).
    """
    if projections is None:
        projections = [backproject(h, model) for h in basis]
    joint_vars = sorted(model.state_ids() + model.action_ids())
    if any(model.variables[v].cardinality != 2 for v in joint_vars):
        raise FactorError("exhaustive construction requires binary variables")
    n_bits = len(joint_vars)
    if n_bits > max_joint_bits:
        raise GuardExceeded(1 << n_bits, 1 << max_joint_bits)
    var_bit = {v: i for i, v in enumerate(joint_vars)}
    n_rows = 1 << n_bits
    cols = []
    for h, g in zip(basis, projections):
        h_m = MixedModeFactor(h.flat.scope, h.flat.cards, (), h.flat.table)
        c = fa.augment(g.factor.scaled(model.discount), h_m.scaled(-1.0))
        cols.append(_joint_values(c, var_bit, n_bits))
    a = np.column_stack(cols) if cols else np.zeros((n_rows, 0))
    b = np.zeros(n_rows)
    for r in model.rewards:
        b -= _joint_values(r, var_bit, n_bits)
    obj = objective_coefficients(basis)
    names = [f"w_{i}" for i in range(len(basis))]
    meta = {"constraints": int(n_rows), "aux_variables": 0, "stages": []}
    return LinearProgramModel(obj, sp.csr_matrix(a), b, names, len(basis), meta)


def tiebreak_coefficients(basis: list[BasisFunction], seed: int = 0) -> np.ndarray:
    """Weight-space coefficients of a fixed generic value-space functional.

    The coefficient of w_i is the expectation of basis i under a seeded random
    product measure over the state bits.  Minimizing this over an LP's optimal
    face selects a canonical value function: the functional is constant along
    weight directions that leave the value function unchanged, and generically
    picks a unique vertex of the face, so every equivalent LP formulation
    yields the same canonical solution.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0xA17, seed]))
    probs: dict[int, float] = {}
    out = np.zeros(len(basis))
    for i, h in enumerate(basis):
        total = 0.0
        flat = h.flat
        for idx in range(flat.table.size):
            rem = idx
            weight = 1.0
            for v, c in zip(flat.scope, flat.cards):
                digits = []
                pass
            # decode mixed-radix digits most-significant first
            digits = []
            for c in reversed(flat.cards):
                digits.append(rem % c)
                rem //= c
            digits.reverse()
            for v, c, d in zip(flat.scope, flat.cards, digits):
                if v not in probs:
                    probs[v] = float(rng.uniform(0.2, 0.8))
                p1 = probs[v]
                weight *= p1 if d == c - 1 else (1.0 - p1) / (c - 1)
            total += weight * float(flat.table[idx])
        out[i] = total
    return out


def basis_values_over_states(
    model: FactoredModel, basis: list[BasisFunction], weights: np.ndarray
) -> np.ndarray:
    """Value function sum(w_i h_i) at every joint state, first state variable
    as the most significant bit."""
    state_vars = sorted(model.state_ids())
    var_bit = {v: i for i, v in enumerate(state_vars)}
    n_bits = len(state_vars)
    out = np.zeros(1 << n_bits)
    for h, w in zip(basis, weights):
        f = MixedModeFactor(h.flat.scope, h.flat.cards, (), h.flat.table)
        out += w * _joint_values(f, var_bit, n_bits)
    return out
