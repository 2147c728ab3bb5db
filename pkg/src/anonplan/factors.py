"""Factor algebra over binary count aggregators.

A mixed-mode factor is a real-valued table indexed by assignments to a set of
"proper" variables (identity matters) and by count tuples of one or more count
scopes (only the number of enabled members matters).  Count scopes may overlap
each other and the proper scope, which makes some table entries unrealizable;
those entries are tracked by a validity mask and never queried through
evaluation.  All operations return new factors; factors are immutable after
construction and safe to share across threads.

Table layout is mixed-radix with the first proper variable as the most
significant digit and count indices as the trailing digits.  Tables are stored
as shaped C-order numpy arrays, whose ``ravel()`` view is exactly that flat
sequence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "FactorError",
    "CountScope",
    "FlatFactor",
    "MixedModeFactor",
    "count_eval",
    "mmf_eval",
    "consistent",
    "validity_mask",
    "augment",
    "augment_all",
    "multiply",
    "reduce_max",
    "reduce_max_with_argmax",
    "reduce_sum",
    "condition",
    "flatten",
    "shatter",
    "dump_factor",
]

FLATTEN_GUARD_ENTRIES = 1 << 25


class FactorError(ValueError):
    """Raised on malformed factor construction or misuse of an operation."""


@dataclass(frozen=True)
class CountScope:
    """Sorted set of binary variable ids whose enabled count indexes a table axis."""

    members: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.members)
        if not m:
            raise FactorError("count scope must be non-empty")
        if any(m[i] >= m[i + 1] for i in range(len(m) - 1)):
            raise FactorError("count scope members must be sorted ascending and unique")
        object.__setattr__(self, "members", m)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, var: int) -> bool:
        return var in self.members

    @property
    def size(self) -> int:
        """Number of count indices: 0..|members|."""
        return len(self.members) + 1


def count_eval(cs: CountScope, assignment: Mapping[int, int]) -> int:
    """Number of members of `cs` assigned 1.  All members must be assigned."""
    try:
        return sum(assignment[v] for v in cs.members)
    except KeyError as exc:
        raise FactorError(f"incomplete assignment: variable {exc.args[0]} missing") from exc


@dataclass(frozen=True)
class FlatFactor:
    """Dense tabular factor: mixed-radix table over an ordered variable scope."""

    scope: tuple[int, ...]
    cards: tuple[int, ...]
    table: np.ndarray  # 1-D, length prod(cards)

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        cards = tuple(int(c) for c in self.cards)
        if len(set(scope)) != len(scope):
            raise FactorError("duplicate variable in flat factor scope")
        if len(scope) != len(cards):
            raise FactorError("scope/cardinality length mismatch")
        tab = np.asarray(self.table, dtype=float).ravel()
        if tab.size != int(np.prod(cards, dtype=np.int64)):
            raise FactorError("table length must equal the product of scope cardinalities")
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "table", tab)

    def index(self, assignment: Mapping[int, int]) -> int:
        idx = 0
        for v, c in zip(self.scope, self.cards):
            try:
                val = assignment[v]
            except KeyError as exc:
                raise FactorError(f"incomplete assignment: variable {v} missing") from exc
            if not 0 <= val < c:
                raise FactorError(f"value {val} out of range for variable {v}")
            idx = idx * c + val
        return idx

    def value(self, assignment: Mapping[int, int]) -> float:
        return float(self.table[self.index(assignment)])


def _as_scopes(counters: Iterable[CountScope | Sequence[int]]) -> tuple[CountScope, ...]:
    out = []
    for c in counters:
        out.append(c if isinstance(c, CountScope) else CountScope(tuple(sorted(set(c)))))
    return tuple(out)


def validity_mask(
    proper: Sequence[int], cards: Sequence[int], counters: Sequence[CountScope]
) -> np.ndarray:
    """Boolean mask over the factor's shaped table: True where the entry's
    (proper assignment, count tuple) is realizable by some joint assignment.

    Exact: a count vector is reachable iff it lies in the Minkowski sum of the
    per-member unit steps (one step along the axes of every counter containing
    the member), after subtracting the pinned contribution of members that are
    also proper variables.
    """
    shape = tuple(cards) + tuple(c.size for c in counters)
    if not counters:
        return np.ones(shape, dtype=bool)
    n_p = len(cards)
    n_dim = len(shape)
    proper_pos = {v: i for i, v in enumerate(proper)}
    members = sorted({m for c in counters for m in c.members})
    free = [m for m in members if m not in proper_pos]

    # Count vectors reachable by the non-pinned members.
    reach = np.zeros(tuple(c.size for c in counters), dtype=bool)
    reach[(0,) * len(counters)] = True
    for m in free:
        axes = [i for i, c in enumerate(counters) if m in c]
        dst = tuple(slice(1, None) if i in axes else slice(None) for i in range(len(counters)))
        src = tuple(slice(0, -1) if i in axes else slice(None) for i in range(len(counters)))
        reach[dst] = reach[dst] | reach[src]

    # Per-entry pin-adjusted count vector, gathered from the reachable set.
    ks = []
    ok = np.ones((1,) * n_dim, dtype=bool)
    for i, c in enumerate(counters):
        ax = n_p + i
        k = np.arange(c.size, dtype=np.int64).reshape(
            (1,) * ax + (c.size,) + (1,) * (n_dim - ax - 1)
        )
        for m in c.members:
            if m in proper_pos:
                p = proper_pos[m]
                dig = np.arange(cards[p], dtype=np.int64).reshape(
                    (1,) * p + (cards[p],) + (1,) * (n_dim - p - 1)
                )
                k = k - dig
        ok = ok & (k >= 0)
        ks.append(np.clip(k, 0, c.size - 1))
    idx = tuple(np.broadcast_to(k, shape) for k in ks)
    mask = reach[idx] & np.broadcast_to(ok, shape)
    return np.ascontiguousarray(mask)


def consistent(
    counters: Sequence[CountScope | Sequence[int]],
    proper_vals: Mapping[int, int],
    counts: Sequence[int],
) -> bool:
    """Whether a count tuple is realizable given pinned values of shared members.

    Enumerates joint values of the shared variables (members of two or more
    counters, plus members pinned by `proper_vals`) and checks that every
    counter's residual count fits within its free, non-shared members.  Exact
    because non-shared members of distinct counters are independent.
    """
    cs = _as_scopes(counters)
    if len(counts) != len(cs):
        raise FactorError("counts length must match number of counters")
    for c, k in zip(cs, counts):
        if not 0 <= k <= len(c):
            return False
    membership: dict[int, list[int]] = {}
    for i, c in enumerate(cs):
        for m in c.members:
            membership.setdefault(m, []).append(i)
    pinned = {m: v for m, v in proper_vals.items() if m in membership}
    shared = sorted(m for m, occ in membership.items() if len(occ) >= 2 or m in pinned)
    free_counts = [sum(1 for m in c.members if m not in shared) for c in cs]
    enum_vars = [m for m in shared if m not in pinned]
    for bits in itertools.product((0, 1), repeat=len(enum_vars)):
        val = dict(zip(enum_vars, bits))
        val.update(pinned)
        feasible = True
        for i, c in enumerate(cs):
            residual = counts[i] - sum(val[m] for m in c.members if m in val)
            if not 0 <= residual <= free_counts[i]:
                feasible = False
                break
        if feasible:
            return True
    return False


class MixedModeFactor:
    """Real-valued factor over proper variables and count aggregators.

    `table` is shaped (proper cardinalities..., counter sizes...); `validity`
    marks realizable entries.  Construction canonicalizes: proper scope sorted
    by variable id, counters sorted by member tuple, identical-member counters
    merged onto one shared axis (their consistent entries coincide on the
    diagonal).
    """

    __slots__ = ("proper", "cards", "counters", "table", "validity")

    def __init__(self, proper, cards, counters, table, validity=None):
        proper = tuple(int(v) for v in proper)
        cards = tuple(int(c) for c in cards)
        if len(proper) != len(cards):
            raise FactorError("proper/cardinality length mismatch")
        if len(set(proper)) != len(proper):
            raise FactorError("duplicate variable in proper scope")
        if any(c < 2 for c in cards):
            raise FactorError("cardinality must be at least 2")
        counters = _as_scopes(counters)
        table = np.asarray(table, dtype=float)
        shape = cards + tuple(c.size for c in counters)
        if table.size != int(np.prod(shape, dtype=np.int64)):
            raise FactorError("table length does not match factor structure")
        table = table.reshape(shape)
        if validity is not None:
            validity = np.asarray(validity, dtype=bool).reshape(shape)

        # Canonical proper order.
        perm = sorted(range(len(proper)), key=lambda i: proper[i])
        if perm != list(range(len(proper))):
            axes = perm + list(range(len(proper), table.ndim))
            table = np.transpose(table, axes)
            if validity is not None:
                validity = np.transpose(validity, axes)
            proper = tuple(proper[i] for i in perm)
            cards = tuple(cards[i] for i in perm)

        # Canonical counter order, then merge identical-member counters.
        cperm = sorted(range(len(counters)), key=lambda i: counters[i].members)
        if cperm != list(range(len(counters))):
            axes = list(range(len(proper))) + [len(proper) + i for i in cperm]
            table = np.transpose(table, axes)
            if validity is not None:
                validity = np.transpose(validity, axes)
            counters = tuple(counters[i] for i in cperm)
        while True:
            dup = next(
                (
                    i
                    for i in range(len(counters) - 1)
                    if counters[i].members == counters[i + 1].members
                ),
                None,
            )
            if dup is None:
                break
            a1, a2 = len(proper) + dup, len(proper) + dup + 1
            table = np.moveaxis(np.diagonal(table, axis1=a1, axis2=a2), -1, a1)
            counters = counters[: dup + 1] + counters[dup + 2 :]
            validity = None  # structure changed: recompute below

        for v, c in zip(proper, cards):
            if c != 2 and any(v in cnt for cnt in counters):
                raise FactorError(f"variable {v} appears in a count scope but is not binary")

        self.proper = proper
        self.cards = cards
        self.counters = counters
        self.table = np.ascontiguousarray(table)
        if validity is None:
            validity = validity_mask(proper, cards, counters)
        self.validity = np.ascontiguousarray(validity)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def _build(cls, proper, cards, counters, table, validity):
        """Fast path for internal ops that already produce canonical structure."""
        f = cls.__new__(cls)
        f.proper = tuple(proper)
        f.cards = tuple(cards)
        f.counters = tuple(counters)
        f.table = table
        f.validity = validity
        return f

    @classmethod
    def constant(cls, value: float) -> "MixedModeFactor":
        return cls((), (), (), np.array([float(value)]))

    @classmethod
    def from_caf(cls, members: Sequence[int], values: Sequence[float]) -> "MixedModeFactor":
        """Factor depending on its scope only through the count of `members`."""
        cs = CountScope(tuple(sorted(set(members))))
        vals = np.asarray(values, dtype=float)
        if vals.size != cs.size:
            raise FactorError("count aggregator needs |members|+1 values")
        return cls((), (), (cs,), vals)

    @classmethod
    def from_flat(cls, flat: FlatFactor) -> "MixedModeFactor":
        return cls(flat.scope, flat.cards, (), flat.table)

    # -- inspection ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.table.shape

    @property
    def parameter_count(self) -> int:
        return int(self.table.size)

    @property
    def scope_vars(self) -> frozenset[int]:
        """All variables the factor depends on (proper plus counter members)."""
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

    def entry_index(self, assignment: Mapping[int, int]) -> tuple[int, ...]:
        idx = []
        for v, c in zip(self.proper, self.cards):
            try:
                val = assignment[v]
            except KeyError as exc:
                raise FactorError(f"incomplete assignment: variable {v} missing") from exc
            if not 0 <= val < c:
                raise FactorError(f"value {val} out of range for variable {v}")
            idx.append(val)
        for cs in self.counters:
            idx.append(count_eval(cs, assignment))
        return tuple(idx)

    def eval(self, assignment: Mapping[int, int]) -> float:
        idx = self.entry_index(assignment)
        if not self.validity[idx]:
            raise AssertionError(
                f"queried entry {idx} is inconsistent; factor construction bug"
            )
        return float(self.table[idx])

    __call__ = eval

    def scaled(self, s: float) -> "MixedModeFactor":
        return MixedModeFactor._build(
            self.proper, self.cards, self.counters, self.table * float(s), self.validity
        )

    def __repr__(self) -> str:
        cs = ",".join("#{" + ",".join(map(str, c.members)) + "}" for c in self.counters)
        return f"MixedModeFactor(proper={list(self.proper)}, counters=[{cs}], shape={self.shape})"


def mmf_eval(f: MixedModeFactor, assignment: Mapping[int, int]) -> float:
    """Evaluate `f` at a full assignment of its proper and count variables."""
    return f.eval(assignment)


# -- structure/gather machinery ----------------------------------------------


def _strides(shape: Sequence[int]) -> list[int]:
    out = [1] * len(shape)
    for i in range(len(shape) - 2, -1, -1):
        out[i] = out[i + 1] * shape[i + 1]
    return out


AxisMap = Sequence[tuple[tuple[int, ...], int]]


def _gather(res_shape: tuple[int, ...], src_shape: tuple[int, ...], src_axis_map: AxisMap) -> np.ndarray:
    """Flat indices into a source table, one per result entry.

    `src_axis_map[j] = (res_axes, offset)`: the source's j-th axis is indexed by
    the sum of the listed result-axis digits plus a constant offset.
    """
    strides = _strides(src_shape)
    n_dim = len(res_shape)
    idx = np.zeros(res_shape, dtype=np.int64)
    for j, (res_axes, off) in enumerate(src_axis_map):
        dig = np.full((1,) * n_dim, off, dtype=np.int64)
        for ax in res_axes:
            r = np.arange(res_shape[ax], dtype=np.int64).reshape(
                (1,) * ax + (res_shape[ax],) + (1,) * (n_dim - ax - 1)
            )
            dig = dig + r
        idx = idx + dig * strides[j]
    return idx.reshape(-1)


def _union_structure(g: MixedModeFactor, h: MixedModeFactor):
    """Canonical union structure plus each operand's axis map into it."""
    cards: dict[int, int] = dict(zip(g.proper, g.cards))
    for v, c in zip(h.proper, h.cards):
        if cards.setdefault(v, c) != c:
            raise FactorError(f"variable {v} has conflicting cardinalities")
    proper = tuple(sorted(cards))
    pcards = tuple(cards[v] for v in proper)
    members = {c.members for c in g.counters} | {c.members for c in h.counters}
    counters = tuple(CountScope(m) for m in sorted(members))
    res_shape = pcards + tuple(c.size for c in counters)

    def axis_map(f: MixedModeFactor) -> list[tuple[tuple[int, ...], int]]:
        out = []
        for v in f.proper:
            out.append(((proper.index(v),), 0))
        for c in f.counters:
            out.append(((len(proper) + counters.index(c),), 0))
        return out

    return proper, pcards, counters, res_shape, axis_map(g), axis_map(h)


def _binary_op(g: MixedModeFactor, h: MixedModeFactor, op) -> MixedModeFactor:
    proper, pcards, counters, res_shape, gmap, hmap = _union_structure(g, h)
    gi = _gather(res_shape, g.shape, gmap)
    hi = _gather(res_shape, h.shape, hmap)
    table = op(g.table.reshape(-1)[gi], h.table.reshape(-1)[hi]).reshape(res_shape)
    valid = validity_mask(proper, pcards, counters)
    return MixedModeFactor._build(proper, pcards, counters, table, valid)


def augment(g: MixedModeFactor, h: MixedModeFactor) -> MixedModeFactor:
    """Entrywise sum on the union structure; identical-member counters share an axis.

    Every entry (consistent or not) is filled; the validity mask is recomputed
    for the union structure.  For all full assignments the result evaluates to
    g + h.
    """
    return _binary_op(g, h, np.add)


def multiply(g: MixedModeFactor, h: MixedModeFactor) -> MixedModeFactor:
    """As `augment` with multiplication; identity is the all-ones empty factor."""
    return _binary_op(g, h, np.multiply)


def augment_all(factors: Sequence[MixedModeFactor]) -> MixedModeFactor:
    acc = MixedModeFactor.constant(0.0)
    for f in factors:
        acc = augment(acc, f)
    return acc


def _dropped_structure(g: MixedModeFactor, var: int):
    """Result structure after removing `var` plus the zero-offset source axis map.

    Counters emptied by the removal are deleted; counters that become
    member-identical after the drop are merged onto one result axis
    (consistency forces their counts equal).  Branch offsets are added on top
    of the returned map by reduce/condition.
    """
    in_proper = var in g.proper
    hit = {len(g.proper) + i for i, c in enumerate(g.counters) if var in c}
    if not in_proper and not hit:
        raise FactorError(f"variable not in factor: {var}")
    proper = tuple(v for v in g.proper if v != var)
    cards = tuple(c for v, c in zip(g.proper, g.cards) if v != var)
    dropped = [tuple(v for v in c.members if v != var) for c in g.counters]
    kept = sorted({m for m in dropped if m})
    counters = tuple(CountScope(m) for m in kept)
    res_shape = cards + tuple(c.size for c in counters)

    src_map: list[tuple[tuple[int, ...], int]] = []
    for v in g.proper:
        src_map.append((() if v == var else (proper.index(v),), 0))
    for m in dropped:
        src_map.append(((len(proper) + kept.index(m),) if m else (), 0))
    return proper, cards, counters, res_shape, src_map, hit, in_proper


def _branch_map(src_map: AxisMap, g: MixedModeFactor, var: int, hit, in_proper: bool, value: int) -> AxisMap:
    """Axis map querying the source at branch `var=value`."""
    pi = g.proper.index(var) if in_proper else -1
    out = []
    for j, (axes, off) in enumerate(src_map):
        if j == pi or j in hit:
            out.append((axes, off + value))
        else:
            out.append((axes, off))
    return out


def reduce_max_with_argmax(g: MixedModeFactor, var: int) -> tuple[MixedModeFactor, np.ndarray]:
    """Max out `var`; also return each entry's maximizing branch (-1 if none).

    Branches query the source with the proper axis fixed at the branch value
    and every counter containing `var` offset by it; a branch qualifies only if
    the queried entry is valid (count indices are in range by construction).
    Ties prefer branch 0.  Entries with no qualifying branch are invalid and
    filled with NaN.
    """
    proper, cards, counters, res_shape, src_map, hit, in_proper = _dropped_structure(g, var)
    flat_tab = g.table.reshape(-1)
    flat_val = g.validity.reshape(-1)
    best = best_q = arg = None
    for b in range(g.card_of(var)):
        gi = _gather(res_shape, g.shape, _branch_map(src_map, g, var, hit, in_proper, b))
        q = flat_val[gi]
        v = np.where(q, flat_tab[gi], -np.inf)
        if best is None:
            best, best_q, arg = v, q, np.where(q, 0, -1)
        else:
            take = q & (~best_q | (v > best))
            best = np.where(take, v, best)
            arg = np.where(take, b, arg)
            best_q = best_q | q
    table = np.where(best_q, best, np.nan).reshape(res_shape)
    struct_valid = validity_mask(proper, cards, counters)
    if not np.all(best_q.reshape(res_shape) | ~struct_valid):
        raise AssertionError("consistent entry with no qualifying branch; input masks corrupt")
    valid = struct_valid & best_q.reshape(res_shape)
    out = MixedModeFactor._build(proper, cards, counters, table, valid)
    return out, np.where(valid.reshape(-1), arg, -1).astype(np.int16)


def reduce_max(g: MixedModeFactor, var: int) -> MixedModeFactor:
    """Max out `var` from the proper scope and/or every counter containing it."""
    return reduce_max_with_argmax(g, var)[0]


def reduce_sum(g: MixedModeFactor, var: int) -> MixedModeFactor:
    """Sum out a proper variable not referenced by any counter."""
    if any(var in c for c in g.counters):
        raise FactorError(f"cannot sum out {var}: it appears in a count scope")
    proper, cards, counters, res_shape, src_map, hit, in_proper = _dropped_structure(g, var)
    flat_tab = g.table.reshape(-1)
    acc = None
    for b in range(g.card_of(var)):
        gi = _gather(res_shape, g.shape, _branch_map(src_map, g, var, hit, in_proper, b))
        acc = flat_tab[gi] if acc is None else acc + flat_tab[gi]
    valid = validity_mask(proper, cards, counters)
    return MixedModeFactor._build(proper, cards, counters, acc.reshape(res_shape), valid)


def condition(g: MixedModeFactor, var: int, value: int) -> MixedModeFactor:
    """Instantiate `var=value`: slice proper occurrences, shift count indices.

    For all assignments extending {var: value} the result evaluates as `g`.
    """
    if not 0 <= value < g.card_of(var):
        raise FactorError(f"value {value} out of range for variable {var}")
    proper, cards, counters, res_shape, src_map, hit, in_proper = _dropped_structure(g, var)
    gi = _gather(res_shape, g.shape, _branch_map(src_map, g, var, hit, in_proper, value))
    table = g.table.reshape(-1)[gi].reshape(res_shape)
    valid = validity_mask(proper, cards, counters)
    return MixedModeFactor._build(proper, cards, counters, table, valid)


def flatten(g: MixedModeFactor) -> FlatFactor:
    """Equivalent flat factor over the union of proper and counter variables.

    Guarded: refuses tables above 2**25 entries.
    """
    vars_ = sorted(g.scope_vars)
    cards = [g.card_of(v) for v in vars_]
    total = 1
    for c in cards:
        total *= c
        if total > FLATTEN_GUARD_ENTRIES:
            raise FactorError("flatten too large")
    res_shape = tuple(cards)
    pos = {v: i for i, v in enumerate(vars_)}
    src_map: list[tuple[tuple[int, ...], int]] = []
    for v in g.proper:
        src_map.append(((pos[v],), 0))
    for c in g.counters:
        src_map.append((tuple(pos[m] for m in c.members), 0))
    gi = _gather(res_shape, g.shape, src_map)
    return FlatFactor(tuple(vars_), tuple(cards), g.table.reshape(-1)[gi])


def shatter(g: MixedModeFactor) -> MixedModeFactor:
    """Equivalent factor whose counters are disjoint and avoid the proper scope.

    Counter members are partitioned into atoms by their membership pattern;
    members shared with the proper scope contribute through the proper axes.
    The shattered table has no inconsistent entries.
    """
    if not g.counters:
        return g
    proper_set = set(g.proper)
    groups: dict[tuple[int, ...], list[int]] = {}
    for m in sorted({m for c in g.counters for m in c.members}):
        if m in proper_set:
            continue
        key = tuple(i for i, c in enumerate(g.counters) if m in c)
        groups.setdefault(key, []).append(m)
    atoms = sorted(tuple(v) for v in groups.values())
    counters = tuple(CountScope(a) for a in atoms)
    res_shape = g.cards + tuple(c.size for c in counters)
    ppos = {v: i for i, v in enumerate(g.proper)}
    src_map: list[tuple[tuple[int, ...], int]] = []
    for i in range(len(g.proper)):
        src_map.append(((i,), 0))
    for c in g.counters:
        mset = set(c.members)
        axes = [ppos[m] for m in c.members if m in proper_set]
        axes += [len(g.proper) + j for j, a in enumerate(atoms) if set(a) <= mset]
        src_map.append((tuple(axes), 0))
    gi = _gather(res_shape, g.shape, src_map)
    table = g.table.reshape(-1)[gi].reshape(res_shape)
    valid = validity_mask(g.proper, g.cards, counters)
    return MixedModeFactor._build(g.proper, g.cards, counters, table, valid)


def dump_factor(f: MixedModeFactor, names: Mapping[int, str] | None = None) -> str:
    """Textual dump: one line per entry, `proper | counts | value`, `!` if invalid."""
    names = names or {}
    header_p = " ".join(names.get(v, f"v{v}") for v in f.proper) or "-"
    header_c = " ".join(
        "#{" + ",".join(names.get(m, f"v{m}") for m in c.members) + "}" for c in f.counters
    ) or "-"
    lines = [f"factor over [{header_p}] counts [{header_c}]"]
    n_p = len(f.proper)
    for idx in np.ndindex(f.shape):
        p = " ".join(
            f"{names.get(v, f'v{v}')}={idx[i]}" for i, v in enumerate(f.proper)
        ) or "-"
        k = " ".join(str(x) for x in idx[n_p:]) or "-"
        if f.validity[idx]:
            lines.append(f"{p} | {k} | {f.table[idx]!r}")
        else:
            lines.append(f"{p} | {k} | !")
    return "\n".join(lines) + "\n"
