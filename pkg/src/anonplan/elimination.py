"""Variable elimination over sets of mixed-mode factors.

Implements max-value elimination, argmax with traceback for joint assignment
recovery, and a greedy elimination-order heuristic scoring the representation
size of the next intermediate factor.  Flat factors are the special case of
mixed-mode factors with no counters, so one code path serves both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .factors import (
    FactorError,
    MixedModeFactor,
    augment,
    reduce_max_with_argmax,
)

__all__ = [
    "FactorSet",
    "VEResult",
    "greedy_order",
    "eliminate_max",
    "eliminate_argmax",
]


class FactorSet:
    """Mutable collection of factors with a variable -> positions index."""

    def __init__(self, factors: Iterable[MixedModeFactor] = ()):
        self._factors: dict[int, MixedModeFactor] = {}
        self._index: dict[int, set[int]] = {}
        self._next = 0
        for f in factors:
            self.add(f)

    def add(self, f: MixedModeFactor) -> int:
        pos = self._next
        self._next += 1
        self._factors[pos] = f
        for v in f.scope_vars:
            self._index.setdefault(v, set()).add(pos)
        return pos

    def remove(self, pos: int) -> MixedModeFactor:
        f = self._factors.pop(pos)
        for v in f.scope_vars:
            s = self._index[v]
            s.discard(pos)
            if not s:
                del self._index[v]
        return f

    def mentions(self, var: int) -> list[int]:
        return sorted(self._index.get(var, ()))

    def factors(self) -> list[MixedModeFactor]:
        return [self._factors[p] for p in sorted(self._factors)]

    def variables(self) -> set[int]:
        return set(self._index)

    def copy(self) -> "FactorSet":
        fs = FactorSet()
        fs._factors = dict(self._factors)
        fs._index = {v: set(s) for v, s in self._index.items()}
        fs._next = self._next
        return fs

    def __len__(self) -> int:
        return len(self._factors)

    def _check_index(self) -> bool:
        want: dict[int, set[int]] = {}
        for pos, f in self._factors.items():
            for v in f.scope_vars:
                want.setdefault(v, set()).add(pos)
        return want == self._index


@dataclass
class _Structure:
    """Scope signature used to score eliminations without materializing tables."""

    proper: dict[int, int]  # var -> card
    counters: set[tuple[int, ...]]

    @classmethod
    def of(cls, f: MixedModeFactor) -> "_Structure":
        return cls(dict(zip(f.proper, f.cards)), {c.members for c in f.counters})

    def union(self, other: "_Structure") -> "_Structure":
        p = dict(self.proper)
        p.update(other.proper)
        return _Structure(p, self.counters | other.counters)

    def drop(self, var: int) -> "_Structure":
        p = {v: c for v, c in self.proper.items() if v != var}
        cs = set()
        for m in self.counters:
            m2 = tuple(v for v in m if v != var)
            if m2:
                cs.add(m2)
        return _Structure(p, cs)

    def entry_count(self) -> int:
        n = 1
        for c in self.proper.values():
            n *= c
        for m in self.counters:
            n *= len(m) + 1
        return n

    def vars(self) -> set[int]:
        s = set(self.proper)
        for m in self.counters:
            s.update(m)
        return s


def greedy_order(fs: FactorSet, candidates: Iterable[int]) -> list[int]:
    """Order candidates by repeatedly picking the variable whose elimination
    yields the smallest post-reduce representation; ties break on lowest id."""
    remaining = set(candidates)
    structs = {pos: _Structure.of(f) for pos, f in zip(sorted(fs._factors), fs.factors())}
    index: dict[int, set[int]] = {v: set(ps) for v, ps in fs._index.items()}
    order: list[int] = []
    next_pos = max(structs, default=-1) + 1
    while remaining:
        best_v, best_score = None, None
        for v in sorted(remaining):
            positions = index.get(v, ())
            u = _Structure({}, set())
            for p in positions:
                u = u.union(structs[p])
            score = u.drop(v).entry_count()
            if best_score is None or score < best_score:
                best_v, best_score = v, score
        order.append(best_v)
        remaining.discard(best_v)
        positions = list(index.get(best_v, ()))
        u = _Structure({}, set())
        for p in positions:
            u = u.union(structs[p])
        new = u.drop(best_v)
        for p in positions:
            for w in structs[p].vars():
                s = index.get(w)
                if s is not None:
                    s.discard(p)
            del structs[p]
        structs[next_pos] = new
        for w in new.vars():
            index.setdefault(w, set()).add(next_pos)
        next_pos += 1
    return order


@dataclass
class VEResult:
    value: float
    assignment: dict[int, int] | None
    peak_entries: int
    step_entries: list[int] = field(default_factory=list)


def _run(fs: FactorSet, order: Sequence[int], want_argmax: bool) -> VEResult:
    order = list(order)
    if len(set(order)) != len(order):
        raise FactorError("elimination order contains duplicates")
    work = fs.copy()
    trace: list[tuple[int, MixedModeFactor | None, np.ndarray | None]] = []
    peak = 0
    steps: list[int] = []
    for var in order:
        positions = work.mentions(var)
        if not positions:
            # Reduce over an implicit zero factor: empty-scope zero result.
            work.add(MixedModeFactor.constant(0.0))
            trace.append((var, None, None))
            steps.append(1)
            continue
        collected = [work.remove(p) for p in positions]
        f = collected[0]
        for g in collected[1:]:
            f = augment(f, g)
        reduced, branches = reduce_max_with_argmax(f, var)
        peak = max(peak, f.parameter_count)
        steps.append(f.parameter_count)
        work.add(reduced)
        trace.append((var, reduced if want_argmax else None, branches if want_argmax else None))
    leftovers = work.factors()
    bad = [f for f in leftovers if f.scope_vars]
    if bad:
        raise FactorError("uneliminated variables remain: "
                          + ", ".join(map(str, sorted(set().union(*(f.scope_vars for f in bad))))))
    value = float(sum(float(f.table) for f in leftovers))
    assignment = None
    if want_argmax:
        assignment = {}
        for var, reduced, branches in reversed(trace):
            if reduced is None:
                assignment[var] = 0
                continue
            idx = reduced.entry_index(assignment)
            flat = int(np.ravel_multi_index(idx, reduced.shape)) if reduced.shape else 0
            b = int(branches[flat])
            if b < 0:
                raise AssertionError("argmax traceback hit an invalid entry")
            assignment[var] = b
        assignment = dict(sorted(assignment.items()))
    return VEResult(value, assignment, peak, steps)


def eliminate_max(fs: FactorSet, order: Sequence[int]) -> float:
    """Maximum of the factor sum over all assignments, per the elimination order."""
    if not len(fs):
        return 0.0
    return _run(fs, order, want_argmax=False).value


def eliminate_argmax(fs: FactorSet, order: Sequence[int]) -> tuple[float, dict[int, int]]:
    """Max value plus a maximizing assignment recovered by traceback replay.

    Variables appearing in no factor are assigned 0 (branch ties also prefer 0).
    """
    if not len(fs):
        return 0.0, {v: 0 for v in order}
    res = _run(fs, order, want_argmax=True)
    return res.value, res.assignment


def eliminate_max_stats(fs: FactorSet, order: Sequence[int]) -> VEResult:
    """As eliminate_max but returning peak/per-step representation sizes."""
    if not len(fs):
        return VEResult(0.0, None, 0, [])
    return _run(fs, order, want_argmax=False)
