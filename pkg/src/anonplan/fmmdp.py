"""Factored multiagent MDP model: two-slice transition factors, additive
rewards, linear value-function bases, back-projection, and greedy action
selection on the induced coordination graph."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import factors as fa
from .elimination import FactorSet, eliminate_argmax, greedy_order
from .factors import CountScope, FactorError, FlatFactor, MixedModeFactor

__all__ = [
    "Variable",
    "VariableTable",
    "FactoredModel",
    "BasisFunction",
    "BackProjection",
    "indicator_basis",
    "backproject",
    "q_terms",
    "greedy_action",
    "model_to_json",
    "model_from_json",
]

MODEL_FORMAT = "anonplan-model/1"

STATE, ACTION, NEXT_STATE = "state", "action", "next-state"


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: str  # state | action | next-state
    cardinality: int = 2

    def __post_init__(self):
        if self.kind not in (STATE, ACTION, NEXT_STATE):
            raise FactorError(f"unknown variable kind {self.kind!r}")
        if self.cardinality < 2:
            raise FactorError("cardinality must be at least 2")


class VariableTable:
    """Contiguously-id'd variables plus the state <-> next-state pairing."""

    def __init__(self, variables: Sequence[Variable], pairs: Mapping[int, int]):
        ids = [v.id for v in variables]
        if ids != list(range(len(variables))):
            raise FactorError("variable ids must be dense and contiguous from 0")
        self.variables = tuple(variables)
        self.pairs = dict(pairs)  # state id -> next-state id
        self.inverse_pairs = {ns: s for s, ns in self.pairs.items()}
        for s, ns in self.pairs.items():
            if self[s].kind != STATE or self[ns].kind != NEXT_STATE:
                raise FactorError("pairs must map state ids to next-state ids")

    def __getitem__(self, vid: int) -> Variable:
        return self.variables[vid]

    def __len__(self) -> int:
        return len(self.variables)

    def ids_of(self, kind: str) -> list[int]:
        return [v.id for v in self.variables if v.kind == kind]

    @property
    def names(self) -> dict[int, str]:
        return {v.id: v.name for v in self.variables}


@dataclass
class BasisFunction:
    """Flat value-function component over current-state variables."""

    id: int
    flat: FlatFactor

    def __post_init__(self):
        if not np.all(np.isfinite(self.flat.table)):
            raise FactorError("basis values must be finite")


@dataclass
class BackProjection:
    """Expected next-step basis value as a factor over the basis scope's parents."""

    basis_id: int
    factor: MixedModeFactor


class FactoredModel:
    """Per-variable transition CPDs (mixed-mode), additive rewards, discount.

    Each CPD is a factor over {next-state child} plus its current state/action
    parents; for every consistent parent assignment the child distribution must
    sum to one.
    """

    def __init__(
        self,
        variables: VariableTable,
        cpds: Mapping[int, MixedModeFactor],
        rewards: Sequence[MixedModeFactor],
        discount: float,
    ):
        if not 0.0 <= discount < 1.0:
            raise FactorError("discount must lie in [0, 1)")
        self.variables = variables
        self.cpds = dict(cpds)
        self.rewards = tuple(rewards)
        self.discount = float(discount)
        self._validate()

    def _validate(self):
        current = set(self.variables.ids_of(STATE)) | set(self.variables.ids_of(ACTION))
        for ns, cpd in self.cpds.items():
            if self.variables[ns].kind != NEXT_STATE:
                raise FactorError(f"CPD child {ns} is not a next-state variable")
            if ns not in cpd.proper:
                raise FactorError(f"CPD for {ns} must include the child as a proper variable")
            others = cpd.scope_vars - {ns}
            if not others <= current:
                raise FactorError(f"CPD parents for {ns} must be current state/action variables")
            total = None
            ax = cpd.proper.index(ns)
            total = cpd.table.sum(axis=ax)
            ok = cpd.validity.take(0, axis=ax)
            if not np.allclose(total[ok], 1.0, atol=1e-9, rtol=0.0):
                raise FactorError(f"CPD for {ns} does not normalize on consistent entries")
        for r in self.rewards:
            if not r.scope_vars <= current:
                raise FactorError("reward scopes may reference only current state/action variables")

    def state_ids(self) -> list[int]:
        return self.variables.ids_of(STATE)

    def action_ids(self) -> list[int]:
        return self.variables.ids_of(ACTION)

    def reward_value(self, assignment: Mapping[int, int]) -> float:
        return sum(r.eval(assignment) for r in self.rewards)


def indicator_basis(model: FactoredModel) -> list[BasisFunction]:
    """Per state variable, the indicators of being enabled and disabled."""
    out = []
    bid = 0
    for v in model.state_ids():
        card = model.variables[v].cardinality
        hot = np.zeros(card)
        hot[-1] = 1.0
        out.append(BasisFunction(bid, FlatFactor((v,), (card,), hot)))
        bid += 1
        cold = np.zeros(card)
        cold[0] = 1.0
        out.append(BasisFunction(bid, FlatFactor((v,), (card,), cold)))
        bid += 1
    return out


def backproject(h: BasisFunction, model: FactoredModel) -> BackProjection:
    """Expected value of `h` one step ahead, as a factor over the parents of
    its scope: multiply the scope variables' CPDs with `h` lifted to the
    next-state copies, then sum the next-state variables out (ascending id)."""
    scope = h.flat.scope
    bad = [v for v in scope if v not in model.variables.pairs]
    if bad:
        raise FactorError(f"basis scope must be state variables with next-state pairs: {bad}")
    ns_ids = [model.variables.pairs[v] for v in scope]
    lifted = MixedModeFactor(ns_ids, h.flat.cards, (), h.flat.table)
    prod = lifted
    for ns in ns_ids:
        prod = fa.multiply(prod, model.cpds[ns])
    for ns in sorted(ns_ids):
        prod = fa.reduce_sum(prod, ns)
    return BackProjection(h.id, prod)


def q_terms(
    model: FactoredModel,
    basis: Sequence[BasisFunction],
    weights: Sequence[float],
    projections: Sequence[BackProjection] | None = None,
) -> list[MixedModeFactor]:
    """Additive Q decomposition: all reward factors plus each back-projection
    scaled by discount times its weight."""
    if len(weights) != len(basis):
        raise FactorError("weight vector length must match basis size")
    if projections is None:
        projections = [backproject(h, model) for h in basis]
    terms = list(model.rewards)
    for h, w, g in zip(basis, weights, projections):
        if g.basis_id != h.id:
            raise FactorError("projection/basis id mismatch")
        terms.append(g.factor.scaled(model.discount * float(w)))
    return terms


def greedy_action(
    model: FactoredModel,
    basis: Sequence[BasisFunction],
    weights: Sequence[float],
    state: Mapping[int, int],
    projections: Sequence[BackProjection] | None = None,
    terms: Sequence[MixedModeFactor] | None = None,
) -> dict[int, int]:
    """Joint action maximizing the factored Q at `state`: condition every Q
    term on the state, then run argmax elimination over the action variables."""
    for v in model.state_ids():
        if v not in state:
            raise FactorError(f"incomplete assignment: variable {v} missing")
    if terms is None:
        terms = q_terms(model, basis, weights, projections)
    conditioned = []
    for t in terms:
        for v in sorted(t.scope_vars):
            if model.variables[v].kind == STATE:
                t = fa.condition(t, v, state[v])
        conditioned.append(t)
    fs = FactorSet(conditioned)
    actions = model.action_ids()
    order = greedy_order(fs, actions)
    _, assignment = eliminate_argmax(fs, order)
    return {a: assignment.get(a, 0) for a in actions}


# -- serialization -------------------------------------------------------------


def _factor_to_json(f: MixedModeFactor) -> dict:
    flat_valid = f.validity.reshape(-1)
    vals = f.table.reshape(-1)
    return {
        "proper": list(f.proper),
        "cards": list(f.cards),
        "counters": [list(c.members) for c in f.counters],
        "entries": [[int(i), float(vals[i])] for i in np.flatnonzero(flat_valid)],
    }


def _factor_from_json(d: dict) -> MixedModeFactor:
    counters = [CountScope(tuple(m)) for m in d["counters"]]
    shape = tuple(d["cards"]) + tuple(c.size for c in counters)
    table = np.full(int(np.prod(shape, dtype=np.int64)), np.nan)
    for i, v in d["entries"]:
        table[i] = v
    f = MixedModeFactor(d["proper"], d["cards"], counters, table)
    if sorted(int(i) for i, _ in d["entries"]) != list(np.flatnonzero(f.validity.reshape(-1))):
        raise FactorError("serialized entries do not match the consistent-entry set")
    return f


def model_to_json(model: FactoredModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "discount": model.discount,
        "variables": [
            {"id": v.id, "name": v.name, "kind": v.kind, "cardinality": v.cardinality}
            for v in model.variables.variables
        ],
        "pairs": {str(s): ns for s, ns in model.variables.pairs.items()},
        "cpds": {str(ns): _factor_to_json(f) for ns, f in sorted(model.cpds.items())},
        "rewards": [_factor_to_json(r) for r in model.rewards],
    }


def model_from_json(doc: dict) -> FactoredModel:
    if doc.get("format") != MODEL_FORMAT:
        raise FactorError(f"unsupported model format {doc.get('format')!r}")
    variables = VariableTable(
        [Variable(v["id"], v["name"], v["kind"], v["cardinality"]) for v in doc["variables"]],
        {int(s): ns for s, ns in doc["pairs"].items()},
    )
    cpds = {int(ns): _factor_from_json(d) for ns, d in doc["cpds"].items()}
    rewards = [_factor_from_json(d) for d in doc["rewards"]]
    return FactoredModel(variables, cpds, rewards, doc["discount"])


def save_model(model: FactoredModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(model), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> FactoredModel:
    with open(path) as fh:
        return model_from_json(json.load(fh))
