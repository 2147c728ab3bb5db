"""SIS disease-control domain: random graph generation, factored-model
construction with counter-structured transition factors, and instance file I/O.

Node states are healthy/infected; controlled nodes carry a vaccination action.
A healthy node is infected with probability 1-(1-beta)^k where k is its number
of infected neighbors; an infected node stays infected with probability
1-delta; vaccination forces the node healthy.  Rewards are -lambda1 per
vaccination and -lambda2 per infected node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .factors import CountScope, FactorError, MixedModeFactor
from .fmmdp import ACTION, NEXT_STATE, STATE, FactoredModel, Variable, VariableTable

__all__ = [
    "EpidemicInstance",
    "GraphGenerationError",
    "random_graph",
    "build_sis_model",
    "save_instance",
    "load_instance",
]

GRAPH_FORMAT = "anonplan-graph/1"

DEFAULT_BETA = 0.6
DEFAULT_DELTA = 0.3
DEFAULT_LAMBDA1 = 1.0
DEFAULT_LAMBDA2 = 50.0
DEFAULT_GAMMA = 0.95  # unstated in the experimental protocol; echoed in every artifact


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpidemicInstance:
    n: int
    edges: tuple[tuple[int, int], ...]  # canonical: u < v, sorted
    controlled: tuple[int, ...]
    beta: float = DEFAULT_BETA
    delta: float = DEFAULT_DELTA
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    gamma: float = DEFAULT_GAMMA
    seed: int = 0

    def __post_init__(self):
        edges = sorted((min(u, v), max(u, v)) for u, v in self.edges)
        if len(set(edges)) != len(edges):
            raise FactorError("duplicate edges")
        for u, v in edges:
            if u == v:
                raise FactorError("self-loops are not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise FactorError("edge endpoint out of range")
        controlled = tuple(sorted(set(self.controlled)))
        if any(not 0 <= c < self.n for c in controlled):
            raise FactorError("controlled node out of range")
        if not (0.0 <= self.beta <= 1.0 and 0.0 <= self.delta <= 1.0):
            raise FactorError("beta and delta must lie in [0, 1]")
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "controlled", controlled)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return tuple(tuple(sorted(x)) for x in nb)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1
        return a

    @property
    def mean_degree(self) -> float:
        return 2.0 * len(self.edges) / self.n

    def infection_prob(self, healthy_count_infected: np.ndarray | int) -> np.ndarray | float:
        """P(infected next | healthy now, k infected neighbors, no vaccination)."""
        return 1.0 - (1.0 - self.beta) ** np.asarray(healthy_count_infected)


def _sample_degrees(rng: np.random.Generator, n: int, k_max: int) -> np.ndarray:
    ks = np.arange(1, k_max + 1)
    p = (1.0 / ks) / np.sum(1.0 / ks)
    deg = rng.choice(ks, size=n, p=p)
    if deg.sum() % 2 == 1:
        i = int(rng.integers(n))
        deg[i] += 1 if deg[i] < k_max else -1
    return deg


def random_graph(
    n: int,
    k_max: int,
    seed: int,
    n_controlled: int = 0,
    *,
    beta: float = DEFAULT_BETA,
    delta: float = DEFAULT_DELTA,
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
    gamma: float = DEFAULT_GAMMA,
    max_retries: int = 500,
) -> EpidemicInstance:
    """Undirected random graph with per-node target degree drawn from the
    truncated 1/k law on [1, k_max], realized by configuration-model pairing
    with whole-attempt rejection of self-loops and multi-edges.

    Deterministic given the seed.  The controlled subset is drawn uniformly
    without replacement.
    """
    if n < 2:
        raise FactorError("need at least two nodes")
    if not 1 <= k_max < n:
        raise FactorError("k_max must lie in [1, n)")
    if not 0 <= n_controlled <= n:
        raise FactorError("n_controlled must lie in [0, n]")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    degrees = _sample_degrees(rng, n, k_max)
    stubs = np.repeat(np.arange(n), degrees)
    edges = None
    for _ in range(max_retries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        us, vs = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
        if np.any(us == vs):
            continue
        cand = sorted(zip(us.tolist(), vs.tolist()))
        if len(set(cand)) != len(cand):
            continue
        edges = tuple(cand)
        break
    if edges is None:
        raise GraphGenerationError("degree sequence unrealizable")
    controlled = tuple(sorted(rng.choice(n, size=n_controlled, replace=False).tolist()))
    return EpidemicInstance(
        n=n, edges=edges, controlled=controlled,
        beta=beta, delta=delta, lambda1=lambda1, lambda2=lambda2, gamma=gamma, seed=seed,
    )


def variable_table(inst: EpidemicInstance) -> VariableTable:
    """ids: states 0..n-1, actions n..n+g-1 (controlled ascending), next states after."""
    n, g = inst.n, len(inst.controlled)
    variables = [Variable(i, f"x{i}", STATE) for i in range(n)]
    variables += [Variable(n + j, f"a{c}", ACTION) for j, c in enumerate(inst.controlled)]
    variables += [Variable(n + g + i, f"x{i}'", NEXT_STATE) for i in range(n)]
    pairs = {i: n + g + i for i in range(n)}
    return VariableTable(variables, pairs)


def action_id(inst: EpidemicInstance, node: int) -> int:
    return inst.n + inst.controlled.index(node)


def _node_cpd(inst: EpidemicInstance, table: VariableTable, node: int) -> MixedModeFactor:
    child = table.pairs[node]
    nb = inst.neighbors[node]
    controlled = node in inst.controlled
    proper = [child, node] + ([action_id(inst, node)] if controlled else [])
    k_sz = len(nb) + 1
    a_vals = (0, 1) if controlled else (0,)
    shape = (2, 2, len(a_vals), k_sz)
    tab = np.empty(shape)
    for x in (0, 1):
        for ai, a in enumerate(a_vals):
            for k in range(k_sz):
                p = (1 - a) * (1 - (1 - inst.beta) ** k) if x == 0 else (1 - a) * (1 - inst.delta)
                tab[1, x, ai, k] = p
                tab[0, x, ai, k] = 1.0 - p
    if not controlled:
        tab = tab[:, :, 0, :]
    if not nb:
        tab = tab[..., 0]
        return MixedModeFactor(proper, (2,) * len(proper), (), tab)
    return MixedModeFactor(proper, (2,) * len(proper), (CountScope(nb),), tab)


def build_sis_model(inst: EpidemicInstance) -> FactoredModel:
    """Factored model with one counter-structured CPD per node and additive
    per-node infection/vaccination cost factors."""
    table = variable_table(inst)
    cpds = {table.pairs[i]: _node_cpd(inst, table, i) for i in range(inst.n)}
    rewards = [
        MixedModeFactor((i,), (2,), (), np.array([0.0, -inst.lambda2])) for i in range(inst.n)
    ]
    rewards += [
        MixedModeFactor((action_id(inst, c),), (2,), (), np.array([0.0, -inst.lambda1]))
        for c in inst.controlled
    ]
    return FactoredModel(table, cpds, rewards, inst.gamma)


# -- instance file I/O ---------------------------------------------------------


def instance_text(inst: EpidemicInstance, provenance: str | None = None) -> str:
    lines = [GRAPH_FORMAT]
    lines.append(f"n {inst.n}")
    lines.append("controlled " + " ".join(str(c) for c in inst.controlled))
    lines.append(
        f"params {inst.beta!r} {inst.delta!r} {inst.lambda1!r} "
        f"{inst.lambda2!r} {inst.gamma!r} {inst.seed}"
    )
    for u, v in inst.edges:
        lines.append(f"edge {u} {v}")
    if provenance:
        lines.append(f"# {provenance}")
    return "\n".join(lines) + "\n"


def save_instance(inst: EpidemicInstance, path, provenance: str | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(instance_text(inst, provenance))


def load_instance(path) -> EpidemicInstance:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != GRAPH_FORMAT:
        raise FactorError(f"not an {GRAPH_FORMAT} file")
    n = None
    controlled: tuple[int, ...] = ()
    params = None
    edges: list[tuple[int, int]] = []
    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        head, *rest = ln.split()
        if head == "n":
            n = int(rest[0])
        elif head == "controlled":
            controlled = tuple(int(x) for x in rest)
        elif head == "params":
            params = [float(x) for x in rest[:5]] + [int(rest[5])]
        elif head == "edge":
            edges.append((int(rest[0]), int(rest[1])))
        else:
            raise FactorError(f"unknown line in instance file: {ln!r}")
    if n is None or params is None:
        raise FactorError("instance file missing n or params line")
    beta, delta, lambda1, lambda2, gamma, seed = params
    return EpidemicInstance(
        n=n, edges=tuple(edges), controlled=controlled,
        beta=beta, delta=delta, lambda1=lambda1, lambda2=lambda2, gamma=gamma, seed=seed,
    )
