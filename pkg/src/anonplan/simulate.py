"""Monte Carlo policy evaluation on SIS instances.

Policies: uniform random vaccination, the reactive heuristic that vaccinates
exactly the currently infected controlled nodes, and greedy action selection
against a weighted-basis Q function.  Randomness comes from counter-based
streams derived per (start index, run index), so runs are order-independent
and reproducible; within one run the draw order per step is fixed (policy
draws first, then one uniform per node for the transition).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .epidemics import EpidemicInstance, action_id, build_sis_model
from .factors import FactorError
from .fmmdp import BasisFunction, FactoredModel, backproject, greedy_action, q_terms

__all__ = [
    "substream",
    "step",
    "copystate_action",
    "RandomPolicy",
    "CopystatePolicy",
    "GreedyPolicy",
    "PolicyEvaluation",
    "evaluate",
    "bootstrap_ci",
]


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent counter-based stream for (seed, path): the path ids are folded
    into a Philox key with splitmix64 steps."""
    key = _splitmix64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    for p in path:
        key = _splitmix64(key ^ _splitmix64(int(p) & 0xFFFFFFFFFFFFFFFF))
    return np.random.Generator(np.random.Philox(key=np.uint64(key)))


def infection_probs(inst: EpidemicInstance, x: np.ndarray, a_full: np.ndarray) -> np.ndarray:
    """Per-node probability of being infected next step; `a_full` has one slot
    per node (zero at uncontrolled nodes)."""
    k = inst.adjacency @ x
    p_healthy = 1.0 - (1.0 - inst.beta) ** k
    p = np.where(x == 0, p_healthy, 1.0 - inst.delta)
    return (1.0 - a_full) * p


def _full_action(inst: EpidemicInstance, a: Mapping[int, int] | np.ndarray) -> np.ndarray:
    full = np.zeros(inst.n)
    if isinstance(a, np.ndarray):
        full[list(inst.controlled)] = a
    else:
        for node in inst.controlled:
            full[node] = a.get(action_id(inst, node), 0)
    return full


def step(
    inst: EpidemicInstance, x: np.ndarray, a: Mapping[int, int] | np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """Sample each node's next state from its transition law; the reward is
    computed on (x, a) before the transition."""
    full = _full_action(inst, a)
    p = infection_probs(inst, x, full)
    u = rng.random(inst.n)
    x_next = (u < p).astype(np.int8)
    reward = -inst.lambda1 * float(full.sum()) - inst.lambda2 * float(x.sum())
    return x_next, reward


def copystate_action(inst: EpidemicInstance, x: np.ndarray) -> np.ndarray:
    """Vaccinate exactly the infected controlled nodes."""
    return x[list(inst.controlled)].astype(np.int8)


class RandomPolicy:
    """Independent fair coin per controlled node per step."""

    def __init__(self, inst: EpidemicInstance):
        self.inst = inst
        self.draws_per_step = len(inst.controlled)

    def actions(self, X: np.ndarray, u: np.ndarray | None) -> np.ndarray:
        return (u < 0.5).astype(np.int8)


class CopystatePolicy:
    draws_per_step = 0

    def __init__(self, inst: EpidemicInstance):
        self.inst = inst

    def actions(self, X: np.ndarray, u=None) -> np.ndarray:
        return X[:, list(self.inst.controlled)].astype(np.int8)


class GreedyPolicy:
    """Greedy action against the factored Q of (basis, weights).

    With per-variable indicator bases every conditioned Q term touches at most
    one action variable, so the joint argmax decomposes per agent; that closed
    form is used here (vaccinate iff discount * P(infected next) * (w_healthy -
    w_infected) exceeds the action cost).  `greedy_action` in fmmdp is the
    general reference path; equality is covered by tests.
    """

    draws_per_step = 0

    def __init__(
        self,
        inst: EpidemicInstance,
        basis: Sequence[BasisFunction],
        weights: np.ndarray,
        model: FactoredModel | None = None,
    ):
        self.inst = inst
        self.model = model or build_sis_model(inst)
        self.basis = list(basis)
        self.weights = np.asarray(weights, dtype=float)
        # Per state variable, the weight on its enabled/disabled indicators.
        n = inst.n
        self.w_hot = np.zeros(n)
        self.w_cold = np.zeros(n)
        for h, w in zip(self.basis, self.weights):
            if len(h.flat.scope) != 1:
                raise FactorError("greedy fast path requires per-variable bases")
            v = h.flat.scope[0]
            self.w_hot[v] += w * h.flat.table[1]
            self.w_cold[v] += w * h.flat.table[0]

    def actions(self, X: np.ndarray, u=None) -> np.ndarray:
        inst = self.inst
        K = X @ inst.adjacency
        p_healthy = 1.0 - (1.0 - inst.beta) ** K
        P = np.where(X == 0, p_healthy, 1.0 - inst.delta)
        gain = inst.gamma * P * (self.w_cold - self.w_hot) - inst.lambda1
        return (gain[:, list(inst.controlled)] > 0).astype(np.int8)

    def action_for_state(self, x: np.ndarray) -> dict[int, int]:
        a = self.actions(x.reshape(1, -1))[0]
        return {action_id(self.inst, c): int(v) for c, v in zip(self.inst.controlled, a)}


@dataclass
class PolicyEvaluation:
    """Raw discounted returns per (start, run) plus box statistics of the
    per-start mean returns (median, quartiles, whiskers at 1.5 IQR)."""

    returns: np.ndarray  # (n_starts, n_runs)
    start_states: np.ndarray  # (n_starts, n)
    horizon: int
    discounted: bool
    seed: int

    @property
    def start_means(self) -> np.ndarray:
        return self.returns.mean(axis=1)

    @property
    def grand_mean(self) -> float:
        return float(self.start_means.mean())

    def start_summary(self) -> list[dict]:
        out = []
        for s in range(self.returns.shape[0]):
            out.append({"start_id": s, **_box_stats(self.returns[s])})
        return out

    def box(self) -> dict:
        return _box_stats(self.start_means)

    def write_raw_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            w = csv.writer(fh)
            w.writerow(["start_id", "run_id", "return"])
            for s in range(self.returns.shape[0]):
                for r in range(self.returns.shape[1]):
                    w.writerow([s, r, repr(float(self.returns[s, r]))])

    def write_summary_csv(self, path, provenance: str | None = None) -> None:
        cols = ["mean", "median", "q1", "q3", "lo_whisker", "hi_whisker"]
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            w = csv.writer(fh)
            w.writerow(["start_id"] + cols)
            for row in self.start_summary():
                w.writerow([row["start_id"]] + [repr(row[c]) for c in cols])

    def write_box_csv(self, path, label: str, provenance: str | None = None) -> None:
        cols = ["mean", "median", "q1", "q3", "lo_whisker", "hi_whisker"]
        box = self.box()
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            w = csv.writer(fh)
            w.writerow(["policy", "n_starts", "n_runs", "horizon"] + cols)
            w.writerow(
                [label, self.returns.shape[0], self.returns.shape[1], self.horizon]
                + [repr(box[c]) for c in cols]
            )


def _box_stats(values: np.ndarray) -> dict:
    q1, med, q3 = (float(q) for q in np.percentile(values, [25, 50, 75]))
    iqr = q3 - q1
    return {
        "mean": float(values.mean()),
        "median": med,
        "q1": q1,
        "q3": q3,
        "lo_whisker": q1 - 1.5 * iqr,
        "hi_whisker": q3 + 1.5 * iqr,
    }


def evaluate(
    inst: EpidemicInstance,
    policy,
    n_starts: int = 50,
    n_runs: int = 50,
    horizon: int = 200,
    seed: int = 0,
    discounted: bool = True,
) -> PolicyEvaluation:
    """Sample start states uniformly over all joint states, then roll out
    `n_runs` trajectories per start.  Runs are batched per start; each run r
    consumes its own stream substream(seed, 1, start, r) as two blocks (first
    horizon x draws policy uniforms, then horizon x n transition uniforms), so
    results do not depend on execution order."""
    if horizon < 1:
        raise FactorError("horizon must be at least 1")
    n = inst.n
    starts = np.stack(
        [substream(seed, 0, s).integers(0, 2, size=n).astype(np.int8) for s in range(n_starts)]
    )
    draws = int(getattr(policy, "draws_per_step", 0))
    gammas = inst.gamma ** np.arange(horizon) if discounted else np.ones(horizon)
    returns = np.empty((n_starts, n_runs))
    ctrl = list(inst.controlled)
    for s in range(n_starts):
        trans_u = np.empty((n_runs, horizon, n))
        pol_u = np.empty((n_runs, horizon, draws)) if draws else None
        for r in range(n_runs):
            rng = substream(seed, 1, s, r)
            if draws:
                pol_u[r] = rng.random((horizon, draws))
            trans_u[r] = rng.random((horizon, n))
        X = np.repeat(starts[s][None, :], n_runs, axis=0).astype(np.int8)
        total = np.zeros(n_runs)
        for t in range(horizon):
            A = policy.actions(X.astype(float), pol_u[:, t] if draws else None)
            reward = -inst.lambda1 * A.sum(axis=1) - inst.lambda2 * X.sum(axis=1)
            total += gammas[t] * reward
            full = np.zeros((n_runs, n))
            full[:, ctrl] = A
            K = X @ inst.adjacency
            p_healthy = 1.0 - (1.0 - inst.beta) ** K
            P = np.where(X == 0, p_healthy, 1.0 - inst.delta) * (1.0 - full)
            X = (trans_u[:, t] < P).astype(np.int8)
        returns[s] = total
    return PolicyEvaluation(returns, starts, horizon, discounted, seed)


def bootstrap_ci(
    values: np.ndarray, n_boot: int = 10000, level: float = 0.95, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap confidence interval for the mean of `values`."""
    rng = substream(seed, 2)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(means, lo)), float(np.quantile(means, 1.0 - lo)))
