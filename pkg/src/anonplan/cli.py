"""Command-line front end: instance generation, ALP solving, benchmarking,
policy simulation, factor-file elimination, and factor inspection.

Exit codes: 0 success, 2 usage or input error, 3 infeasible result or entry
budget abort, 4 solver failure.  Every artifact embeds the tool version, the
subcommand configuration, and the seed; rerunning a command reproduces its
outputs byte-for-byte except for wall-time fields in metrics files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .alp import (
    GuardExceeded,
    SolveError,
    constraint_terms,
    exhaustive_lp,
    export_lp,
    generate_constraints,
    objective_coefficients,
    solve_lp,
)
from .elimination import FactorSet, eliminate_argmax, greedy_order
from .epidemics import (
    EpidemicInstance,
    GraphGenerationError,
    build_sis_model,
    load_instance,
    random_graph,
    save_instance,
)
from .factors import FactorError, MixedModeFactor, dump_factor
from .fmmdp import (
    backproject,
    indicator_basis,
    model_from_json,
    _factor_from_json,
    _factor_to_json,
)
from .simulate import CopystatePolicy, GreedyPolicy, RandomPolicy, evaluate

FACTORS_FORMAT = "anonplan-factors/1"
WEIGHTS_FORMAT = "anonplan-weights/1"

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4


@dataclass
class RunConfig:
    """Subcommand parameters echoed into every output artifact."""

    command: str
    params: dict

    def provenance(self) -> str:
        body = json.dumps(self.params, sort_keys=True)
        return f"anonplan {__version__}; {self.command} {body}"


def _config(args: argparse.Namespace, keys: list[str]) -> RunConfig:
    params = {k: getattr(args, k) for k in keys}
    return RunConfig(args.command, params)


# -- gen ------------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _config(args, ["n", "k_max", "n_controlled", "seed", "beta", "delta",
                         "lambda1", "lambda2", "gamma", "out"])
    inst = random_graph(
        args.n, args.k_max, args.seed, args.n_controlled,
        beta=args.beta, delta=args.delta, lambda1=args.lambda1,
        lambda2=args.lambda2, gamma=args.gamma,
    )
    save_instance(inst, args.out, provenance=cfg.provenance())
    print(f"wrote {args.out}: n={inst.n} edges={len(inst.edges)} "
          f"mean-degree={inst.mean_degree:.3f} gamma={inst.gamma} (discount echoed in artifacts)")
    return EXIT_OK


# -- solve ------------------------------------------------------------------------


def _pipeline(model, basis, method: str, entry_budget: int):
    """Returns (lp, t_terms, t_generate).  Raises GuardExceeded on budget abort."""
    t0 = time.perf_counter()
    projections = [backproject(h, model) for h in basis]
    obj = objective_coefficients(basis)
    if method == "exhaustive":
        t1 = time.perf_counter()
        lp = exhaustive_lp(model, basis, projections)
        return lp, t1 - t0, time.perf_counter() - t1
    terms = constraint_terms(model, basis, projections, flat=(method == "alp"))
    t1 = time.perf_counter()
    order = greedy_order(FactorSet(terms), model.state_ids() + model.action_ids())
    lp = generate_constraints(terms, order, obj, entry_budget=entry_budget)
    return lp, t1 - t0, time.perf_counter() - t1


def _write_weights(path, cfg: RunConfig, method: str, result, basis) -> None:
    doc = {
        "format": WEIGHTS_FORMAT,
        "tool": f"anonplan {__version__}",
        "config": cfg.params,
        "method": method,
        "basis": "indicator",
        "objective": result.objective,
        "weights": [float(w) for w in result.weights],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != WEIGHTS_FORMAT:
        raise FactorError(f"not an {WEIGHTS_FORMAT} file")
    return np.asarray(doc["weights"], dtype=float)


def cmd_solve(args) -> int:
    cfg = _config(args, ["instance", "method", "seed", "entry_budget", "out"])
    inst = load_instance(args.instance)
    model = build_sis_model(inst)
    basis = indicator_basis(model)
    lp, t_terms, t_ve = _pipeline(model, basis, args.method, args.entry_budget)
    t0 = time.perf_counter()
    result = solve_lp(lp, backend=args.backend)
    t_lp = time.perf_counter() - t0
    if result.status != "optimal":
        print(f"LP status: {result.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_weights(out / "weights.json", cfg, args.method, result, basis)
    if args.export_lp:
        export_lp(lp, out / "problem.lp", provenance=cfg.provenance())
    with open(out / "metrics.csv", "w", newline="") as fh:
        fh.write(f"# {cfg.provenance()}\n")
        w = csv.writer(fh)
        w.writerow(["instance", "method", "n", "g", "constraints", "aux_variables",
                    "objective", "t_terms", "t_ve", "t_lp"])
        w.writerow([Path(args.instance).name, args.method, inst.n, len(inst.controlled),
                    lp.meta.get("constraints"), lp.meta.get("aux_variables"),
                    repr(result.objective), f"{t_terms:.6f}", f"{t_ve:.6f}", f"{t_lp:.6f}"])
    print(f"method={args.method} constraints={lp.meta.get('constraints')} "
          f"objective={result.objective:.6f} t_ve={t_ve:.3f}s t_lp={t_lp:.3f}s")
    return EXIT_OK


# -- bench ------------------------------------------------------------------------


def cmd_bench(args) -> int:
    cfg = _config(args, ["instances", "entry_budget", "skip_solve", "out"])
    rows = []
    for path in args.instances:
        inst = load_instance(path)
        model = build_sis_model(inst)
        basis = indicator_basis(model)
        row = {"graph_id": Path(path).name, "n": inst.n, "g": len(inst.controlled)}
        for method, ckey, tkey, lkey in (
            ("alp", "C_flat", "t_VE", "t_ALP"),
            ("rr-alp", "C_RR", "t_RRVE", "t_RRALP"),
        ):
            try:
                lp, _, t_ve = _pipeline(model, basis, method, args.entry_budget)
                row[ckey] = lp.meta["constraints"]
                row[tkey] = t_ve
                if args.skip_solve:
                    row[lkey] = "n/a"
                else:
                    res = solve_lp(lp, backend=args.backend)
                    row[lkey] = res.solve_seconds if res.ok else "n/a"
            except GuardExceeded:
                row[ckey] = row[tkey] = row[lkey] = "n/a"
        for a, b, rk in (("C_RR", "C_flat", "ratio_C"), ("t_RRVE", "t_VE", "ratio_VE"),
                         ("t_RRALP", "t_ALP", "ratio_ALP")):
            va, vb = row.get(a), row.get(b)
            numeric = isinstance(va, (int, float)) and isinstance(vb, (int, float)) and vb
            row[rk] = (va / vb) if numeric else "n/a"
        rows.append(row)
    cols = ["graph_id", "n", "g", "C_flat", "C_RR", "t_VE", "t_RRVE", "t_ALP", "t_RRALP",
            "ratio_C", "ratio_VE", "ratio_ALP"]
    with open(args.out, "w", newline="") as fh:
        fh.write(f"# {cfg.provenance()}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row.get(c, "n/a") for c in cols])
    print(f"wrote {args.out} ({len(rows)} instances)")
    return EXIT_OK


# -- sim ------------------------------------------------------------------------


def cmd_sim(args) -> int:
    cfg = _config(args, ["instance", "policy", "weights", "n_starts", "n_runs",
                         "horizon", "seed", "undiscounted", "out"])
    inst = load_instance(args.instance)
    if args.policy == "random":
        policy = RandomPolicy(inst)
    elif args.policy == "copystate":
        policy = CopystatePolicy(inst)
    elif args.policy == "greedy":
        if not args.weights:
            raise FactorError("policy 'greedy' requires --weights")
        model = build_sis_model(inst)
        basis = indicator_basis(model)
        policy = GreedyPolicy(inst, basis, load_weights(args.weights), model)
    else:  # pragma: no cover - argparse choices
        raise FactorError(f"unknown policy {args.policy}")
    ev = evaluate(inst, policy, args.n_starts, args.n_runs, args.horizon, args.seed,
                  discounted=not args.undiscounted)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provenance = cfg.provenance()
    ev.write_raw_csv(out / f"returns_{args.policy}.csv", provenance)
    ev.write_summary_csv(out / f"summary_{args.policy}.csv", provenance)
    ev.write_box_csv(out / f"box_{args.policy}.csv", args.policy, provenance)
    if args.plot:
        _plot_box(out / f"box_{args.policy}.svg", ev, args.policy)
    box = ev.box()
    print(f"policy={args.policy} grand-mean={ev.grand_mean:.3f} "
          f"median={box['median']:.3f} IQR=[{box['q1']:.3f}, {box['q3']:.3f}]")
    return EXIT_OK


def _plot_box(path, ev, label: str) -> None:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(3, 4))
    ax.boxplot([ev.start_means], labels=[label], whis=1.5)
    ax.set_ylabel("mean return per start state")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# -- ve / inspect -----------------------------------------------------------------


def load_factor_file(path) -> tuple[list[MixedModeFactor], dict[int, str]]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FACTORS_FORMAT:
        raise FactorError(f"not an {FACTORS_FORMAT} file")
    names = {v["id"]: v.get("name", f"v{v['id']}") for v in doc.get("variables", [])}
    return [_factor_from_json(d) for d in doc["factors"]], names


def save_factor_file(path, factors, names=None) -> None:
    doc = {
        "format": FACTORS_FORMAT,
        "variables": [{"id": v, "name": n} for v, n in sorted((names or {}).items())],
        "factors": [_factor_to_json(f) for f in factors],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_ve(args) -> int:
    factors, names = load_factor_file(args.factors)
    fs = FactorSet(factors)
    variables = sorted(fs.variables())
    order = greedy_order(fs, variables)
    value, assignment = eliminate_argmax(fs, order)
    print(f"max value: {value!r}")
    rendered = " ".join(f"{names.get(v, f'v{v}')}={assignment[v]}" for v in sorted(assignment))
    print(f"argmax: {rendered}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = Path(args.file)
    with open(path) as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "{":
            doc = json.load(fh)
        else:
            doc = None
    if doc is None:
        inst = load_instance(path)
        print(f"{path.name}: SIS instance n={inst.n} edges={len(inst.edges)} "
              f"controlled={list(inst.controlled)} beta={inst.beta} delta={inst.delta} "
              f"lambda1={inst.lambda1} lambda2={inst.lambda2} gamma={inst.gamma} seed={inst.seed}")
        return EXIT_OK
    if doc.get("format") == FACTORS_FORMAT:
        factors, names = load_factor_file(path)
        for f in factors:
            print(dump_factor(f, names), end="")
        return EXIT_OK
    if doc.get("format") == "anonplan-model/1":
        model = model_from_json(doc)
        names = model.variables.names
        print(f"model: {len(model.variables)} variables, discount={model.discount}")
        for ns, cpd in sorted(model.cpds.items()):
            print(dump_factor(cpd, names), end="")
        for r in model.rewards:
            print(dump_factor(r, names), end="")
        return EXIT_OK
    raise FactorError(f"unrecognized file format in {path}")


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anonplan", description=__doc__)
    p.add_argument("--version", action="version", version=f"anonplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random SIS instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k-max", dest="k_max", type=int, default=10)
    g.add_argument("--n-controlled", dest="n_controlled", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--beta", type=float, default=0.6)
    g.add_argument("--delta", type=float, default=0.3)
    g.add_argument("--lambda1", type=float, default=1.0)
    g.add_argument("--lambda2", type=float, default=50.0)
    g.add_argument("--gamma", type=float, default=0.95)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance with the chosen pipeline")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=["alp", "rr-alp", "exhaustive"], default="rr-alp")
    s.add_argument("--backend", choices=["auto", "highs", "simplex"], default="auto")
    s.add_argument("--entry-budget", dest="entry_budget", type=int, default=1 << 26)
    s.add_argument("--export-lp", dest="export_lp", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run flat and RR pipelines over instances")
    b.add_argument("--instances", nargs="+", required=True)
    b.add_argument("--entry-budget", dest="entry_budget", type=int, default=1 << 26)
    b.add_argument("--skip-solve", dest="skip_solve", action="store_true")
    b.add_argument("--backend", choices=["auto", "highs", "simplex"], default="auto")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("sim", help="simulate a policy and write return statistics")
    m.add_argument("--instance", required=True)
    m.add_argument("--policy", choices=["random", "copystate", "greedy"], required=True)
    m.add_argument("--weights")
    m.add_argument("--n-starts", dest="n_starts", type=int, default=50)
    m.add_argument("--n-runs", dest="n_runs", type=int, default=50)
    m.add_argument("--horizon", type=int, default=200)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--undiscounted", action="store_true")
    m.add_argument("--plot", action="store_true")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_sim)

    v = sub.add_parser("ve", help="max/argmax elimination over a factor file")
    v.add_argument("--factors", required=True)
    v.set_defaults(func=cmd_ve)

    i = sub.add_parser("inspect", help="dump factors from a factor/model/instance file")
    i.add_argument("--file", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GuardExceeded as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolveError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (FactorError, GraphGenerationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
