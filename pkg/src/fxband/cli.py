"""Batch command-line front end.

Commands: solve, verify, curve, table, simulate, sweep.  Problems are
described by JSON files (see config.py); solutions are flat JSON objects
{A, B, a, b, alpha, theta, residual_norm, checks}; tabular output is CSV.

Exit codes: 0 = success and, for solve/verify, all optimality checks
passed; 2 = converged solution failing at least one check; 1 = anything
else (bad config, no convergence, invalid policy).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import warnings

import numpy as np

from .config import ProblemConfig, load_problem
from .errors import FxbandError
from .model import CostSpec, ModelParams, ReactionLaw, ScalarLaw, build_coeffs, phi
from .simulate import BandPolicy, compare_policies, estimate_cost
from .solver import (
    PolicySolution,
    SolverConfig,
    solution_to_json_dict,
    solve,
    solve_t0,
    value_function,
)

_TABLE_BASE = ModelParams(mu=0.1, sigma=0.3, r=0.06, rho=1.4)
_TABLE_COST = CostSpec(k_fixed=0.5)


def _point_reaction(t, sigma2, mu2, base):
    return ReactionLaw(
        t_law=ScalarLaw.point(t),
        sigma_shift_law=ScalarLaw.point(sigma2 - base.sigma),
        mu_shift_law=ScalarLaw.point(mu2 - base.mu),
    )


def _table_rows(which):
    base = _TABLE_BASE
    if which == "reaction-compare":
        return [
            ("None (T=0), K=0.50", _TABLE_COST, ReactionLaw.none()),
            ("T=1", _TABLE_COST, _point_reaction(1.0, 0.4, 0.1, base)),
            ("None (T=0), K=0.63", CostSpec(0.63), ReactionLaw.none()),
        ]
    if which == "statics":
        return [
            ("No reaction", _TABLE_COST, ReactionLaw.none()),
            ("Volatility increases", _TABLE_COST,
             _point_reaction(1.0, 0.40, 0.10, base)),
            ("Volatility decreases", _TABLE_COST,
             _point_reaction(1.0, 0.10, 0.10, base)),
            ("Drift increases", _TABLE_COST,
             _point_reaction(1.0, 0.30, 0.15, base)),
            ("Drift decreases", _TABLE_COST,
             _point_reaction(1.0, 0.30, 0.05, base)),
        ]
    if which == "horizon":
        up = lambda t: _point_reaction(t, 0.4, 0.1, base)
        return [
            ("None (T=0)", _TABLE_COST, ReactionLaw.none()),
            ("T=1", _TABLE_COST, up(1.0)),
            ("T=2", _TABLE_COST, up(2.0)),
            ("T~U[0,1]", _TABLE_COST, ReactionLaw(
                t_law=ScalarLaw.uniform(0.0, 1.0),
                sigma_shift_law=ScalarLaw.point(0.1),
                mu_shift_law=ScalarLaw.point(0.0))),
        ]
    raise ValueError(f"unknown table {which!r}")


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solution_json(sol):
    return json.dumps(solution_to_json_dict(sol), indent=2) + "\n"


def _exit_code_for(sol: PolicySolution) -> int:
    return 0 if sol.verified is not None and sol.verified.all_passed else 2


def cmd_solve(args) -> int:
    cfg = load_problem(args.config)
    sol = solve(cfg.params, cfg.cost, cfg.law, cfg.solver)
    _emit(_solution_json(sol), args.out)
    return _exit_code_for(sol)


def cmd_verify(args) -> int:
    from .expectation import build_nodes
    from .solver import verify as run_verify

    cfg = load_problem(args.config)
    if args.solution:
        with open(args.solution) as fh:
            doc = json.load(fh)
        coeffs = build_coeffs(cfg.params, float(doc["A"]), float(doc["B"]))
        sol = PolicySolution(coeffs=coeffs, a=float(doc["a"]),
                             b=float(doc["b"]), alpha=float(doc["alpha"]),
                             theta=float(doc["theta"]),
                             residual_norm=float(doc["residual_norm"]),
                             iterations=0)
        nodes = build_nodes(cfg.law, cfg.solver.n_quad, cfg.params)
        report = run_verify(sol, cfg.params, cfg.cost, nodes, cfg.solver)
        _emit(json.dumps(report.as_dict(), indent=2) + "\n", args.out)
        return 0 if report.all_passed else 2
    sol = solve(cfg.params, cfg.cost, cfg.law, cfg.solver)
    _emit(json.dumps(sol.verified.as_dict(), indent=2) + "\n", args.out)
    return _exit_code_for(sol)


def cmd_curve(args) -> int:
    cfg = load_problem(args.config)
    sol = solve(cfg.params, cfg.cost, cfg.law, cfg.solver)
    xs = np.linspace(args.xmin, args.xmax, args.n)
    vs = value_function(sol, xs)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x", "V"])
    for x, v in zip(xs, vs):
        writer.writerow([repr(float(x)), repr(float(v))])
    _emit(buf.getvalue(), args.out)
    return _exit_code_for(sol)


def cmd_table(args) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["label", "a", "b", "alpha"])
    for label, cost, law in _table_rows(args.which):
        try:
            sol = solve(_TABLE_BASE, cost, law, SolverConfig())
            writer.writerow([label, f"{sol.a:.6f}", f"{sol.b:.6f}",
                             f"{sol.alpha:.6f}"])
        except FxbandError as exc:
            writer.writerow([label, "ERROR", "ERROR", str(exc)])
    _emit(buf.getvalue(), args.out)
    return 0


_PERTURB_RE = re.compile(r"^(a|b|alpha)([+-][0-9.eE+-]+)$")


def _perturbed(policy: BandPolicy, spec: str) -> BandPolicy:
    m = _PERTURB_RE.match(spec.strip())
    if not m:
        raise ValueError(f"bad perturbation {spec!r}; expected e.g. 'alpha+0.05'")
    field, delta = m.group(1), float(m.group(2))
    values = {"a": policy.a, "b": policy.b, "alpha": policy.alpha}
    values[field] += delta
    return BandPolicy(a=values["a"], b=values["b"], alpha=values["alpha"])


def cmd_simulate(args) -> int:
    import dataclasses

    cfg = load_problem(args.config)
    with open(args.policy_from) as fh:
        doc = json.load(fh)
    policy = BandPolicy(a=float(doc["a"]), b=float(doc["b"]),
                        alpha=float(doc["alpha"]))
    if args.perturb:
        sim = dataclasses.replace(cfg.sim, crn=True)
        policies = [policy] + [_perturbed(policy, s) for s in args.perturb]
        rows = compare_policies(policies, cfg.params, cfg.law, cfg.cost, sim)
        ref_row = next(r for r in rows if r.policy is policy)
        doc_out = {
            "estimate": _estimate_dict(ref_row.estimate),
            "comparison": [
                {
                    "policy": {"a": r.policy.a, "b": r.policy.b,
                               "alpha": r.policy.alpha},
                    "mean": r.estimate.mean,
                    "stderr": r.estimate.stderr,
                    "diff_vs_reference_mean": r.diff_vs_reference_mean,
                    "diff_vs_reference_stderr": r.diff_vs_reference_stderr,
                }
                for r in rows
            ],
        }
        _emit(json.dumps(doc_out, indent=2) + "\n", args.out)
        return 0
    est = estimate_cost(policy, cfg.params, cfg.law, cfg.cost, cfg.sim)
    _emit(json.dumps(_estimate_dict(est), indent=2) + "\n", args.out)
    return 0


def _estimate_dict(est):
    return {
        "mean": est.mean,
        "stderr": est.stderr,
        "n_paths": est.n_paths,
        "mean_interventions_per_unit_time": est.mean_interventions_per_unit_time,
    }


def _set_by_path(doc: dict, dotted: str, value: float):
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ValueError(f"config has no section {key!r} on path {dotted!r}")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ValueError(f"config has no key {keys[-1]!r} on path {dotted!r}")
    node[keys[-1]] = value


def cmd_sweep(args) -> int:
    from .config import parse_problem

    with open(args.config) as fh:
        raw = json.load(fh)
    values = [float(tok) for tok in args.values.split(",") if tok.strip()]
    if not values:
        raise ValueError("--values must contain at least one number")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([args.param, "a", "b", "alpha"])
    for v in values:
        doc = json.loads(json.dumps(raw))
        try:
            _set_by_path(doc, args.param, v)
            cfg = parse_problem(doc)
            sol = solve(cfg.params, cfg.cost, cfg.law, cfg.solver)
            writer.writerow([repr(v), f"{sol.a:.6f}", f"{sol.b:.6f}",
                             f"{sol.alpha:.6f}"])
        except (FxbandError, ValueError) as exc:
            writer.writerow([repr(v), "ERROR", "ERROR", str(exc)])
    _emit(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fxband",
        description="Optimal currency-band intervention policies with "
                    "market-reaction regimes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file, print the solution")
    p.add_argument("config")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-run optimality checks")
    p.add_argument("config")
    p.add_argument("--solution", help="check this solution file instead of re-solving")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("curve", help="value function as CSV")
    p.add_argument("config")
    p.add_argument("--xmin", type=float, required=True)
    p.add_argument("--xmax", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("table", help="reproduce a built-in policy table")
    p.add_argument("which", choices=["reaction-compare", "statics", "horizon"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("simulate", help="Monte Carlo evaluation of a policy")
    p.add_argument("config")
    p.add_argument("--policy-from", required=True, dest="policy_from",
                   help="solution JSON providing (a, b, alpha)")
    p.add_argument("--perturb", action="append", default=[],
                   help="e.g. 'alpha+0.05'; repeatable; adds a CRN comparison")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="1-parameter sweep of the solved policy")
    p.add_argument("config")
    p.add_argument("--param", required=True,
                   help="dotted config path, e.g. cost.k_fixed")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.filterwarnings("ignore", category=UserWarning)
    try:
        return args.func(args)
    except FxbandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
