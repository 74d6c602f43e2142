"""Command-line entry point: ``multiway <command> [options]``.

Every file written carries ``"schema": 1``.  Reports embed the full config
and seed, and each numeric result names the function that produced it.
Exit codes: 0 success, 1 bad input, 2 infeasible, 3 budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import zoo
from .brute import brute_force_partition, brute_force_symmetric, symmetric_gamma_optimum
from .errors import CapacityError, InfeasibleError, MultiwayError
from .instance import MultiwayInstance, SymmetrySpec, validate_assignment
from .mincsp import (MinCspInstance, brute_force_csp, build_basic_lp, check_certificate,
                     compare_relaxations, multiway_to_mincsp, solve_lp)
from .relaxation import SolverConfig, solve_submp_rel
from .rounding import (best_rounding, check_analysis_lemmas, expected_cost_exact, lp_cost_exact,
                       round_at)

SCHEMA = 1
KINDS = ("grid", "symmetric-gamma", "hk", "hmp-cycle") + zoo.RANDOM_KINDS
EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3


class InputError(MultiwayError):
    pass


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {str(a): _jsonable(b) for a, b in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(b) for b in v]
    return v


# --- instances --------------------------------------------------------------

def generate(kind: str, k: int | None = None, gamma: int | None = None, n: int | None = None,
             m: int | None = None, seed: int = 0) -> dict:
    """Build an instance document ``{"schema", "kind", "k", "params", "terminals", ...}``.

    Sub-MP instances carry ``"problem": "submp"`` and the serialized oracle;
    Min-CSP instances carry ``"problem": "mincsp"`` and explicit cost tables.
    """
    params: dict = {}
    sym = None
    if kind == "grid":
        k = k or 3
        inst, sym = zoo.gen_grid(k)
    elif kind == "symmetric-gamma":
        k = k or 4
        inst, sym = zoo.gen_symmetric_gamma(k, gamma)
        params["gamma"] = inst.oracle.gamma
    elif kind == "hk":
        k = k or 3
        csp = zoo.gen_hk(k)
        return {"schema": SCHEMA, "kind": kind, "k": k, "params": params,
                "terminals": sorted(csp.pins), "problem": "mincsp", "instance": csp.to_dict()}
    elif kind == "hmp-cycle":
        inst, _ = zoo.gen_hmp_cycle()
        k = inst.k
        params["eps"] = zoo.HMP_EPSILON
    elif kind in zoo.RANDOM_KINDS:
        k = k or 3
        n = n or 8
        m = m or 10
        inst = zoo.gen_random_family(kind, n, k, m, seed)
        params.update(n=n, m=m, seed=seed)
    else:
        raise InputError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    doc = {"schema": SCHEMA, "kind": kind, "k": inst.k, "params": params,
           "terminals": list(inst.terminals), "problem": "submp", "instance": inst.to_dict()}
    if sym is not None:
        doc["symmetry"] = sym.to_dict()
    return doc


def load_document(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise InputError(f"{path}: expected a JSON object with \"schema\": {SCHEMA}")
    return doc


def decode(doc: dict):
    """``(problem, instance, symmetry)`` from an instance document."""
    try:
        if doc.get("problem") == "mincsp":
            return "mincsp", MinCspInstance.from_dict(doc["instance"]), None
        inst = MultiwayInstance.from_dict(doc["instance"])
        sym = SymmetrySpec.from_dict(doc["symmetry"]) if "symmetry" in doc else None
        return "submp", inst, sym
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance document: {exc!r}") from exc


def _instance_doc(args) -> dict:
    if (args.instance is None) == (args.kind is None):
        raise InputError("give exactly one instance source: --instance FILE or --kind NAME")
    if args.instance is not None:
        return load_document(args.instance)
    return generate(args.kind, args.k, args.gamma, args.n, args.m, args.seed)


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, tol=args.tol, seed=args.seed)


# --- reports ----------------------------------------------------------------

class Report:
    def __init__(self, operation: str, args):
        self.operation = operation
        self.config = {k: v for k, v in vars(args).items() if k != "func"}
        self.results: dict = {}
        self.flags: list = []
        self.extra: dict = {}

    def put(self, name: str, value, source: str):
        self.results[name] = {"value": _jsonable(value), "source": source}

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "operation": self.operation, "seed": self.config.get("seed"),
                "config": _jsonable(self.config), "results": self.results, "flags": self.flags,
                **_jsonable(self.extra)}

    def to_text(self) -> str:
        lines = [f"{self.operation} (seed {self.config.get('seed')})"]
        for name, r in self.results.items():
            v = r["value"]
            if isinstance(v, float):
                v = f"{v:.6g}"
            elif isinstance(v, list) and len(json.dumps(v)) > 60:
                v = "[...]"
            lines.append(f"  {name} = {v}  [{r['source']}]")
        lines += [f"  {flag}" for flag in self.flags]
        return "\n".join(lines)


def _emit(args, payload: dict | Report):
    if isinstance(payload, Report):
        text = payload.to_text() if args.format == "text" else json.dumps(payload.to_dict(), indent=2)
    else:
        text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# --- commands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind is None:
        raise InputError("gen needs --kind")
    _emit(args, generate(args.kind, args.k, args.gamma, args.n, args.m, args.seed))
    return EXIT_OK


def _require_submp(problem, what):
    if problem != "submp":
        raise InputError(f"{what} needs a submodular partition instance, not a Min-CSP")


def cmd_solve(args) -> int:
    problem, inst, _ = decode(_instance_doc(args))
    _require_submp(problem, "solve")
    x, rep = solve_submp_rel(inst, _solver_cfg(args))
    out = Report("solve", args)
    out.put("relaxation_value", rep.value, "solve_submp_rel")
    out.put("gap_estimate", rep.gap_estimate, "solve_submp_rel")
    out.put("iterations", rep.iterations, "solve_submp_rel")
    out.put("x", x, "solve_submp_rel")
    _emit(args, out)
    return EXIT_OK


def _point(args, inst):
    if args.x is None:
        x, rep = solve_submp_rel(inst, _solver_cfg(args))
        return x, "solve_submp_rel"
    doc = load_document(args.x)
    try:
        x = doc["results"]["x"]["value"] if "results" in doc else doc["x"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.x}: no assignment matrix found") from exc
    return validate_assignment(np.asarray(x, dtype=float), inst.terminals), args.x


def cmd_round(args) -> int:
    problem, inst, _ = decode(_instance_doc(args))
    _require_submp(problem, "round")
    x, origin = _point(args, inst)
    out = Report("round", args)
    out.extra["x_source"] = origin
    lp = lp_cost_exact(x, inst.oracle, inst.k)
    exp = expected_cost_exact(x, inst.oracle, inst.k)
    out.put("lp_cost", lp, "lp_cost_exact")
    out.put("expected_cost", exp, "expected_cost_exact")
    out.put("guarantee", (2 - 2 / inst.k) * lp, "lp_cost_exact")
    if args.theta is not None:
        part = round_at(x, args.theta, args.i_star, inst.terminals)
        out.put("partition", part.labels, "round_at")
        out.put("partition_cost", part.cost(inst.oracle), "round_at")
    else:
        part, value, theta, i_star = best_rounding(x, inst)
        out.put("partition", part.labels, "best_rounding")
        out.put("partition_cost", value, "best_rounding")
        out.put("theta", theta, "best_rounding")
        out.put("i_star", i_star, "best_rounding")
    lemmas = check_analysis_lemmas(x, inst.oracle, inst.k)
    out.put("lemma_min_residual", lemmas.min_residual(), "check_analysis_lemmas")
    out.extra["lemmas"] = lemmas.to_dict()
    out.flags.append("GUARANTEE_OK" if exp <= (2 - 2 / inst.k) * lp + 1e-9 else "GUARANTEE_VIOLATED")
    _emit(args, out)
    return EXIT_OK


def cmd_brute(args) -> int:
    doc = _instance_doc(args)
    problem, inst, sym = decode(doc)
    out = Report("brute", args)
    if problem == "mincsp":
        labels, value = brute_force_csp(inst, threads=args.threads)
        out.put("integral_opt", value, "brute_force_csp")
        out.put("labels", labels, "brute_force_csp")
    else:
        part, value = brute_force_partition(inst, threads=args.threads)
        out.put("integral_opt", value, "brute_force_partition")
        out.put("labels", part.labels, "brute_force_partition")
        if sym is not None:
            spart, svalue = brute_force_symmetric(inst, sym, threads=args.threads)
            out.put("symmetric_opt", svalue, "brute_force_symmetric")
            out.put("symmetric_labels", spart.labels, "brute_force_symmetric")
    _emit(args, out)
    return EXIT_OK


def cmd_gap(args) -> int:
    doc = _instance_doc(args)
    problem, inst, sym = decode(doc)
    out = Report("gap", args)
    if problem == "mincsp":
        sol = solve_lp(build_basic_lp(inst), inst)
        _, opt = brute_force_csp(inst, threads=args.threads)
        out.put("relaxation_opt", sol.objective, "solve_lp")
        out.put("integral_opt", opt, "brute_force_csp")
        report = zoo.GapReport(opt, sol.objective, {"relaxation": "basic_lp"})
    else:
        x, rep = solve_submp_rel(inst, _solver_cfg(args))
        part, rounded, _, _ = best_rounding(x, inst)
        out.put("relaxation_value", rep.value, "solve_submp_rel")
        out.put("expected_rounding_cost", expected_cost_exact(x, inst.oracle, inst.k), "expected_cost_exact")
        out.put("best_rounding_cost", rounded, "best_rounding")
        if doc.get("kind") == "symmetric-gamma":
            # the full 4^(k^2 - k) enumeration is out of reach; use the
            # row/column structure of this oracle
            opt = inst.cost(zoo.row_assignment(int(doc["k"])))
            out.put("opt", opt, "MultiwayInstance.cost(row_assignment)")
            _, sopt = symmetric_gamma_optimum(inst.k, inst.oracle.gamma)
            out.put("sym", sopt, "symmetric_gamma_optimum")
            report = zoo.GapReport(sopt, opt, {"kind": "symmetry gap", "opt": "row assignment upper bound"})
        else:
            _, opt = brute_force_partition(inst, threads=args.threads)
            out.put("opt", opt, "brute_force_partition")
            if sym is not None:
                _, sopt = brute_force_symmetric(inst, sym, threads=args.threads)
                out.put("sym", sopt, "brute_force_symmetric")
                report = zoo.GapReport(sopt, opt, {"kind": "symmetry gap"})
            else:
                report = zoo.GapReport(opt, rep.value, {"kind": "integrality gap", "relaxation": "lovasz"})
    out.put("ratio", report.ratio, "GapReport.ratio")
    out.extra["gap_report"] = report.to_dict()
    _emit(args, out)
    return EXIT_OK


def cmd_lp(args) -> int:
    doc = _instance_doc(args)
    problem, inst, _ = decode(doc)
    csp = inst if problem == "mincsp" else multiway_to_mincsp(inst)
    lp = build_basic_lp(csp)
    if args.emit_lp:
        with open(args.emit_lp, "w") as fh:
            fh.write(lp.to_lp_format())
    out = Report("lp", args)
    out.put("num_vars", lp.num_vars, "build_basic_lp")
    out.put("num_rows", lp.num_rows, "build_basic_lp")
    sol = solve_lp(lp, csp)
    out.put("lp_value", sol.objective, "solve_lp")
    out.put("lp_residual", sol.max_residual, "solve_lp")
    if args.certify:
        if doc.get("kind") == "hk":
            vertex, edges = zoo.hk_half_certificate(int(doc["k"]))
            cert = check_certificate(csp, vertex, edges)
            out.put("cert_objective", cert.objective, "check_certificate(hk_half_certificate)")
            out.put("cert_feasible", cert.feasible, "check_certificate(hk_half_certificate)")
            if not cert.feasible:
                out.flags.append("CERTIFICATE_INFEASIBLE")
        _, opt = brute_force_csp(csp, threads=args.threads)
        out.put("brute", opt, "brute_force_csp")
        out.put("gap", opt / sol.objective if sol.objective > 0 else float("inf"), "brute_force_csp/solve_lp")
    _emit(args, out)
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.instance is None and args.kind is None:
        args.kind = "hmp-cycle"
    problem, inst, _ = decode(_instance_doc(args))
    _require_submp(problem, "compare")
    res = compare_relaxations(inst, cross_check=args.cross_check, solver_cfg=_solver_cfg(args))
    out = Report("compare", args)
    out.put("lovasz_value", res["lovasz_value"], res["lovasz_method"])
    out.put("basic_lp_value", res["basic_lp_value"], res["basic_lp_method"])
    out.put("delta", res["delta"], "compare_relaxations")
    if "subgradient_value" in res:
        out.put("subgradient_value", res["subgradient_value"], "solve_submp_rel")
    out.flags.append("SEPARATED" if res["separated"] else "NOT_SEPARATED")
    _emit(args, out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", help="instance JSON (alternative to --kind)")
    common.add_argument("--kind", choices=KINDS)
    common.add_argument("--k", type=int)
    common.add_argument("--gamma", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--max-iters", type=int, default=2000)
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--out", help="write to this file instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--threads", type=int, default=1)

    p = argparse.ArgumentParser(prog="multiway", description="Submodular multiway partition toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write an instance file").set_defaults(func=cmd_gen)
    sub.add_parser("solve", parents=[common], help="solve the Lovasz relaxation").set_defaults(func=cmd_solve)
    r = sub.add_parser("round", parents=[common], help="round a fractional assignment")
    r.add_argument("--x", help="solution JSON from `solve` (solved fresh if omitted)")
    r.add_argument("--theta", type=float, help="fixed threshold in (1/2, 1]")
    r.add_argument("--i-star", type=int, default=0, help="block receiving the leftover vertices")
    r.set_defaults(func=cmd_round)
    sub.add_parser("brute", parents=[common], help="exact optimum by enumeration").set_defaults(func=cmd_brute)
    sub.add_parser("gap", parents=[common], help="generate, relax, round and enumerate").set_defaults(func=cmd_gap)
    lp = sub.add_parser("lp", parents=[common], help="Basic LP of the (bridged) Min-CSP")
    lp.add_argument("--certify", action="store_true", help="check the known certificate and enumerate")
    lp.add_argument("--emit-lp", help="also write the LP in CPLEX-style text format")
    lp.set_defaults(func=cmd_lp)
    c = sub.add_parser("compare", parents=[common], help="Lovasz relaxation versus Basic LP")
    c.add_argument("--cross-check", action="store_true", help="also run the subgradient solver")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CapacityError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (MultiwayError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"{args.command} finished in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
