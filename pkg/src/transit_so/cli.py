"""``transit-so`` command line.

Exit codes: 0 success, 1 invalid input or infeasible instance (JSON
diagnostics on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path
from typing import Optional

from . import io as tio
from .adafw import SetupError, SolverConfig
from .benchmarks import BENCHMARKS, load_benchmark
from .exactso import BackendUnavailable, InfeasibleModelError, SolverLimitError, build_ilp, write_lp, write_mps
from .loader import load
from .model import TransitInstance, validate_instance
from .runner import SOLVERS, run_solver
from .scenarios import (
    COMPARISON_FIELDS,
    LINK_FLOW_FIELDS,
    MATRIX_FIELDS,
    ScenarioError,
    ScenarioSpec,
    apply_scenario,
    compare,
    run_matrix,
)

COMMANDS = ("validate", "assign", "scenario", "compare", "export-lp")


class InputProblem(Exception):
    """Reported as exit code 1 with ``diagnostics`` on stderr."""

    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.payload = {"error": kind, "message": message, **extra}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transit-so", description="Schedule-based transit assignment: UE, approximate SO and exact SO.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--instance", default="hk-lite", help=f"instance JSON file or benchmark name ({', '.join(sorted(BENCHMARKS))})")
    p.add_argument("--demand-csv", help="replace OD demands from origin,destination,count rows")
    p.add_argument("--solver", action="append", choices=SOLVERS, help="repeatable; defaults per command")
    p.add_argument("--demand-scale", type=float, nargs="+", default=[100.0], metavar="PCT")
    p.add_argument("--capacity-scale", type=float, nargs="+", default=[100.0], metavar="PCT")
    p.add_argument("--routes", choices=("base", "extended"), default="base")
    p.add_argument("--backend", choices=("cbc", "highs", "bruteforce"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--export-lp", metavar="P", help="model file to write (.lp or .mps)")
    p.add_argument("--time-limit", type=float, help="seconds for the MILP backend")
    p.add_argument("--max-system-iters", type=int, default=SolverConfig.max_system_iters)
    p.add_argument("--max-od-iters", type=int, default=SolverConfig.max_od_iters)
    p.add_argument("--tol", type=float, default=SolverConfig.golden_section_tol, help="golden-section tolerance on the step")
    return p


def resolve_instance(args) -> TransitInstance:
    name = args.instance
    if name in BENCHMARKS and not Path(name).exists():
        if args.routes == "extended":
            if name == "hk-lite":
                name = "hk-lite-extended"
            else:
                raise InputProblem("usage", f"benchmark {name!r} has no extended route set")
        inst = load_benchmark(name)
    else:
        if not Path(name).is_file():
            raise InputProblem("input", f"instance file not found: {name}")
        try:
            inst = tio.read_instance(name)
        except (tio.InstanceFormatError, ValueError) as exc:
            raise InputProblem("invalid-instance", str(exc), violations=[str(exc)]) from exc
    if args.demand_csv:
        try:
            inst = tio.with_demand_csv(inst, args.demand_csv)
        except (OSError, KeyError, ValueError) as exc:
            raise InputProblem("invalid-demand", str(exc)) from exc
    violations = validate_instance(inst)
    if violations:
        raise InputProblem("invalid-instance", f"{len(violations)} violations", violations=violations)
    return inst


def _config(args) -> SolverConfig:
    return SolverConfig(
        max_system_iters=args.max_system_iters,
        max_od_iters=args.max_od_iters,
        golden_section_tol=args.tol,
        rng_seed=args.seed,
    )


def _scenarios(args) -> list[ScenarioSpec]:
    return [ScenarioSpec(d, c) for d, c in itertools.product(args.demand_scale, args.capacity_scale)]


def _progress_writer(out: Path):
    lines: list[str] = []

    def emit(rec: dict):
        lines.append(json.dumps(rec, sort_keys=True))

    def flush():
        tio.atomic_write_text(out / "progress.jsonl", "\n".join(lines) + ("\n" if lines else ""))

    return emit, flush


def _solution_summary(inst, sol) -> dict:
    return {
        "instance": inst.name,
        "solver": sol.kind,
        "total_cost": round(sol.total_cost, 2),
        "objective": round(sol.objective, 6),
        "components": {k: round(v, 2) for k, v in sol.cost_breakdown.component_totals().items()},
        "iterations": sol.iterations,
        "wall_time": round(sol.wall_time, 3),
        "total_demand": inst.total_demand,
        "meta": sol.meta,
    }


def cmd_validate(args) -> int:
    inst = resolve_instance(args)
    print(json.dumps({
        "instance": inst.name,
        "valid": True,
        "stations": len(inst.stations),
        "lines": len(inst.lines),
        "trains": len(inst.trains),
        "od_pairs": len(inst.od_pairs),
        "routes": len(inst.routes),
        "total_demand": inst.total_demand,
        "options": len(inst.option_keys()),
    }, sort_keys=True))
    return 0


def _one(inst, args, solver, out: Path):
    emit, flush = _progress_writer(out)
    sol = run_solver(inst, solver, _config(args), backend=args.backend, progress=emit, time_limit=args.time_limit)
    flush()
    return sol


def cmd_assign(args) -> int:
    solvers = args.solver or ["ue"]
    if len(solvers) != 1:
        raise InputProblem("usage", "assign takes exactly one --solver")
    inst = _single_scenario(args, resolve_instance(args))
    out = Path(args.out)
    sol = _one(inst, args, solvers[0], out)
    tio.write_csv(out / "assignment.csv", tio.assignment_rows(sol.q), tio.ASSIGNMENT_FIELDS)
    tio.write_csv(out / "od_costs.csv", sol.cost_breakdown.rows(), tio.OD_COST_FIELDS)
    trace = load(inst, sol.assignment, trace=True).events or []
    tio.write_csv(out / "events.csv", trace, tio.EVENT_FIELDS)
    tio.write_json(out / "summary.json", _solution_summary(inst, sol))
    print(f"{sol.kind}: total cost ${sol.total_cost:,.2f} -> {out}")
    return 0


def _single_scenario(args, inst):
    specs = _scenarios(args)
    if len(specs) != 1:
        raise InputProblem("usage", "this command takes a single demand and capacity scale")
    if specs[0].demand_scale == 100 and specs[0].capacity_scale == 100:
        return inst
    return apply_scenario(inst, specs[0])


def cmd_scenario(args) -> int:
    inst = resolve_instance(args)
    solvers = args.solver or list(SOLVERS)
    cfg = _config(args)
    rows = run_matrix(
        inst, _scenarios(args), solvers,
        run=lambda sc, s: run_solver(sc, s, cfg, backend=args.backend, time_limit=args.time_limit),
    )
    out = Path(args.out)
    tio.write_csv(out / "scenarios.csv", rows, MATRIX_FIELDS)
    tio.write_json(out / "summary.json", {"instance": inst.name, "cells": rows})
    for r in rows:
        print(f"{r['scenario']:>14} {r['solver']:>10} {r['status']:>6} {r['total_cost']:>14} {r['pscir']}")
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_compare(args) -> int:
    inst = _single_scenario(args, resolve_instance(args))
    out = Path(args.out)
    cfg = _config(args)
    ue = run_solver(inst, "ue", cfg)
    approx = run_solver(inst, "approx-so", cfg)
    exact = run_solver(inst, "exact-so", backend=args.backend, time_limit=args.time_limit)
    rep = compare(inst, ue, exact, approx)
    tio.write_csv(out / "comparison.csv", rep.per_od, COMPARISON_FIELDS)
    tio.write_csv(out / "shift_histogram.csv", rep.histogram.rows(), ["shift_min", "passengers"])
    tio.write_csv(out / "link_flows.csv", rep.link_flows, LINK_FLOW_FIELDS)
    for name, sol in (("ue", ue), ("approx_so", approx), ("exact_so", exact)):
        tio.write_csv(out / f"assignment_{name}.csv", tio.assignment_rows(sol.q), tio.ASSIGNMENT_FIELDS)
    summary = {"instance": inst.name, **rep.summary()}
    tio.write_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_export_lp(args) -> int:
    inst = _single_scenario(args, resolve_instance(args))
    target = Path(args.export_lp) if args.export_lp else Path(args.out) / "model.lp"
    model = build_ilp(inst)
    text = write_mps(model) if target.suffix.lower() == ".mps" else write_lp(model)
    tio.atomic_write_text(target, text)
    print(f"{len(model.variables)} variables, {len(model.constraints)} constraints -> {target}")
    return 0


HANDLERS = {
    "validate": cmd_validate,
    "assign": cmd_assign,
    "scenario": cmd_scenario,
    "compare": cmd_compare,
    "export-lp": cmd_export_lp,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return HANDLERS[args.command](args)
    except InputProblem as exc:
        code = 2 if exc.payload["error"] == "usage" else 1
        print(json.dumps(exc.payload, sort_keys=True), file=sys.stderr)
        return code
    except InfeasibleModelError as exc:
        print(json.dumps({"error": "infeasible", "message": str(exc), **exc.diagnostics}, sort_keys=True), file=sys.stderr)
        return 1
    except (SetupError, ScenarioError, SolverLimitError, BackendUnavailable) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
