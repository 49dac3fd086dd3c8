"""Demand scan on hk-lite (100%, 135%, 150% and 165% by default).

    python scripts/demand_scan.py --solver exact-so --out results/demand.csv
"""

import argparse

from transit_so import io as tio
from transit_so.adafw import SolverConfig
from transit_so.benchmarks import load_benchmark
from transit_so.runner import SOLVERS, run_solver
from transit_so.scenarios import MATRIX_FIELDS, ScenarioSpec, run_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", default="hk-lite")
    ap.add_argument("--levels", type=float, nargs="+", default=[100, 135, 150, 165])
    ap.add_argument("--solver", action="append", choices=SOLVERS)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/demand_scan.csv")
    args = ap.parse_args()

    cfg = SolverConfig(rng_seed=args.seed)
    rows = run_matrix(
        load_benchmark(args.instance),
        [ScenarioSpec(demand_scale=d) for d in args.levels],
        args.solver or list(SOLVERS),
        run=lambda inst, s: run_solver(inst, s, cfg),
    )
    tio.write_csv(args.out, rows, MATRIX_FIELDS)
    for r in rows:
        print(f"{r['demand_scale']:>5}% {r['solver']:>10} {r['total_cost']:>14} pscir={r['pscir'] or '-'} {r['error']}")


if __name__ == "__main__":
    main()
