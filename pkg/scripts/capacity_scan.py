"""Train capacity scan on hk-lite (60% to 140% of 2600 by default).

    python scripts/capacity_scan.py --levels 60 80 100 120 140 --out results/capacity.csv
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
    ap.add_argument("--levels", type=float, nargs="+", default=list(range(60, 150, 10)))
    ap.add_argument("--solver", action="append", choices=SOLVERS)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/capacity_scan.csv")
    args = ap.parse_args()

    cfg = SolverConfig(rng_seed=args.seed)
    rows = run_matrix(
        load_benchmark(args.instance),
        [ScenarioSpec(capacity_scale=c) for c in args.levels],
        args.solver or list(SOLVERS),
        run=lambda inst, s: run_solver(inst, s, cfg),
    )
    tio.write_csv(args.out, rows, MATRIX_FIELDS)
    for r in rows:
        print(f"{r['capacity_scale']:>5}% {r['solver']:>10} {r['total_cost']:>14} pscir={r['pscir'] or '-'} {r['error']}")


if __name__ == "__main__":
    main()
