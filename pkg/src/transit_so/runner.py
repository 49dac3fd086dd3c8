"""One entry point for the three solvers."""

from __future__ import annotations

from typing import Callable, Optional

from .adafw import APPROX_SO, UE, SolverConfig, solve
from .exactso import EXACT_SO, solve_exact
from .model import TransitInstance
from .solution import Solution

SOLVERS = (UE, APPROX_SO, EXACT_SO)


def run_solver(
    inst: TransitInstance,
    solver: str,
    config: Optional[SolverConfig] = None,
    backend: Optional[str] = None,
    progress: Optional[Callable[[dict], None]] = None,
    time_limit: Optional[float] = None,
) -> Solution:
    if solver == EXACT_SO:
        return solve_exact(inst, backend=backend, time_limit=time_limit)
    if solver in (UE, APPROX_SO):
        return solve(inst, solver, config, progress=progress)
    raise ValueError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
