from .backends import BackendUnavailable, SolveResult, available, find_cbc, parse_cbc_solution
from .lpformat import LPParseError, read_lp, write_lp, write_mps
from .model import OBJECTIVE_SCALE, Constraint, ModelIR, Variable, build_ilp
from .solve import (
    EXACT_SO,
    InfeasibleModelError,
    SearchSpaceTooLarge,
    SolverLimitError,
    brute_force_so,
    diagnose_infeasibility,
    free_flow_state,
    solve_exact,
)

__all__ = [
    "BackendUnavailable", "SolveResult", "available", "find_cbc", "parse_cbc_solution",
    "LPParseError", "read_lp", "write_lp", "write_mps",
    "OBJECTIVE_SCALE", "Constraint", "ModelIR", "Variable", "build_ilp",
    "EXACT_SO", "InfeasibleModelError", "SearchSpaceTooLarge", "SolverLimitError",
    "brute_force_so", "diagnose_infeasibility", "free_flow_state", "solve_exact",
]
