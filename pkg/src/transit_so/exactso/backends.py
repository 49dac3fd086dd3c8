"""Solver adapters: write the model, run the solver, read the values back.

``cbc`` runs the CBC executable on an LP file. ``highs`` reads the same LP
file through the ``highspy`` bindings. Both are optional; ``available()``
reports which ones can run here.
"""

from __future__ import annotations

import importlib.util
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .lpformat import write_lp
from .model import ModelIR

ENV_PATH = "TRANSIT_SO_BACKEND_PATH"

OPTIMAL, INFEASIBLE, LIMIT, ERROR = "optimal", "infeasible", "limit", "error"


class BackendUnavailable(RuntimeError):
    pass


@dataclass
class SolveResult:
    status: str
    objective: Optional[float]  # dollars
    values: dict[str, int] = field(default_factory=dict)  # by variable name
    solver_name: str = ""
    wall_time: float = 0.0
    log: str = ""

    def vector(self, model: ModelIR) -> list[int]:
        return [self.values.get(v.name, 0) for v in model.variables]


def _round_values(raw: dict[str, float]) -> dict[str, int]:
    out = {}
    for name, v in raw.items():
        r = round(v)
        if abs(v - r) > 1e-5:
            raise RuntimeError(f"solver returned fractional value {v} for integer variable {name}")
        if r:
            out[name] = int(r)
    return out


# -- CBC ----------------------------------------------------------------------


def find_cbc() -> Optional[str]:
    """CBC executable: ``$TRANSIT_SO_BACKEND_PATH``, then ``PATH``, then the copy shipped with PuLP."""
    env = os.environ.get(ENV_PATH)
    if env:
        for d in env.split(os.pathsep):
            p = Path(d)
            cand = p if p.is_file() else p / "cbc"
            if cand.is_file() and os.access(cand, os.X_OK):
                return str(cand)
    found = shutil.which("cbc")
    if found:
        return found
    spec = importlib.util.find_spec("pulp")
    if spec and spec.origin:
        cand = Path(spec.origin).parent / "solverdir" / "cbc" / "linux" / "i64" / "cbc"
        if cand.is_file() and os.access(cand, os.X_OK):
            return str(cand)
    return None


def parse_cbc_solution(text: str) -> tuple[str, Optional[float], dict[str, float]]:
    """Status, objective and nonzero values from a CBC ``solu`` file."""
    lines = text.splitlines()
    if not lines:
        return ERROR, None, {}
    head = lines[0].strip()
    low = head.lower()
    if low.startswith("optimal"):
        status = OPTIMAL
    elif "infeasible" in low:
        status = INFEASIBLE
    elif low.startswith("stopped"):
        status = LIMIT
    else:
        status = ERROR
    obj = None
    if "objective value" in low:
        try:
            obj = float(head.rsplit(None, 1)[-1])
        except ValueError:
            obj = None
    values = {}
    for line in lines[1:]:
        parts = line.split()
        if len(parts) >= 3 and parts[0].isdigit():
            values[parts[1]] = float(parts[2])
        elif len(parts) >= 4 and parts[0] == "**" and parts[1].isdigit():
            # infeasibility marker column
            values[parts[2]] = float(parts[3])
    return status, obj, values


def solve_cbc(model: ModelIR, time_limit: Optional[float] = None, workdir=None) -> SolveResult:
    exe = find_cbc()
    if exe is None:
        raise BackendUnavailable(f"cbc executable not found (set {ENV_PATH})")
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp = Path(tmp) / "model.lp"
        sol = Path(tmp) / "model.sol"
        lp.write_text(write_lp(model))
        cmd = [exe, str(lp), "ratioGap", "0", "allowableGap", "0"]
        if time_limit is not None:
            cmd += ["sec", str(time_limit)]
        cmd += ["solve", "solu", str(sol)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if not sol.exists():
            return SolveResult(ERROR, None, {}, "cbc", time.perf_counter() - t0, proc.stdout + proc.stderr)
        status, _obj, raw = parse_cbc_solution(sol.read_text())
    values = _round_values(raw) if status in (OPTIMAL, LIMIT) else {}
    obj = _objective(model, values) if status == OPTIMAL or values else None
    return SolveResult(status, obj, values, "cbc", time.perf_counter() - t0, proc.stdout[-4000:])


# -- HiGHS --------------------------------------------------------------------


def highs_available() -> bool:
    return importlib.util.find_spec("highspy") is not None


def solve_highs(model: ModelIR, time_limit: Optional[float] = None, workdir=None) -> SolveResult:
    if not highs_available():
        raise BackendUnavailable("highspy is not installed (pip install highspy)")
    import highspy

    t0 = time.perf_counter()
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp = Path(tmp) / "model.lp"
        lp.write_text(write_lp(model))
        h.readModel(str(lp))
    h.run()
    ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    if ms == S.kOptimal:
        status = OPTIMAL
    elif ms in (S.kInfeasible, S.kUnboundedOrInfeasible):
        status = INFEASIBLE
    elif ms in (S.kTimeLimit, S.kIterationLimit, S.kSolutionLimit, S.kInterrupt):
        status = LIMIT
    else:
        status = ERROR
    values: dict[str, int] = {}
    obj = None
    if status in (OPTIMAL, LIMIT) and h.getInfo().primal_solution_status == 2:
        names = h.getLp().col_names_
        raw = dict(zip(names, h.getSolution().col_value))
        values = _round_values(raw)
        obj = _objective(model, values)
    return SolveResult(status, obj, values, "highs", time.perf_counter() - t0, h.modelStatusToString(ms))


def _objective(model: ModelIR, values: dict[str, int]) -> float:
    return model.objective_value([values.get(v.name, 0) for v in model.variables])


BACKENDS = {"cbc": solve_cbc, "highs": solve_highs}


def available() -> list[str]:
    out = []
    if find_cbc():
        out.append("cbc")
    if highs_available():
        out.append("highs")
    return out


def default_backend() -> str:
    avail = available()
    if not avail:
        raise BackendUnavailable("no MILP backend found: install highspy or put cbc on PATH")
    return "cbc" if "cbc" in avail else avail[0]
