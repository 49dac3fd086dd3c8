"""Exact system optimum: model, backend call, reconstruction; plus the enumeration oracle."""

from __future__ import annotations

import itertools
import math
import time
from collections import defaultdict
from typing import Optional

from ..costs import cost_breakdown
from ..loader import Assignment, FlowState
from ..model import OptionKey, TransitInstance
from ..solution import Solution
from . import backends as _b
from .model import ModelIR, build_ilp

EXACT_SO = "exact-so"
BRUTE_FORCE_LIMIT = 10**7


class InfeasibleModelError(RuntimeError):
    """No assignment serves all demand without denied boarding."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverLimitError(RuntimeError):
    def __init__(self, message: str, result: _b.SolveResult):
        super().__init__(message)
        self.result = result


class SearchSpaceTooLarge(ValueError):
    def __init__(self, log10_size: float):
        super().__init__(f"brute force would visit up to 10^{log10_size:.1f} configurations (limit 10^7)")
        self.log10_size = log10_size


def _option_legs(inst: TransitInstance, key: OptionKey) -> list[tuple]:
    k, t0, rid = key
    trav = inst.traverse(rid, t0)
    out = []
    for seg, t in zip(inst.route(rid).segments, trav.trains):
        line = inst.line(seg.line)
        out += [(t, m) for m in range(line.position(seg.board), line.position(seg.alight))]
    return out


def free_flow_state(inst: TransitInstance, assignment: Assignment) -> FlowState:
    """Flows when everyone rides their option's free-flow chain (no capacity check)."""
    f: dict = defaultdict(float)
    g: dict = defaultdict(float)
    for key, v in assignment.q.items():
        if not v:
            continue
        k, t0, rid = key
        trav = inst.traverse(rid, t0)
        for seg, t in zip(inst.route(rid).segments, trav.trains):
            line = inst.line(seg.line)
            g[(k, rid, t, seg.board)] += v
            for m in range(line.position(seg.board), line.position(seg.alight)):
                f[(k, rid, t, m)] += v
    return FlowState(dict(f), dict(g), {})


def diagnose_infeasibility(inst: TransitInstance) -> dict:
    """Which ODs a capacity-respecting cheapest-first fill cannot serve, and the full legs in their way."""
    from ..adafw import _ff_table

    ff = _ff_table(inst)
    residual = {(t.key, m): t.capacity for t in inst.trains for m in range(1, inst.line(t.line).n_stations)}
    remaining = {k.id: k.demand for k in inst.od_pairs}
    for key in sorted(inst.option_keys(), key=lambda x: ff[x]):
        legs = _option_legs(inst, key)
        take = min(remaining[key[0]], min(residual[l] for l in legs))
        remaining[key[0]] -= take
        for l in legs:
            residual[l] -= take
    short = {k: v for k, v in remaining.items() if v > 0}
    binding = set()
    for k in short:
        for t, r in inst.options(k):
            for t_, m in _option_legs(inst, (k, t, r)):
                if residual[(t_, m)] <= 0:
                    binding.add(f"cap_{t_[0]}.{t_[1]}_{m}")
    no_option = [k.id for k in inst.od_pairs if k.demand and not inst.options(k.id)]
    return {"unserved": short, "binding_capacity": sorted(binding), "ods_without_options": no_option}


def extract(inst: TransitInstance, model: ModelIR, values: dict[str, int]) -> tuple[Assignment, FlowState]:
    q, f, g = {}, {}, defaultdict(int)
    for key, i in model.var_index.items():
        v = values.get(model.variables[i].name, 0)
        if not v:
            continue
        if key[0] == "q":
            _, k, t, r = key
            q[(k, t, r)] = v
        else:
            _, k, r, t, m = key
            f[(k, r, t, m)] = v
    for (k, r, t, m), v in f.items():
        line = inst.line(t[0])
        s = line.stations[m - 1]  # station at the start of leg m
        for seg in inst.route(r).segments:
            if seg.line == t[0] and seg.board == s:
                g[(k, r, t, s)] += v
    return Assignment(q, True), FlowState(f, dict(g), {})


def solve_exact(
    inst: TransitInstance,
    backend: Optional[str] = None,
    time_limit: Optional[float] = None,
    model: Optional[ModelIR] = None,
) -> Solution:
    """Optimal assignment with no denied boarding.

    ``backend`` is ``cbc``, ``highs`` or ``bruteforce`` (tiny instances only);
    by default the first installed MILP backend.
    """
    t0 = time.perf_counter()
    if backend == "bruteforce":
        return brute_force_so(inst)
    backend = backend or _b.default_backend()
    if backend not in _b.BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(_b.BACKENDS) + ['bruteforce']}")
    diag = diagnose_infeasibility(inst)
    if diag["ods_without_options"]:
        raise InfeasibleModelError("some ODs with demand have no servable option", diag)
    model = model or build_ilp(inst)
    res = _b.BACKENDS[backend](model, time_limit=time_limit)
    if res.status == _b.INFEASIBLE:
        raise InfeasibleModelError("no assignment serves all demand without denied boarding", diag)
    if res.status == _b.ERROR:
        raise RuntimeError(f"{backend} failed: {res.log[-500:]}")
    if res.status == _b.LIMIT and not res.values:
        raise SolverLimitError(f"{backend} hit its limit without an incumbent", res)
    x = res.vector(model)
    bad = [c.name for c in model.constraints if not c.satisfied(x)]
    if bad:
        raise RuntimeError(f"{backend} solution violates {len(bad)} constraints, e.g. {bad[:3]}")
    assignment, fs = extract(inst, model, res.values)
    cb = cost_breakdown(fs, inst)
    return Solution(
        kind=EXACT_SO,
        assignment=assignment,
        flow_state=fs,
        cost_breakdown=cb,
        objective=res.objective,
        iterations=0,
        wall_time=time.perf_counter() - t0,
        meta={
            "backend": res.solver_name,
            "status": res.status,
            "solver_time": res.wall_time,
            "n_vars": len(model.variables),
            "n_constraints": len(model.constraints),
        },
    )


def search_space_log10(inst: TransitInstance) -> float:
    """log10 of the product over ODs of (options + 1) ** demand."""
    return sum(k.demand * math.log10(len(inst.options(k.id)) + 1) for k in inst.od_pairs)


def brute_force_so(inst: TransitInstance, limit: int = BRUTE_FORCE_LIMIT) -> Solution:
    """Enumerate every integer assignment that fits capacity in free flow.

    Costs are compared in $/h x minutes, exact for integer rates; ties go to
    the lexicographically smallest Q over ``option_keys()`` order.
    """
    t0 = time.perf_counter()
    size = search_space_log10(inst)
    if size > math.log10(limit) + 1e-12:
        raise SearchSpaceTooLarge(size)
    from ..adafw import _ff_table

    ff = _ff_table(inst)
    per_od = []
    for k in inst.od_pairs:
        keys = [(k.id, t, r) for t, r in inst.options(k.id)]
        if k.demand and not keys:
            raise InfeasibleModelError(f"OD {k.id} has demand but no servable option", {"ods_without_options": [k.id]})
        comps = []
        for combo in itertools.combinations_with_replacement(range(len(keys)), k.demand):
            counts = [0] * len(keys)
            for i in combo:
                counts[i] += 1
            comps.append(tuple(counts))
        comps.sort()
        legs = [_option_legs(inst, key) for key in keys]
        per_od.append((keys, comps, legs, [ff[key] * 60.0 for key in keys]))
    cap = {t.key: t.capacity for t in inst.trains}

    best_cost, best_vec = math.inf, None
    for choice in itertools.product(*(c for _, c, _, _ in per_od)):
        load: dict = defaultdict(int)
        cost = 0.0
        ok = True
        for (keys, _, legs, costs), counts in zip(per_od, choice):
            for n, lg, c in zip(counts, legs, costs):
                if n:
                    cost += n * c
                    for leg in lg:
                        load[leg] += n
                        if load[leg] > cap[leg[0]]:
                            ok = False
                            break
                if not ok:
                    break
            if not ok:
                break
        if not ok:
            continue
        cost = round(cost, 6)
        vec = tuple(x for counts in choice for x in counts)
        if cost < best_cost or (cost == best_cost and vec < best_vec):
            best_cost, best_vec = cost, vec
    if best_vec is None:
        raise InfeasibleModelError("no assignment serves all demand without denied boarding", diagnose_infeasibility(inst))
    q = {}
    i = 0
    for keys, *_ in per_od:
        for key in keys:
            if best_vec[i]:
                q[key] = best_vec[i]
            i += 1
    a = Assignment(q, True)
    fs = free_flow_state(inst, a)
    return Solution(
        kind=EXACT_SO,
        assignment=a,
        flow_state=fs,
        cost_breakdown=cost_breakdown(fs, inst),
        objective=best_cost / 60.0,
        wall_time=time.perf_counter() - t0,
        meta={"backend": "bruteforce", "status": _b.OPTIMAL, "search_space_log10": round(size, 3)},
    )
