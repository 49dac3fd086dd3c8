"""Adaptive Frank-Wolfe assignment for user equilibrium and approximate SO.

Two loops share one evaluation path (load the network, price it):

* the system loop moves every OD at once from its non-best options towards
  the best one, with a golden-section line search over the system step;
* the OD loop then works on an integer assignment, one randomly chosen OD
  and one passenger at a time, and finishes with a sweep that certifies no
  single-passenger move onto a best option still improves the objective.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .costs import cost_breakdown
from .loader import EPS, Assignment, FlowState, LoadResult, load
from .model import OptionKey, TransitInstance, UnservableOptionError
from .solution import Solution

UE = "ue"
APPROX_SO = "approx-so"

INV_PHI = (math.sqrt(5) - 1) / 2


class SetupError(RuntimeError):
    """No feasible starting assignment exists."""


@dataclass
class SolverConfig:
    max_system_iters: int = 50
    max_od_iters: int = 20000
    od_patience: int = 100  # consecutive non-improving OD-loop iterations before the sweep
    golden_section_tol: float = 1e-3
    rng_seed: int = 0
    convergence_eps: float = 1e-6
    certify: bool = True
    max_sweeps: int = 20
    boarding: str = "proportional"

    def __post_init__(self):
        if min(self.max_system_iters, self.max_od_iters, self.od_patience) < 0:
            raise ValueError("iteration limits must be nonnegative")
        if not 0 < self.golden_section_tol <= 1e-2:
            raise ValueError("golden_section_tol must be in (0, 1e-2]")


# -- option costs -------------------------------------------------------------


@dataclass
class OptionCostTable:
    """Average, free-flow and best option costs of one loaded assignment.

    ``pieces[key]`` lists ``(passengers, cost each)`` for the passengers who
    started on that option; in integer mode each piece holds whole passengers.
    """

    options: dict[str, list[OptionKey]]
    avc: dict[OptionKey, float]
    avc0: dict[OptionKey, float]
    avc_star: dict[str, float]
    best: dict[str, OptionKey]
    pieces: dict[OptionKey, list[tuple[float, float]]] = field(default_factory=dict)

    def passenger_costs(self, key: OptionKey) -> list[float]:
        out = []
        for n, c in self.pieces.get(key, ()):
            out.extend([c] * int(round(n)))
        return out


def free_flow_cost(inst: TransitInstance, od: str, train, route: str) -> float:
    """Cost of an option when nobody is ever denied boarding."""
    if route not in inst.od(od).routes:
        raise UnservableOptionError(f"route {route!r} does not serve OD {od!r}")
    trav = inst.traverse(route, train)
    if trav is None:
        raise UnservableOptionError(f"option ({train}, {route}) misses a connection")
    cp = inst.cost_params
    return cp.in_vehicle_per_min * trav.in_vehicle + cp.wait_per_min * trav.transfer_wait + cp.schedule_delay(trav.arrival)


def _ff_table(inst: TransitInstance) -> dict[OptionKey, float]:
    cached = inst.__dict__.get("_ff_table")
    if cached is None:
        cached = {(k, t, r): free_flow_cost(inst, k, t, r) for k, t, r in inst.option_keys()}
        inst.__dict__["_ff_table"] = cached
    return cached


def _route_ivt(inst, route) -> int:
    total = 0
    for seg in route.segments:
        line = inst.line(seg.line)
        total += line.offsets[line.position(seg.alight) - 1] - line.offsets[line.position(seg.board) - 1]
    return total


def attribute_costs(inst: TransitInstance, assignment: Assignment, fs: FlowState) -> OptionCostTable:
    """Per-passenger costs from a loaded network, assuming FIFO within a route.

    The i-th passenger of a route starts on the earliest origin train whose
    cumulative assignment reaches i and arrives on the earliest destination
    train whose cumulative arriving flow reaches i.
    """
    cp = inst.cost_params
    ff = _ff_table(inst)
    tol = 0 if assignment.integer else 1e-7
    pieces: dict[OptionKey, list] = {}
    avc: dict[OptionKey, float] = {}
    for k in inst.od_pairs:
        for rid in k.routes:
            route = inst.route(rid)
            first, last = route.segments[0], route.segments[-1]
            o_line, d_line = inst.line(first.line), inst.line(last.line)
            m_dest = d_line.position(last.alight) - 1
            ivt = _route_ivt(inst, route)
            starts = [
                (t.key, assignment.q.get((k.id, t.key, rid), 0))
                for t in inst.trains_by_line[first.line]
            ]
            starts = [(t, v) for t, v in starts if v > tol]
            if not starts:
                continue
            arrivals = [
                (t.key, fs.f.get((k.id, rid, t.key, m_dest), 0))
                for t in inst.trains_by_line[last.line]
            ]
            arrivals = [(t, v) for t, v in arrivals if v > tol]
            i = j = 0
            rem_o = starts[0][1]
            rem_a = arrivals[0][1] if arrivals else 0
            while i < len(starts):
                t_o = starts[i][0]
                key = (k.id, t_o, rid)
                if j >= len(arrivals):
                    if rem_o <= 1e-6 * max(1.0, starts[i][1]) and not assignment.integer:
                        i += 1
                        rem_o = starts[i][1] if i < len(starts) else 0
                        continue
                    raise RuntimeError(f"route {rid}: fewer arrivals than departures (inconsistent flow)")
                t_a = arrivals[j][0]
                take = min(rem_o, rem_a)
                dep = inst.dep(t_o, first.board)
                arr = inst.arr(t_a, last.alight)
                c = cp.in_vehicle_per_min * ivt + cp.wait_per_min * (arr - dep - ivt) + cp.schedule_delay(arr)
                if take > 0:
                    pieces.setdefault(key, []).append((take, c))
                rem_o -= take
                rem_a -= take
                if rem_a <= tol:
                    j += 1
                    rem_a = arrivals[j][1] if j < len(arrivals) else 0
                if rem_o <= tol:
                    i += 1
                    rem_o = starts[i][1] if i < len(starts) else 0
    options: dict[str, list[OptionKey]] = {}
    avc_star: dict[str, float] = {}
    best: dict[str, OptionKey] = {}
    avc0: dict[OptionKey, float] = {}
    for k in inst.od_pairs:
        keys = [(k.id, t, r) for t, r in inst.options(k.id)]
        options[k.id] = keys
        b = None
        for key in keys:
            avc0[key] = ff[key]
            ps = pieces.get(key)
            n = sum(p for p, _ in ps) if ps else 0
            avc[key] = sum(p * c for p, c in ps) / n if n > tol else ff[key]
            if b is None or avc[key] < avc[b]:
                b = key
        if b is not None:
            best[k.id] = b
            avc_star[k.id] = avc[b]
    return OptionCostTable(options, avc, avc0, avc_star, best, pieces)


def ue_gap(table: OptionCostTable, assignment: Assignment) -> float:
    """Total gap: flow-weighted excess of option cost over the best in its OD."""
    gap = 0.0
    for k, keys in table.options.items():
        star = table.avc_star.get(k)
        for key in keys:
            v = assignment.q.get(key, 0)
            if v:
                gap += (table.avc[key] - star) * v
    return gap


def direction(table: OptionCostTable, assignment: Assignment, inst: TransitInstance) -> dict[OptionKey, float]:
    """Target vertex: each OD's whole demand on its cheapest option."""
    v = {key: 0 for keys in table.options.values() for key in keys}
    for k in inst.od_pairs:
        if k.id in table.best:
            v[table.best[k.id]] = k.demand
    return v


# -- line search --------------------------------------------------------------


def golden_section(evaluate: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Minimise a unimodal function on [lo, hi]; returns the final interval's midpoint."""
    a, b = min(lo, hi), max(lo, hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = evaluate(c), evaluate(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = evaluate(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = evaluate(d)
    return (a + b) / 2


# -- step sizes ---------------------------------------------------------------


@dataclass
class StepSizes:
    theta: float
    od_gap_ratio: dict[str, float]
    option_weight: dict[OptionKey, float]
    sigma: dict[OptionKey, float]
    clamped: list[str] = field(default_factory=list)


def step_sizes(table: OptionCostTable, theta: float, targeted: Optional[str] = None) -> StepSizes:
    """Per-option shift fractions ``theta * od_gap_ratio * option_weight``.

    The OD gap ratio compares the average cost of non-optimal options (summed
    over them, divided by the number of all options) with the best cost; it
    is clamped to [0, 1]. The option weight is the option's cost over the sum
    of all option costs of the OD. With ``targeted`` set, that OD's ratio is 1
    and every other OD's is 0.
    """
    ratio, weight, sigma, clamped = {}, {}, {}, []
    for k, keys in table.options.items():
        if not keys:
            continue
        star = table.avc_star[k]
        if targeted is not None:
            r = 1.0 if k == targeted else 0.0
        else:
            nonopt = sum(table.avc[key] for key in keys if table.avc[key] > star)
            c = nonopt / len(keys)
            if c <= 0:
                r = 0.0
            else:
                r = (c - star) / c
                if r < 0 or r > 1:
                    clamped.append(k)
                    r = min(1.0, max(0.0, r))
        ratio[k] = r
        denom = sum(table.avc[key] for key in keys)
        for key in keys:
            w = table.avc[key] / denom if denom > 0 else 0.0
            weight[key] = w
            sigma[key] = theta * r * w
    return StepSizes(theta, ratio, weight, sigma, clamped)


def shift(assignment: Assignment, table: OptionCostTable, steps: StepSizes, ods=None) -> Assignment:
    """Move the fraction ``sigma`` of every non-best option onto the best one."""
    q = dict(assignment.q)
    for k, keys in table.options.items():
        if ods is not None and k not in ods:
            continue
        b = table.best.get(k)
        if b is None:
            continue
        moved = 0.0
        for key in keys:
            if key == b:
                continue
            v = q.get(key, 0.0)
            if v <= 0:
                continue
            dv = steps.sigma[key] * v
            q[key] = v - dv
            moved += dv
        q[b] = q.get(b, 0.0) + moved
    return Assignment(q, integer=False)


# -- assignments --------------------------------------------------------------


def min_cost_assignment(inst: TransitInstance) -> Assignment:
    """All of each OD's demand on its cheapest free-flow option (ties: option order)."""
    ff = _ff_table(inst)
    q = {}
    for k in inst.od_pairs:
        keys = [(k.id, t, r) for t, r in inst.options(k.id)]
        if not keys:
            if k.demand:
                raise SetupError(f"OD {k.id} has demand but no servable option")
            continue
        if k.demand:
            q[min(keys, key=lambda key: ff[key])] = k.demand
    return Assignment(q, True)


def earliest_assignment(inst: TransitInstance) -> Assignment:
    """All of each OD's demand on its first option; queues spill onto later trains."""
    q = {}
    for k in inst.od_pairs:
        opts = inst.options(k.id)
        if k.demand:
            if not opts:
                raise SetupError(f"OD {k.id} has demand but no servable option")
            q[(k.id,) + opts[0]] = k.demand
    return Assignment(q, True)


def initial_candidates(inst: TransitInstance, boarding: str = "proportional") -> list[tuple[str, Assignment]]:
    """Starting assignments that load without stranding anyone, in preference order.

    ``min-cost`` puts each OD on its cheapest free-flow option, ``greedy``
    fills options cheapest-first without overloading any train, and
    ``earliest`` queues everyone at the first train.
    """
    out = []
    for name, make in (("min-cost", min_cost_assignment), ("greedy", greedy_assignment), ("earliest", earliest_assignment)):
        a = make(inst)
        if load(inst, a, boarding=boarding).feasible:
            out.append((name, a))
    if not out:
        raise SetupError("no starting assignment loads without stranding passengers")
    return out


def initial_assignment(inst: TransitInstance, boarding: str = "proportional") -> Assignment:
    return initial_candidates(inst, boarding)[0][1]


def option_legs(inst: TransitInstance, route_id: str, first_train) -> list[tuple]:
    """(train, leg index) pairs ridden by an option in free flow."""
    trav = inst.traverse(route_id, first_train)
    if trav is None:
        raise UnservableOptionError(f"option ({first_train}, {route_id}) misses a connection")
    legs = []
    for seg, t in zip(inst.route(route_id).segments, trav.trains):
        line = inst.line(seg.line)
        for m in range(line.position(seg.board), line.position(seg.alight)):
            legs.append((t, m))
    return legs


def greedy_assignment(inst: TransitInstance) -> Assignment:
    """Cheapest free-flow options first, across all ODs, without overloading a train.

    Demand that no longer fits goes to the OD's first option, where the
    loader will queue it.
    """
    ff = _ff_table(inst)
    residual = {}
    for t in inst.trains:
        for m in range(1, inst.line(t.line).n_stations):
            residual[(t.key, m)] = t.capacity
    remaining = {k.id: k.demand for k in inst.od_pairs}
    order = {k.id: i for i, k in enumerate(inst.od_pairs)}
    keys = sorted(inst.option_keys(), key=lambda key: (ff[key], order[key[0]]))
    q = {}
    for key in keys:
        k, t, r = key
        if remaining[k] <= 0:
            continue
        legs = option_legs(inst, r, t)
        room = min(residual[leg] for leg in legs)
        take = min(room, remaining[k])
        if take <= 0:
            continue
        q[key] = take
        remaining[k] -= take
        for leg in legs:
            residual[leg] -= take
    for k in inst.od_pairs:
        if remaining[k.id] > 0:
            opts = inst.options(k.id)
            if not opts:
                raise SetupError(f"OD {k.id} has demand but no servable option")
            key = (k.id,) + opts[0]
            q[key] = q.get(key, 0) + remaining[k.id]
    return Assignment(q, True)


def round_assignment(inst: TransitInstance, assignment: Assignment) -> Assignment:
    """Integer assignment by largest remainder within each OD (ties in option order)."""
    q = {}
    for k in inst.od_pairs:
        keys = [(k.id, t, r) for t, r in inst.options(k.id)]
        vals = [max(0.0, assignment.q.get(key, 0.0)) for key in keys]
        total = sum(vals)
        if k.demand == 0 or not keys:
            continue
        scale = k.demand / total if total > 0 else 0.0
        exact = [v * scale for v in vals]
        floors = [int(math.floor(x + 1e-9)) for x in exact]
        left = k.demand - sum(floors)
        order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - floors[i]), i))
        for i in order[:left]:
            floors[i] += 1
        for key, v in zip(keys, floors):
            if v:
                q[key] = v
    return Assignment(q, True)


# -- solver -------------------------------------------------------------------


@dataclass
class _Eval:
    assignment: Assignment
    result: LoadResult
    table: Optional[OptionCostTable]
    value: float


class _Evaluator:
    def __init__(self, inst: TransitInstance, objective: str, boarding: str):
        self.inst = inst
        self.objective = objective
        self.boarding = boarding
        self.calls = 0

    def __call__(self, a: Assignment) -> _Eval:
        self.calls += 1
        res = load(self.inst, a, boarding=self.boarding)
        if not res.feasible:
            return _Eval(a, res, None, math.inf)
        table = attribute_costs(self.inst, a, res.flow_state)
        if self.objective == UE:
            value = ue_gap(table, a)
        else:
            value = cost_breakdown(res.flow_state, self.inst).total
        return _Eval(a, res, table, value)


def solve(
    inst: TransitInstance,
    objective: str = UE,
    config: Optional[SolverConfig] = None,
    initial: Optional[Assignment] = None,
    progress: Optional[Callable[[dict], None]] = None,
) -> Solution:
    """Run the system loop, round, then the OD loop; return the best assignment found."""
    if objective not in (UE, APPROX_SO):
        raise ValueError(f"unknown objective {objective!r}")
    config = config or SolverConfig()
    t_start = time.perf_counter()
    history: list[dict] = []

    def log(**rec):
        history.append(rec)
        if progress is not None:
            progress(rec)

    evaluate = _Evaluator(inst, objective, config.boarding)
    if initial is not None:
        candidates = [("given", initial)]
    else:
        candidates = initial_candidates(inst, config.boarding)
    cur, start, start_name = None, None, None
    for name, a in candidates:
        ev = evaluate(Assignment({k: float(v) for k, v in a.q.items()}, False))
        if cur is None or ev.value < cur.value:
            cur, start, start_name = ev, a, name
    if not math.isfinite(cur.value):
        raise SetupError("initial assignment strands passengers")
    start_int = start if start.integer else round_assignment(inst, start)
    log(phase="start", iteration=0, objective=cur.value, theta=None, moved=0, start=start_name)

    # System-based loop on continuous flows.
    iters = 0
    for j in range(config.max_system_iters):
        table = cur.table

        def probe(theta, table=table, cur=cur):
            steps = step_sizes(table, theta)
            return evaluate(shift(cur.assignment, table, steps)).value

        theta = golden_section(probe, 0.0, 1.0, config.golden_section_tol)
        steps = step_sizes(table, theta)
        nxt = evaluate(shift(cur.assignment, table, steps))
        moved = sum(
            abs(nxt.assignment.q.get(key, 0.0) - cur.assignment.q.get(key, 0.0))
            for key in set(nxt.assignment.q) | set(cur.assignment.q)
        ) / 2
        iters += 1
        if nxt.value <= cur.value:
            gain = cur.value - nxt.value
            cur = nxt
            log(phase="system", iteration=iters, objective=cur.value, theta=theta, moved=moved)
            if gain <= config.convergence_eps:
                break
        else:
            log(phase="system-rejected", iteration=iters, objective=nxt.value, theta=theta, moved=0)
            break

    # Integer assignment for the OD loop: rounded system-loop result, unless
    # rounding strands passengers or is worse than the integer start.
    best = evaluate(round_assignment(inst, cur.assignment))
    fallback = evaluate(start_int)
    if fallback.value < best.value:
        best = fallback
    if not math.isfinite(best.value):
        raise SetupError("no feasible integer assignment found")
    log(phase="round", iteration=iters, objective=best.value, theta=None, moved=0)

    rng = random.Random(config.rng_seed)
    od_ids = [k.id for k in inst.od_pairs if k.demand > 0 and len(inst.options(k.id)) > 1]
    budget = config.max_od_iters
    stale = 0

    def one_passenger(ev: _Eval, src: OptionKey, dst: OptionKey) -> _Eval:
        q = dict(ev.assignment.q)
        q[src] -= 1
        if not q[src]:
            del q[src]
        q[dst] = q.get(dst, 0) + 1
        return evaluate(Assignment(q, True))

    def sources(ev: _Eval, k: str) -> list[OptionKey]:
        t = ev.table
        star = t.avc_star[k]
        used = [key for key in t.options[k] if ev.assignment.q.get(key, 0) > 0 and t.avc[key] > star + 1e-12]
        return sorted(used, key=lambda key: -t.avc[key])  # stable: option order among ties

    while budget > 0 and od_ids and stale < config.od_patience:
        k = rng.choice(od_ids)
        srcs = sources(best, k)
        if not srcs:
            stale += 1
            continue
        budget -= 1
        iters += 1
        cand = one_passenger(best, srcs[0], best.table.best[k])
        if cand.value < best.value - 1e-9:
            best = cand
            stale = 0
            log(phase="od", iteration=iters, objective=best.value, theta=None, moved=1, od=k)
        else:
            stale += 1

    # Certification sweep: no single passenger on a non-optimal option can
    # improve the objective by moving to any best option of its OD.
    sweeps = 0
    certified = False
    while config.certify and sweeps < config.max_sweeps:
        sweeps += 1
        improved = False
        for k in od_ids:
            src_done = False
            while not src_done and budget > 0:
                src_done = True
                star = best.table.avc_star[k]
                targets = [key for key in best.table.options[k] if best.table.avc[key] <= star + 1e-12]
                for src in sources(best, k):
                    for dst in targets:
                        budget -= 1
                        iters += 1
                        cand = one_passenger(best, src, dst)
                        if cand.value < best.value - 1e-9:
                            best = cand
                            improved = True
                            src_done = False
                            log(phase="sweep", iteration=iters, objective=best.value, theta=None, moved=1, od=k)
                            break
                    if not src_done:
                        break
        if budget <= 0:
            break
        if not improved:
            certified = True
            break

    fs = best.result.flow_state
    return Solution(
        kind=objective,
        assignment=best.assignment,
        flow_state=fs,
        cost_breakdown=cost_breakdown(fs, inst),
        objective=best.value,
        iterations=iters,
        wall_time=time.perf_counter() - t_start,
        history=history,
        meta={"start": start_name, "evaluations": evaluate.calls, "certified": certified, "sweeps": sweeps},
    )
