"""Scenario transforms and UE-versus-SO comparisons."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .loader import FlowState
from .model import ODPair, Train, TransitInstance
from .solution import Solution


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    demand_scale: float = 100  # percent
    capacity_scale: float = 100  # percent
    enabled_routes: Optional[Mapping[str, Sequence[str]]] = None  # od -> routes kept
    label: str = ""

    def __post_init__(self):
        if self.demand_scale <= 0 or self.capacity_scale <= 0:
            raise ScenarioError("scales must be positive")

    @property
    def name(self) -> str:
        return self.label or f"d{self.demand_scale:g}_c{self.capacity_scale:g}"


def _pct(x) -> Fraction:
    return Fraction(str(x)) / 100


def scale_demands(demands: Sequence[int], scale_percent) -> list[int]:
    """Largest-remainder scaling: the total is the rounded scaled total, ties to the earlier OD."""
    f = _pct(scale_percent)
    exact = [d * f for d in demands]
    floors = [math.floor(x) for x in exact]
    target = math.floor(sum(exact) + Fraction(1, 2))
    order = sorted(range(len(demands)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[: target - sum(floors)]:
        floors[i] += 1
    return floors


def apply_scenario(inst: TransitInstance, spec: ScenarioSpec) -> TransitInstance:
    if spec.enabled_routes is not None:
        unknown = set(spec.enabled_routes) - set(inst.od_by_id)
        if unknown:
            raise ScenarioError(f"unknown ODs in route filter: {sorted(unknown)}")
    demands = scale_demands([k.demand for k in inst.od_pairs], spec.demand_scale)
    ods = []
    for k, d in zip(inst.od_pairs, demands):
        routes = k.routes
        if spec.enabled_routes is not None and k.id in spec.enabled_routes:
            keep = tuple(spec.enabled_routes[k.id])
            missing = set(keep) - set(k.routes)
            if missing:
                raise ScenarioError(f"OD {k.id}: routes {sorted(missing)} do not exist")
            routes = tuple(r for r in k.routes if r in keep)
            if not routes:
                raise ScenarioError(f"OD {k.id} is left without routes")
        ods.append(ODPair(k.id, k.origin, k.destination, d, routes))
    used = {r for k in ods for r in k.routes}
    routes = tuple(r for r in inst.routes if r.id in used)
    cf = _pct(spec.capacity_scale)
    trains = []
    for t in inst.trains:
        cap = math.floor(t.capacity * cf)
        if cap < 1:
            raise ScenarioError(f"capacity scale {spec.capacity_scale}% leaves train {t.key} without capacity")
        trains.append(Train(t.line, t.index, t.start_time, cap))
    name = inst.name if spec.demand_scale == 100 and spec.capacity_scale == 100 else f"{inst.name}@{spec.name}"
    return inst.evolve(od_pairs=tuple(ods), routes=routes, trains=tuple(trains), name=name)


def pscir(ue_cost: float, so_cost: float) -> float:
    """Potential system cost improvement ratio."""
    if ue_cost <= 0:
        raise ValueError("UE cost must be positive")
    return 1.0 - so_cost / ue_cost


def _by_od(q: Mapping) -> dict[str, dict]:
    out: dict[str, dict] = defaultdict(dict)
    for (k, t, r), v in q.items():
        if v:
            out[k][(t, r)] = v
    return out


def impacted_passengers(q_ue: Mapping, q_so: Mapping, inst: Optional[TransitInstance] = None) -> dict[str, float]:
    """Fewest passengers per OD who must change option to turn one assignment into the other."""
    if inst is not None:
        valid = set(inst.option_keys())
        stray = [key for key, v in list(q_ue.items()) + list(q_so.items()) if v and key not in valid]
        if stray:
            raise ScenarioError(f"assignment uses options outside the instance: {stray[:3]}")
    a, b = _by_od(q_ue), _by_od(q_so)
    ods = [k.id for k in inst.od_pairs] if inst is not None else sorted(set(a) | set(b))
    out = {}
    for k in ods:
        xa, xb = a.get(k, {}), b.get(k, {})
        out[k] = sum(abs(xa.get(o, 0) - xb.get(o, 0)) for o in set(xa) | set(xb)) / 2
    return out


def contribution_per_passenger(cost_ue: Mapping[str, float], cost_so: Mapping[str, float], impacted: Mapping[str, float]) -> dict[str, float]:
    return {k: (cost_ue[k] - cost_so[k]) / n if n else 0.0 for k, n in impacted.items()}


@dataclass
class ShiftHistogram:
    """Departure-time shifts (minutes, SO minus UE) of moved passengers.

    ``unmoved`` counts passengers whose option is the same in both
    assignments; they belong to the zero bin of the published table.
    """

    moved: Counter = field(default_factory=Counter)
    unmoved: float = 0

    @property
    def total_moved(self) -> float:
        return sum(self.moved.values())

    def bins(self) -> dict[int, float]:
        out = dict(self.moved)
        if self.unmoved:
            out[0] = out.get(0, 0) + self.unmoved
        return dict(sorted(out.items()))

    def share_within(self, minutes: int) -> float:
        n = self.total_moved
        return sum(v for s, v in self.moved.items() if abs(s) <= minutes) / n if n else 1.0

    def rows(self):
        for s, v in self.bins().items():
            yield {"shift_min": s, "passengers": _num(v)}


def _num(v):
    return int(v) if float(v).is_integer() else round(float(v), 6)


def _expand(items: Iterable[tuple[int, float]]) -> list[tuple[int, float]]:
    return sorted((d, v) for d, v in items if v > 0)


def _match(a: list, b: list, hist: Counter) -> tuple[list, list]:
    """Monotone matching of two sorted (departure, mass) lists; returns the unmatched rest."""
    a, b = [list(x) for x in a], [list(x) for x in b]
    i = j = 0
    while i < len(a) and j < len(b):
        take = min(a[i][1], b[j][1])
        hist[b[j][0] - a[i][0]] += take
        a[i][1] -= take
        b[j][1] -= take
        if a[i][1] <= 1e-12:
            i += 1
        if b[j][1] <= 1e-12:
            j += 1
    rest_a = [(d, v) for d, v in a[i:] if v > 1e-12]
    rest_b = [(d, v) for d, v in b[j:] if v > 1e-12]
    return rest_a, rest_b


def shift_histogram(q_ue: Mapping, q_so: Mapping, inst: TransitInstance) -> ShiftHistogram:
    """Passengers who keep their option stay in bin 0; the rest are matched
    within their route by sorted departure time, then across routes."""
    hist = ShiftHistogram()
    a, b = _by_od(q_ue), _by_od(q_so)
    for k in inst.od_pairs:
        xa, xb = a.get(k.id, {}), b.get(k.id, {})
        res_a: dict[str, list] = defaultdict(list)
        res_b: dict[str, list] = defaultdict(list)
        for o in set(xa) | set(xb):
            t, r = o
            va, vb = xa.get(o, 0), xb.get(o, 0)
            hist.unmoved += min(va, vb)
            dep = inst.dep(t, k.origin)
            if va > vb:
                res_a[r].append((dep, va - vb))
            elif vb > va:
                res_b[r].append((dep, vb - va))
        left_a, left_b = [], []
        for r in k.routes:
            ra, rb = _match(_expand(res_a.get(r, [])), _expand(res_b.get(r, [])), hist.moved)
            left_a += ra
            left_b += rb
        _match(_expand(left_a), _expand(left_b), hist.moved)
    return hist


@dataclass(frozen=True)
class LinkFlowPoint:
    train: tuple
    departure: int
    passengers: float

    @property
    def zero(self) -> bool:
        return self.passengers == 0


def link_flows(fs: FlowState, inst: TransitInstance, line_id: str, m: int) -> list[LinkFlowPoint]:
    """Passengers per train on leg ``m`` of a line, in departure order."""
    line = inst.line(line_id)
    if not 1 <= m < line.n_stations:
        raise ScenarioError(f"line {line_id} has no leg {m}")
    loads = fs.leg_load()
    return [
        LinkFlowPoint(t.key, inst.dep(t.key, line.stations[m - 1]), loads.get((t.key, m), 0))
        for t in inst.trains_by_line[line_id]
    ]


def link_flow_rows(solutions: Mapping[str, Solution], inst: TransitInstance) -> list[dict]:
    rows = []
    for line in inst.lines:
        for m in range(1, line.n_stations):
            series = {name: link_flows(s.flow_state, inst, line.id, m) for name, s in solutions.items()}
            for name, pts in series.items():
                for p in pts:
                    rows.append({
                        "solver": name,
                        "line": line.id,
                        "leg": m,
                        "from": line.stations[m - 1],
                        "to": line.stations[m],
                        "train": f"{p.train[0]}#{p.train[1]}",
                        "departure": p.departure,
                        "passengers": _num(p.passengers),
                        "zero_flow": int(p.zero),
                    })
    return rows


LINK_FLOW_FIELDS = ["solver", "line", "leg", "from", "to", "train", "departure", "passengers", "zero_flow"]
COMPARISON_FIELDS = ["od", "demand", "ue", "approx_so", "exact_so", "impacted", "contribution_per_passenger"]


@dataclass
class ComparisonReport:
    per_od: list[dict]
    totals: dict[str, float]
    pscir: dict[str, float]
    impacted: dict[str, float]
    contribution: dict[str, float]
    histogram: ShiftHistogram
    link_flows: list[dict]

    def summary(self) -> dict:
        top = max(self.contribution.items(), key=lambda x: (x[1], x[0]), default=(None, 0.0))
        return {
            "totals": {k: round(v, 2) for k, v in self.totals.items()},
            "pscir": {k: round(v, 6) for k, v in self.pscir.items()},
            "impacted_total": _num(sum(self.impacted.values())),
            "top_contribution_od": top[0],
            "top_contribution": round(top[1], 2),
            "moved_within_30_min": round(self.histogram.share_within(30), 4),
        }


def compare(inst: TransitInstance, ue: Solution, so: Solution, approx: Optional[Solution] = None) -> ComparisonReport:
    """Per-OD costs, PSCIR, impacted passengers and shifts of SO against UE."""
    c_ue = {k: c.total for k, c in ue.cost_breakdown.per_od.items()}
    c_so = {k: c.total for k, c in so.cost_breakdown.per_od.items()}
    c_ap = {k: c.total for k, c in approx.cost_breakdown.per_od.items()} if approx else {}
    imp = impacted_passengers(ue.q, so.q, inst)
    contrib = contribution_per_passenger(c_ue, c_so, imp)
    rows = []
    for k in inst.od_pairs:
        rows.append({
            "od": k.id,
            "demand": k.demand,
            "ue": f"{c_ue[k.id]:.2f}",
            "approx_so": f"{c_ap[k.id]:.2f}" if approx else "",
            "exact_so": f"{c_so[k.id]:.2f}",
            "impacted": _num(imp[k.id]),
            "contribution_per_passenger": f"{contrib[k.id]:.2f}",
        })
    totals = {"ue": ue.total_cost, "exact_so": so.total_cost}
    ratios = {"exact_so": pscir(ue.total_cost, so.total_cost)}
    sols = {"ue": ue, "exact_so": so}
    if approx:
        totals["approx_so"] = approx.total_cost
        ratios["approx_so"] = pscir(ue.total_cost, approx.total_cost)
        sols["approx_so"] = approx
    return ComparisonReport(
        rows, totals, ratios, imp, contrib, shift_histogram(ue.q, so.q, inst), link_flow_rows(sols, inst)
    )


# -- scenario matrix ----------------------------------------------------------

MATRIX_FIELDS = ["scenario", "demand_scale", "capacity_scale", "solver", "status", "total_cost", "pscir", "wall_time", "error"]


def run_matrix(
    inst: TransitInstance,
    scenarios: Sequence[ScenarioSpec],
    solvers: Sequence[str] = ("ue", "approx-so", "exact-so"),
    run: Optional[Callable[[TransitInstance, str], Solution]] = None,
) -> list[dict]:
    """One row per (scenario, solver); a failing cell is recorded, not raised.

    ``pscir`` is relative to the same scenario's UE cost when UE was run.
    """
    if run is None:
        from .runner import run_solver as run
    rows = []
    for spec in scenarios:
        try:
            sc = apply_scenario(inst, spec)
        except ScenarioError as exc:
            for s in solvers:
                cell = _cell(spec, s, "error", None, 0.0, str(exc))
                cell.pop("_cost")
                rows.append(cell)
            continue
        cells = []
        ue_cost = None
        for s in solvers:
            try:
                sol = run(sc, s)
            except Exception as exc:  # recorded per cell
                cells.append(_cell(spec, s, "error", None, 0.0, f"{type(exc).__name__}: {exc}"))
                continue
            if s == "ue":
                ue_cost = sol.total_cost
            cells.append(_cell(spec, s, "ok", sol.total_cost, sol.wall_time, ""))
        for c in cells:
            raw = c.pop("_cost")
            if ue_cost and raw is not None:
                c["pscir"] = f"{pscir(ue_cost, raw):.6f}"
        rows += cells
    return rows


def _cell(spec, solver, status, cost, wall, err):
    return {
        "scenario": spec.name,
        "demand_scale": f"{spec.demand_scale:g}",
        "capacity_scale": f"{spec.capacity_scale:g}",
        "solver": solver,
        "status": status,
        "total_cost": "" if cost is None else f"{cost:.2f}",
        "pscir": "",
        "wall_time": f"{wall:.3f}",
        "error": err,
        "_cost": cost,
    }
