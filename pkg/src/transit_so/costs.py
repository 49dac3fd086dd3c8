"""Generalised cost of a loaded network, per OD and in total.

All rates are $/hour in :class:`CostParams`; every term here is computed in
$/minute times minutes. Dollar amounts stay unrounded until written out.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .loader import FlowState
from .model import TransitInstance


class FeasibilityError(ValueError):
    """The flow state cannot be priced (stranded passengers, bad carry-over)."""


@dataclass
class ODCost:
    ivcst: float = 0.0
    chcst: float = 0.0
    dbcst: float = 0.0
    elcst: float = 0.0

    @property
    def total(self) -> float:
        return self.ivcst + self.chcst + self.dbcst + self.elcst


@dataclass
class CostBreakdown:
    per_od: dict[str, ODCost] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return sum(c.total for c in self.per_od.values())

    def component_totals(self) -> dict[str, float]:
        return {
            name: sum(getattr(c, name) for c in self.per_od.values())
            for name in ("ivcst", "chcst", "dbcst", "elcst")
        }

    def rows(self):
        """``od_costs.csv`` rows, rounded to cents."""
        for k, c in self.per_od.items():
            yield {
                "od": k,
                "ivcst": f"{c.ivcst:.2f}",
                "chcst": f"{c.chcst:.2f}",
                "dbcst": f"{c.dbcst:.2f}",
                "elcst": f"{c.elcst:.2f}",
                "total": f"{c.total:.2f}",
            }


def _zeros(inst):
    return {k.id: 0.0 for k in inst.od_pairs}


def in_vehicle_cost(fs: FlowState, inst: TransitInstance) -> dict[str, float]:
    rate = inst.cost_params.in_vehicle_per_min
    out = _zeros(inst)
    for (k, t, m), v in fs.fk().items():
        out[k] += rate * v * inst.line(t[0]).leg_duration(m)
    return out


def transfer_wait_cost(fs: FlowState, inst: TransitInstance) -> dict[str, float]:
    rate = inst.cost_params.wait_per_min
    out = _zeros(inst)
    for (k, r, t, m), v in fs.f.items():
        if not v:
            continue
        route = inst.route(r)
        line = inst.line(t[0])
        s = line.stations[m]  # station at the end of leg m
        for i, seg in enumerate(route.segments[:-1]):
            if seg.line == t[0] and seg.alight == s:
                nxt = inst.next_connection(s, t, route.segments[i + 1].line)
                if nxt is None:
                    raise FeasibilityError(f"{v} passengers of route {r} stranded at {s} off train {t}")
                out[k] += rate * (inst.dep(nxt.key, s) - inst.arr(t, s)) * v
                break
    return out


def denied_boarding_cost(fs: FlowState, inst: TransitInstance) -> dict[str, float]:
    # Wait per denial is the headway between consecutive start times on the line.
    rate = inst.cost_params.wait_per_min
    out = _zeros(inst)
    for (k, t, s), v in fs.dbk().items():
        if not v:
            continue
        prev = inst.previous_start(t)
        if prev is None:
            raise FeasibilityError(f"denied boarding recorded for first train {t} at {s}")
        out[k] += rate * (inst.train(t).start_time - prev) * v
    return out


def schedule_delay_cost(fs: FlowState, inst: TransitInstance) -> dict[str, float]:
    cp = inst.cost_params
    out = _zeros(inst)
    for (k, t, m), v in fs.fk().items():
        od = inst.od(k)
        line = inst.line(t[0])
        if line.stations[m] == od.destination:
            out[k] += v * cp.schedule_delay(inst.arr(t, od.destination))
    return out


def cost_breakdown(fs: FlowState, inst: TransitInstance) -> CostBreakdown:
    parts = (
        in_vehicle_cost(fs, inst),
        transfer_wait_cost(fs, inst),
        denied_boarding_cost(fs, inst),
        schedule_delay_cost(fs, inst),
    )
    return CostBreakdown(
        {k.id: ODCost(*(p[k.id] for p in parts)) for k in inst.od_pairs}
    )


def scale_flow_state(fs: FlowState, c: float) -> FlowState:
    return FlowState(
        {k: v * c for k, v in fs.f.items()},
        {k: v * c for k, v in fs.g.items()},
        {k: v * c for k, v in fs.db.items()},
    )


def add_flow_states(a: FlowState, b: FlowState) -> FlowState:
    def add(x, y):
        out = defaultdict(float, x)
        for k, v in y.items():
            out[k] += v
        return dict(out)

    return FlowState(add(a.f, b.f), add(a.g, b.g), add(a.db, b.db))
