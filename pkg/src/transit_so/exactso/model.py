"""Integer-linear model of the system optimum without denied boarding.

With fixed schedules every connection is known in advance, so a transfer
becomes a train-to-train flow equality and the whole model is linear with
constant cost coefficients.

Objective coefficients are kept in $/h x minutes (the dollar objective times
``OBJECTIVE_SCALE``) so that integer cost rates give integer coefficients and
an exact optimality gap of zero means what it says.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from ..model import TransitInstance

OBJECTIVE_SCALE = 60.0


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = float("inf")
    integer: bool = True


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str  # "<=", ">=", "="
    rhs: float

    def activity(self, x) -> float:
        return sum(c * x[i] for i, c in self.terms)

    def satisfied(self, x, tol: float = 1e-6) -> bool:
        a = self.activity(x)
        if self.sense == "<=":
            return a <= self.rhs + tol
        if self.sense == ">=":
            return a >= self.rhs - tol
        return abs(a - self.rhs) <= tol


@dataclass
class ModelIR:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    var_index: dict[tuple, int] = field(default_factory=dict)  # semantic key -> index
    objective_scale: float = OBJECTIVE_SCALE
    name: str = ""

    def add_var(self, key: tuple, name: str, **kw) -> int:
        if key in self.var_index:
            raise KeyError(f"duplicate variable {key}")
        i = len(self.variables)
        self.variables.append(Variable(name, **kw))
        self.var_index[key] = i
        return i

    def add_constraint(self, name: str, terms: Iterable[tuple[int, float]], sense: str, rhs: float) -> None:
        merged: dict[int, float] = {}
        for i, c in terms:
            merged[i] = merged.get(i, 0.0) + c
        self.constraints.append(Constraint(name, tuple((i, c) for i, c in merged.items() if c), sense, rhs))

    def objective_value(self, x) -> float:
        """Dollar objective at the point ``x`` (indexed like ``variables``)."""
        return sum(c * x[i] for i, c in self.objective.items()) / self.objective_scale

    def validate(self) -> list[str]:
        out = []
        n = len(self.variables)
        for v in self.variables:
            if v.lb > v.ub:
                out.append(f"{v.name}: lower bound above upper bound")
        for c in self.constraints:
            if any(not 0 <= i < n for i, _ in c.terms):
                out.append(f"{c.name}: references an undeclared variable")
            if c.sense not in ("<=", ">=", "="):
                out.append(f"{c.name}: bad sense {c.sense!r}")
        if any(not 0 <= i < n for i in self.objective):
            out.append("objective references an undeclared variable")
        names = [v.name for v in self.variables] + [c.name for c in self.constraints]
        if len(set(names)) != len(names):
            out.append("duplicate names")
        return out


_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _clean(s) -> str:
    return _BAD.sub(".", str(s))


class _Names:
    """Solver-safe, unique names derived from semantic keys."""

    def __init__(self):
        self.used: set[str] = set()

    def __call__(self, base: str) -> str:
        name, i = base, 1
        while name in self.used:
            i += 1
            name = f"{base}.v{i}"
        self.used.add(name)
        return name


def _train(t) -> str:
    return f"{_clean(t[0])}.{t[1]}"


def build_ilp(inst: TransitInstance) -> ModelIR:
    """Exact SO model over the servable options of ``inst``.

    Semantic keys: ``("q", k, train, r)`` and ``("f", k, r, train, m)`` with m
    the leg index on the train's line. Trains a route can never reach on a
    segment get no variables at all.
    """
    cp = inst.cost_params
    model = ModelIR(name=inst.name)
    names = _Names()
    leg_terms: dict[tuple, list] = {}

    for k in inst.od_pairs:
        q_terms = []
        arrive_terms = []
        for rid in k.routes:
            route = inst.route(rid)
            starts = [t for t, r in inst.options(k.id) if r == rid]
            if not starts:
                continue
            chains = [inst.traverse(rid, t).trains for t in starts]
            images = [sorted({c[i] for c in chains}, key=lambda t: t[1]) for i in range(len(route.segments))]
            feeders: dict = {}  # train -> its last-leg variable on the previous segment
            for i, seg in enumerate(route.segments):
                line = inst.line(seg.line)
                pb, pa = line.position(seg.board), line.position(seg.alight)
                is_last = i == len(route.segments) - 1
                first_leg, last_leg = {}, {}
                for t in images[i]:
                    prev = None
                    for m in range(pb, pa):
                        v = model.add_var(
                            ("f", k.id, rid, t, m),
                            names(f"f_{_clean(k.id)}_{_clean(rid)}_{_train(t)}_{m}"),
                        )
                        leg_terms.setdefault((t, m), []).append((v, 1.0))
                        model.objective[v] = cp.in_vehicle_rate * line.leg_duration(m)
                        if prev is None:
                            first_leg[t] = v
                        else:
                            model.add_constraint(
                                names(f"thru_{_clean(k.id)}_{_clean(rid)}_{_train(t)}_{m}"),
                                [(v, 1.0), (prev, -1.0)], "=", 0.0,
                            )
                        prev = v
                    last_leg[t] = prev
                    if is_last:
                        arr = inst.arr(t, seg.alight)
                        early = max(0, cp.target_arrival - arr)
                        late = max(0, arr - cp.target_arrival)
                        model.objective[prev] += cp.early_rate * early + cp.late_rate * late
                        arrive_terms.append((prev, 1.0))
                if i == 0:
                    for t in images[0]:
                        q = model.add_var(("q", k.id, t, rid), names(f"q_{_clean(k.id)}_{_train(t)}_{_clean(rid)}"))
                        q_terms.append((q, 1.0))
                        model.add_constraint(
                            names(f"orig_{_clean(k.id)}_{_clean(rid)}_{_train(t)}"),
                            [(first_leg[t], 1.0), (q, -1.0)], "=", 0.0,
                        )
                else:
                    by_target: dict = {}
                    for t1, v1 in feeders.items():
                        t2 = inst.next_connection(seg.board, t1, seg.line).key
                        by_target.setdefault(t2, []).append((t1, v1))
                        model.objective[v1] += cp.wait_rate * (inst.dep(t2, seg.board) - inst.arr(t1, seg.board))
                    for t2 in images[i]:
                        terms = [(first_leg[t2], 1.0)] + [(v1, -1.0) for _, v1 in by_target.get(t2, ())]
                        model.add_constraint(
                            names(f"xfer_{_clean(k.id)}_{_clean(rid)}_{_train(t2)}_{i}"), terms, "=", 0.0
                        )
                feeders = last_leg
        if q_terms or k.demand:
            model.add_constraint(names(f"dem_{_clean(k.id)}"), q_terms, "=", float(k.demand))
            model.add_constraint(names(f"arr_{_clean(k.id)}"), arrive_terms, "=", float(k.demand))

    for (t, m), terms in sorted(leg_terms.items(), key=lambda x: (x[0][0][0], x[0][0][1], x[0][1])):
        cap = inst.train_by_key[t].capacity
        model.add_constraint(names(f"cap_{_train(t)}_{m}"), terms, "<=", float(cap))
    return model
