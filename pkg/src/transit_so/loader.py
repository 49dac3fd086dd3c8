"""Event-based network loading under hard train capacity.

Maps an origin assignment ``q[(k, t, r)]`` to on-board flows, platform waits
and denied boardings. Events are train arrivals and departures at stations,
processed in time order with arrivals first, so that a same-minute transfer
is caught.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional

from .model import OptionKey, TrainKey, TransitInstance

EPS = 1e-9


class InputError(ValueError):
    """Malformed assignment."""


@dataclass
class Assignment:
    """Passengers per option ``(od, first train, route)`` at origins."""

    q: dict[OptionKey, float]
    integer: bool = True

    def od_total(self, od: str) -> float:
        return sum(v for (k, _, _), v in self.q.items() if k == od)

    def get(self, key: OptionKey) -> float:
        return self.q.get(key, 0)

    def copy(self) -> "Assignment":
        return Assignment(dict(self.q), self.integer)

    def nonzero(self) -> dict[OptionKey, float]:
        return {k: v for k, v in self.q.items() if v > EPS}


@dataclass
class FlowState:
    """Loaded network.

    ``f[(k, r, train, m)]`` on-board flow on leg m of the train's line,
    ``g[(k, r, train, s)]`` passengers waiting at station s for the train,
    ``db[(k, r, train, s)]`` of those, the ones carried over from the previous
    train because they were denied boarding.
    """

    f: dict[tuple, float] = field(default_factory=dict)
    g: dict[tuple, float] = field(default_factory=dict)
    db: dict[tuple, float] = field(default_factory=dict)

    def fk(self) -> dict[tuple, float]:
        out: dict[tuple, float] = defaultdict(float)
        for (k, _r, t, m), v in self.f.items():
            out[(k, t, m)] += v
        return dict(out)

    def dbk(self) -> dict[tuple, float]:
        out: dict[tuple, float] = defaultdict(float)
        for (k, _r, t, s), v in self.db.items():
            out[(k, t, s)] += v
        return dict(out)

    def leg_load(self) -> dict[tuple[TrainKey, int], float]:
        out: dict[tuple, float] = defaultdict(float)
        for (_k, _r, t, m), v in self.f.items():
            out[(t, m)] += v
        return dict(out)


class Stranded(NamedTuple):
    od: str
    route: str
    station: str
    count: float


@dataclass
class LoadResult:
    flow_state: FlowState
    feasible: bool
    stranded: list[Stranded]
    events: Optional[list[dict]] = None


# -- boarding -----------------------------------------------------------------


def board(waiting: Mapping, residual, integer: bool = False):
    """Ration ``residual`` places over waiting groups.

    Everyone boards when there is room; otherwise each group boards the same
    fraction ``residual / total``. In integer mode the fractional parts are
    apportioned by largest remainder, ties broken by group key order.
    Returns ``(boarded, denied)`` dicts over the same keys.
    """
    total = sum(waiting.values())
    if total <= residual:
        return dict(waiting), {g: 0 for g in waiting}
    if residual <= 0:
        return {g: 0 for g in waiting}, dict(waiting)
    if integer:
        residual = int(residual)
        total = int(total)
        boarded = {}
        rema = []
        for g, w in waiting.items():
            num = int(w) * residual
            boarded[g] = num // total
            rema.append((-(num % total), g))
        left = residual - sum(boarded.values())
        for _, g in sorted(rema, key=lambda x: (x[0], _sort_key(x[1])))[:left]:
            boarded[g] += 1
    else:
        frac = residual / total
        boarded = {g: w * frac for g, w in waiting.items()}
    denied = {g: waiting[g] - boarded[g] for g in waiting}
    return boarded, denied


def _sort_key(g):
    return tuple(str(x) for x in g) if isinstance(g, tuple) else (str(g),)


# -- event schedule -----------------------------------------------------------

ARRIVE, DEPART = 0, 1


def _event_schedule(inst: TransitInstance):
    cached = inst.__dict__.get("_event_schedule")
    if cached is not None:
        return cached
    events = []
    for line in inst.lines:
        for t in inst.trains_by_line.get(line.id, ()):
            for m, s in enumerate(line.stations, start=1):
                time = t.start_time + line.offsets[m - 1]
                if m > 1:
                    events.append((time, ARRIVE, line.id, t.index, m, s))
                if m < line.n_stations:
                    events.append((time, DEPART, line.id, t.index, m, s))
    events.sort(key=lambda e: (e[0], e[1], e[2], e[3], e[4]))
    inst.__dict__["_event_schedule"] = events
    return events


def _validate(inst: TransitInstance, a: Assignment):
    for (k, t, r), v in a.q.items():
        if v < -EPS or (isinstance(v, float) and math.isnan(v)):
            raise InputError(f"negative or NaN flow on option {(k, t, r)}")
        if k not in inst.od_by_id:
            raise InputError(f"unknown OD {k!r}")
        if r not in inst.od_by_id[k].routes:
            raise InputError(f"route {r!r} is not available to OD {k!r}")
        if t[0] != inst.route(r).first_line or t not in inst.train_by_key:
            raise InputError(f"train {t} does not serve the first line of route {r!r}")
        if a.integer and v != int(v):
            raise InputError(f"fractional flow {v} on option {(k, t, r)} in integer mode")
    for k in inst.od_pairs:
        tot = a.od_total(k.id)
        if abs(tot - k.demand) > 1e-6 * max(1, k.demand):
            raise InputError(f"OD {k.id}: assigned {tot} passengers, demand is {k.demand}")


# -- loading ------------------------------------------------------------------


def load(
    inst: TransitInstance,
    assignment: Assignment,
    *,
    boarding: str = "proportional",
    audit: bool = False,
    trace: bool = False,
) -> LoadResult:
    """Simulate train runs for a given origin assignment.

    At each departure the passengers already on board stay on (they never
    leave mid-route), then the platform groups board up to the residual
    capacity. ``boarding="proportional"`` mixes carried-over and newly
    arrived passengers in the same fraction; ``"fifo"`` lets carried-over
    passengers board first. At each arrival destination passengers alight and
    transferring passengers walk to the next line's platform to wait for the
    first connecting train.
    """
    if boarding not in ("proportional", "fifo"):
        raise ValueError(f"unknown boarding rule {boarding!r}")
    _validate(inst, assignment)
    integer = assignment.integer
    zero = 0 if integer else 0.0
    routes = inst.route_by_id
    total_demand = sum(assignment.q.values())

    fs = FlowState()
    stranded: list[Stranded] = []
    events_out: list[dict] | None = [] if trace else None

    # newcomers[(line, station, n)][(k, r, seg)] -> passengers arriving for train n
    newcomers: dict[tuple, dict] = defaultdict(lambda: defaultdict(lambda: zero))
    # carry[(line, station)][(k, r, seg)] -> denied passengers waiting for the next train
    carry: dict[tuple, dict] = {}
    onboard: dict[TrainKey, dict] = defaultdict(dict)
    arrived = zero

    for (k, t, r), v in assignment.q.items():
        if v > 0:
            origin = routes[r].segments[0].board
            newcomers[(t[0], origin, t[1])][(k, r, 0)] += int(v) if integer else float(v)

    for time, kind, lid, n, m, s in _event_schedule(inst):
        tkey = (lid, n)
        if kind == ARRIVE:
            ob = onboard.get(tkey)
            if not ob:
                continue
            alighted = zero
            for grp in [g for g in ob if routes[g[1]].segments[g[2]].alight == s]:
                v = ob.pop(grp)
                alighted += v
                k, r, i = grp
                segs = routes[r].segments
                if i == len(segs) - 1:
                    arrived += v
                    continue
                nxt = inst.first_departure(s, segs[i + 1].line, time)
                if nxt is None:
                    stranded.append(Stranded(k, r, s, v))
                else:
                    newcomers[(nxt.line, s, nxt.index)][(k, r, i + 1)] += v
            if trace and alighted:
                events_out.append(_event_row(time, tkey, s, zero, zero, alighted, ob))
        else:
            ob = onboard[tkey]
            new = newcomers.pop((lid, s, n), None) or {}
            old = carry.pop((lid, s), None) or {}
            if new or old:
                waiting = defaultdict(lambda: zero)
                for grp, v in new.items():
                    waiting[grp] += v
                for grp, v in old.items():
                    waiting[grp] += v
                    k, r, _ = grp
                    fs.db[(k, r, tkey, s)] = fs.db.get((k, r, tkey, s), zero) + v
                for (k, r, _), v in waiting.items():
                    fs.g[(k, r, tkey, s)] = fs.g.get((k, r, tkey, s), zero) + v
                residual = inst.train_by_key[tkey].capacity - sum(ob.values())
                if boarding == "fifo" and old:
                    b1, d1 = board(old, residual, integer)
                    b2, d2 = board(new, residual - sum(b1.values()), integer)
                    boarded = _merge(b1, b2, zero)
                    denied = _merge(d1, d2, zero)
                else:
                    boarded, denied = board(dict(waiting), residual, integer)
                for grp, v in boarded.items():
                    if v > 0:
                        ob[grp] = ob.get(grp, zero) + v
                left = {grp: v for grp, v in denied.items() if v > (0 if integer else EPS)}
                if left:
                    carry[(lid, s)] = left
                if trace:
                    events_out.append(
                        _event_row(time, tkey, s, sum(boarded.values()), sum(left.values()), zero, ob)
                    )
            for (k, r, _), v in ob.items():
                key = (k, r, tkey, m)
                fs.f[key] = fs.f.get(key, zero) + v
        if audit:
            _audit(total_demand, onboard, newcomers, carry, arrived, stranded, integer)

    # Denied at the last train of a line: nobody left to board.
    for (lid, s), groups in carry.items():
        for (k, r, _), v in groups.items():
            stranded.append(Stranded(k, r, s, v))
    for (lid, s, n), groups in newcomers.items():
        for (k, r, _), v in groups.items():
            if v > 0:
                stranded.append(Stranded(k, r, s, v))

    tol = 0 if integer else 1e-7
    stranded = [x for x in stranded if x.count > tol]
    return LoadResult(fs, not stranded, stranded, events_out)


def _merge(a, b, zero):
    out = dict(a)
    for g, v in b.items():
        out[g] = out.get(g, zero) + v
    return out


def _event_row(time, train, station, boarded, denied, alighted, ob):
    return {
        "time": time,
        "train": f"{train[0]}#{train[1]}",
        "station": station,
        "boarded": boarded,
        "denied": denied,
        "alighted": alighted,
        "onboard_after": sum(ob.values()),
    }


def _audit(total, onboard, newcomers, carry, arrived, stranded, integer):
    held = sum(sum(ob.values()) for ob in onboard.values())
    held += sum(sum(g.values()) for g in newcomers.values())
    held += sum(sum(g.values()) for g in carry.values())
    held += arrived + sum(x.count for x in stranded)
    if abs(held - total) > (0 if integer else 1e-6 * max(1.0, total)):
        raise AssertionError(f"conservation broken mid-run: {held} accounted vs {total} assigned")


# -- feasibility checks -------------------------------------------------------


class Violation(NamedTuple):
    kind: str
    detail: str


def check_feasibility(fs: FlowState, inst: TransitInstance, assignment: Assignment, tol: float = 1e-6) -> list[Violation]:
    """Audit a flow state against the hard constraints.

    Violation kinds: ``capacity`` (load above train capacity), ``conservation``
    (passengers created or lost: origin/destination totals, through flow,
    transfers, carry-over), ``phantom-wait`` (waiting at a station that is not
    the route's origin or a transfer), ``db-boundary`` (carry-over on a line's
    first train or left behind after its last) and ``boarding`` (more boarded
    than waiting).
    """
    out: list[Violation] = []
    for (t, m), load_ in fs.leg_load().items():
        cap = inst.train_by_key[t].capacity
        if load_ > cap + tol:
            out.append(Violation("capacity", f"train {t} leg {m}: {load_} > {cap}"))

    for key, v in fs.db.items():
        _k, _r, t, _s = key
        if t[1] == 1 and abs(v) > tol:
            out.append(Violation("db-boundary", f"carry-over onto first train {t}: {key}"))

    per_route_f = defaultdict(dict)
    for (k, r, t, m), v in fs.f.items():
        per_route_f[(k, r)][(t, m)] = v

    for k in inst.od_pairs:
        q_tot = sum(assignment.get((k.id, t, r)) for t, r in _all_options(inst, k))
        if abs(q_tot - k.demand) > tol:
            out.append(Violation("conservation", f"od {k.id}: assigned {q_tot} != demand {k.demand}"))
        dep_tot = arr_tot = 0.0
        for rid in k.routes:
            route = inst.route(rid)
            flows = per_route_f.get((k.id, rid), {})
            for i, seg in enumerate(route.segments):
                line = inst.line(seg.line)
                pb, pa = line.position(seg.board), line.position(seg.alight)
                seg_in = seg_out = 0.0
                for tr in inst.trains_by_line[seg.line]:
                    t = tr.key
                    first = flows.get((t, pb), 0.0)
                    seg_in += first
                    for m in range(pb + 1, pa):
                        if abs(flows.get((t, m), 0.0) - flows.get((t, m - 1), 0.0)) > tol:
                            out.append(Violation("conservation", f"through flow changes on {t} at position {m} (route {rid})"))
                    seg_out += flows.get((t, pa - 1), 0.0)
                    gk = (k.id, rid, t, seg.board)
                    if first > fs.g.get(gk, 0.0) + tol:
                        out.append(Violation("boarding", f"{gk}: boarded {first} > waiting {fs.g.get(gk, 0.0)}"))
                    if i == 0:
                        expect = assignment.get((k.id, t, rid)) + fs.db.get(gk, 0.0)
                        if abs(fs.g.get(gk, 0.0) - expect) > tol:
                            out.append(Violation("conservation", f"{gk}: waiting != assigned + carried over"))
                    if tr.index > 1:
                        prev = (k.id, rid, (seg.line, tr.index - 1), seg.board)
                        left = fs.g.get(prev, 0.0) - flows.get(((seg.line, tr.index - 1), pb), 0.0)
                        if abs(left - fs.db.get(gk, 0.0)) > tol:
                            out.append(Violation("conservation", f"{gk}: carry-over != left behind by previous train"))
                    # Onboard on this segment only via boarding at seg.board
                    for m in range(1, pb):
                        if flows.get((t, m), 0.0) > tol:
                            out.append(Violation("conservation", f"flow before boarding station on {t} (route {rid})"))
                last = inst.trains_by_line[seg.line][-1].key
                left = fs.g.get((k.id, rid, last, seg.board), 0.0) - flows.get((last, pb), 0.0)
                if left > tol:
                    out.append(Violation("db-boundary", f"{left} left behind after last train {last} at {seg.board}"))
                if i == 0:
                    dep_tot += seg_in
                else:
                    if abs(seg_in - prev_out) > tol:
                        out.append(Violation("conservation", f"route {rid}: {prev_out} alight at {seg.board}, {seg_in} board"))
                prev_out = seg_out
                if i == len(route.segments) - 1:
                    arr_tot += seg_out
        if abs(dep_tot - k.demand) > tol:
            out.append(Violation("conservation", f"od {k.id}: {dep_tot} departed != demand {k.demand}"))
        if abs(arr_tot - k.demand) > tol:
            out.append(Violation("conservation", f"od {k.id}: {arr_tot} arrived != demand {k.demand}"))

    for (k, r, t, s), v in fs.g.items():
        if abs(v) <= tol:
            continue
        route = inst.route(r)
        boards = {seg.board: seg.line for seg in route.segments}
        if boards.get(s) != t[0]:
            out.append(Violation("phantom-wait", f"{v} waiting at {s} for {t} on route {r}"))
    return out


def _all_options(inst, k):
    for rid in k.routes:
        for t in inst.trains_by_line.get(inst.route(rid).first_line, ()):
            yield t.key, rid
