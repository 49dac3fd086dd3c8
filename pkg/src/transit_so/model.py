"""Network, timetable, demand and route data model.

Times are integer minutes after midnight. Lines are directed, so a
bidirectional corridor is modelled as two lines. Trains are identified by
``(line_id, index_on_line)`` with a 1-based index.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional

TrainKey = tuple[str, int]
OptionKey = tuple[str, TrainKey, str]  # (od id, first train, route id)


class TopologyError(ValueError):
    """A station/line/route reference does not exist where it is required."""


class UnservableOptionError(ValueError):
    """A (train, route) option has no connection chain to the destination."""


@dataclass(frozen=True)
class Station:
    id: str
    name: str = ""


@dataclass(frozen=True)
class Line:
    id: str
    stations: tuple[str, ...]
    leg_durations: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "leg_durations", tuple(self.leg_durations))

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        # offsets[m-1] = travel time from the first station to position m
        out = [0]
        for d in self.leg_durations:
            out.append(out[-1] + d)
        return tuple(out)

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {s: i + 1 for i, s in enumerate(self.stations)}

    def position(self, station: str) -> int:
        """1-based position of ``station`` on this line."""
        try:
            return self._positions[station]
        except KeyError:
            raise TopologyError(f"station {station!r} is not on line {self.id!r}") from None

    def has_station(self, station: str) -> bool:
        return station in self._positions

    def leg_duration(self, m: int) -> int:
        """Duration of leg ``m`` (between positions m and m+1)."""
        return self.leg_durations[m - 1]


@dataclass(frozen=True)
class Train:
    line: str
    index: int
    start_time: int
    capacity: int

    @property
    def key(self) -> TrainKey:
        return (self.line, self.index)


@dataclass(frozen=True)
class Segment:
    line: str
    board: str
    alight: str


@dataclass(frozen=True)
class Route:
    id: str
    od: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)

    @property
    def first_line(self) -> str:
        return self.segments[0].line

    @property
    def last_line(self) -> str:
        return self.segments[-1].line

    @property
    def label(self) -> str:
        names = [self.segments[0].board] + [s.alight for s in self.segments]
        return "-".join(names)


@dataclass(frozen=True)
class ODPair:
    id: str
    origin: str
    destination: str
    demand: int
    routes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(self.routes))


@dataclass(frozen=True)
class CostParams:
    """Generalised cost weights in $/hour, named by role.

    Waiting time is weighted three times in-vehicle time by default.
    """

    in_vehicle_rate: float = 6.0
    wait_rate: float = 18.0
    early_rate: float = 5.0
    late_rate: float = 12.0
    target_arrival: int = 540

    @property
    def in_vehicle_per_min(self) -> float:
        return self.in_vehicle_rate / 60.0

    @property
    def wait_per_min(self) -> float:
        return self.wait_rate / 60.0

    def schedule_delay(self, arrival: int) -> float:
        """$ per passenger arriving at ``arrival``."""
        early = max(0, self.target_arrival - arrival)
        late = max(0, arrival - self.target_arrival)
        return (self.early_rate * early + self.late_rate * late) / 60.0


@dataclass(frozen=True)
class Leg:
    """One traversed leg of one train on an option's journey."""

    train: TrainKey
    m: int  # leg index on the train's line


@dataclass(frozen=True)
class Traversal:
    """Free-flow journey of an option: one boarded train per route segment."""

    trains: tuple[TrainKey, ...]
    departure: int  # at origin
    arrival: int  # at destination
    in_vehicle: int  # minutes
    transfer_wait: int  # minutes


@dataclass(frozen=True, eq=False)
class TransitInstance:
    stations: tuple[Station, ...]
    lines: tuple[Line, ...]
    trains: tuple[Train, ...]
    od_pairs: tuple[ODPair, ...]
    routes: tuple[Route, ...]
    cost_params: CostParams = field(default_factory=CostParams)
    name: str = ""

    def __post_init__(self):
        for f in ("stations", "lines", "trains", "od_pairs", "routes"):
            object.__setattr__(self, f, tuple(getattr(self, f)))

    # -- lookups ---------------------------------------------------------
    @cached_property
    def line_by_id(self) -> dict[str, Line]:
        return {l.id: l for l in self.lines}

    @cached_property
    def route_by_id(self) -> dict[str, Route]:
        return {r.id: r for r in self.routes}

    @cached_property
    def od_by_id(self) -> dict[str, ODPair]:
        return {k.id: k for k in self.od_pairs}

    @cached_property
    def train_by_key(self) -> dict[TrainKey, Train]:
        return {t.key: t for t in self.trains}

    @cached_property
    def trains_by_line(self) -> dict[str, tuple[Train, ...]]:
        out: dict[str, list[Train]] = {l.id: [] for l in self.lines}
        for t in self.trains:
            out.setdefault(t.line, []).append(t)
        return {l: tuple(sorted(ts, key=lambda t: t.index)) for l, ts in out.items()}

    def train(self, key: TrainKey) -> Train:
        return self.train_by_key[key]

    def line(self, line_id: str) -> Line:
        try:
            return self.line_by_id[line_id]
        except KeyError:
            raise TopologyError(f"unknown line {line_id!r}") from None

    def route(self, route_id: str) -> Route:
        return self.route_by_id[route_id]

    def od(self, od_id: str) -> ODPair:
        return self.od_by_id[od_id]

    @property
    def total_demand(self) -> int:
        return sum(k.demand for k in self.od_pairs)

    # -- timetable -------------------------------------------------------
    def dep(self, train: TrainKey, station: str) -> int:
        """Departure (= arrival) time of ``train`` at ``station``."""
        t = self.train_by_key[train]
        line = self.line(t.line)
        return departure_time(line, t, line.position(station))

    arr = dep

    def previous_start(self, train: TrainKey) -> Optional[int]:
        line, n = train
        if n <= 1:
            return None
        return self.train_by_key[(line, n - 1)].start_time

    @cached_property
    def _departures(self) -> dict[tuple[str, str], tuple[list[int], list[Train]]]:
        out = {}
        for line in self.lines:
            trains = self.trains_by_line.get(line.id, ())
            for m, s in enumerate(line.stations, start=1):
                times = [departure_time(line, t, m) for t in trains]
                out[(line.id, s)] = (times, list(trains))
        return out

    def first_departure(self, station: str, line_id: str, time: int) -> Optional[Train]:
        """Earliest train on ``line_id`` leaving ``station`` at or after ``time``."""
        line = self.line(line_id)
        if not line.has_station(station):
            raise TopologyError(f"station {station!r} is not on line {line_id!r}")
        times, trains = self._departures[(line_id, station)]
        i = bisect.bisect_left(times, time)
        return trains[i] if i < len(trains) else None

    def next_connection(self, station: str, arriving: TrainKey, target_line: str) -> Optional[Train]:
        """First train on ``target_line`` catchable after ``arriving`` reaches ``station``.

        A same-minute departure is catchable.
        """
        return self.first_departure(station, target_line, self.arr(arriving, station))

    # -- options ---------------------------------------------------------
    def traverse(self, route_id: str, first_train: TrainKey) -> Optional[Traversal]:
        """Free-flow journey boarding ``first_train`` at the origin, or None if it dies."""
        key = (route_id, first_train)
        if key in self._traversals:
            return self._traversals[key]
        return self._traverse(route_id, first_train)

    def _traverse(self, route_id: str, first_train: TrainKey) -> Optional[Traversal]:
        route = self.route(route_id)
        seg0 = route.segments[0]
        if first_train[0] != seg0.line:
            raise TopologyError(f"train {first_train} is not on route {route_id!r}'s first line")
        trains = [first_train]
        departure = self.dep(first_train, seg0.board)
        ivt = 0
        wait = 0
        cur = first_train
        for i, seg in enumerate(route.segments):
            if i > 0:
                nxt = self.next_connection(seg.board, cur, seg.line)
                if nxt is None:
                    return None
                wait += self.dep(nxt.key, seg.board) - self.arr(cur, seg.board)
                cur = nxt.key
                trains.append(cur)
            ivt += self.arr(cur, seg.alight) - self.dep(cur, seg.board)
        return Traversal(tuple(trains), departure, self.arr(cur, route.segments[-1].alight), ivt, wait)

    @cached_property
    def _traversals(self) -> dict[tuple[str, TrainKey], Optional[Traversal]]:
        out = {}
        for r in self.routes:
            for t in self.trains_by_line.get(r.first_line, ()):
                out[(r.id, t.key)] = self._traverse(r.id, t.key)
        return out

    def options(self, od_id: str) -> list[tuple[TrainKey, str]]:
        """Servable (train, route) options of an OD.

        Ordered by train index, then by the route's position in the OD's list,
        which is also the tie-break order used throughout.
        """
        return self._options[od_id]

    @cached_property
    def _options(self) -> dict[str, list[tuple[TrainKey, str]]]:
        out = {}
        for k in self.od_pairs:
            opts = []
            for ri, rid in enumerate(k.routes):
                for t in self.trains_by_line.get(self.route(rid).first_line, ()):
                    if self._traversals.get((rid, t.key)) is not None:
                        opts.append((t.index, ri, (t.key, rid)))
            opts.sort(key=lambda x: (x[0], x[1]))
            out[k.id] = [o for _, _, o in opts]
        return out

    def option_keys(self) -> list[OptionKey]:
        return [(k.id, t, r) for k in self.od_pairs for t, r in self.options(k.id)]

    # -- derived copies --------------------------------------------------
    def evolve(self, **changes) -> "TransitInstance":
        return replace(self, **changes)


def departure_time(line: Line, train: Train, m: int) -> int:
    """Time ``train`` leaves (and reaches) the station at 1-based position ``m``."""
    if not 1 <= m <= line.n_stations:
        raise IndexError(f"position {m} out of range for line {line.id!r} ({line.n_stations} stations)")
    return train.start_time + line.offsets[m - 1]


# -- validation ---------------------------------------------------------------


def validate_instance(inst: TransitInstance) -> list[str]:
    """Return human-readable invariant violations (empty if the instance is valid)."""
    out: list[str] = []
    seen: set[str] = set()
    for s in inst.stations:
        if s.id in seen:
            out.append(f"station {s.id}: duplicate station id")
        seen.add(s.id)

    line_ids: set[str] = set()
    for l in inst.lines:
        if l.id in line_ids:
            out.append(f"line {l.id}: duplicate line id")
        line_ids.add(l.id)
        if len(l.stations) < 2:
            out.append(f"line {l.id}: fewer than two stations")
        if len(set(l.stations)) != len(l.stations):
            out.append(f"line {l.id}: repeated station")
        for s in l.stations:
            if s not in seen:
                out.append(f"line {l.id}: unknown station {s}")
        if len(l.leg_durations) != len(l.stations) - 1:
            out.append(f"line {l.id}: expected {len(l.stations) - 1} leg durations, got {len(l.leg_durations)}")
        if any(d <= 0 for d in l.leg_durations):
            out.append(f"line {l.id}: nonpositive leg duration")

    by_line: dict[str, list[Train]] = {}
    for t in inst.trains:
        if t.line not in line_ids:
            out.append(f"train {t.line}#{t.index}: unknown line")
        if t.capacity <= 0:
            out.append(f"train {t.line}#{t.index}: nonpositive capacity")
        by_line.setdefault(t.line, []).append(t)
    for lid, ts in by_line.items():
        ts = sorted(ts, key=lambda t: t.index)
        if [t.index for t in ts] != list(range(1, len(ts) + 1)):
            out.append(f"line {lid}: train indices are not 1..n")
        for a, b in zip(ts, ts[1:]):
            if b.start_time <= a.start_time:
                out.append(f"train {lid}#{b.index}: start time not after train #{a.index} (FIFO order)")

    route_ids = {r.id for r in inst.routes}
    od_ids = {k.id for k in inst.od_pairs}
    for r in inst.routes:
        out.extend(_route_violations(inst, r, line_ids, seen, by_line))
        if r.od not in od_ids:
            out.append(f"route {r.id}: unknown OD {r.od}")

    for k in inst.od_pairs:
        if k.origin == k.destination:
            out.append(f"od {k.id}: origin equals destination")
        if k.demand < 0:
            out.append(f"od {k.id}: negative demand")
        if not k.routes:
            out.append(f"od {k.id}: no routes")
        for rid in k.routes:
            if rid not in route_ids:
                out.append(f"od {k.id}: unknown route {rid}")
                continue
            r = next(x for x in inst.routes if x.id == rid)
            if r.segments and (r.segments[0].board != k.origin or r.segments[-1].alight != k.destination):
                out.append(f"od {k.id}: route {rid} does not run origin to destination")
    return out


def _route_violations(inst, r: Route, line_ids, station_ids, by_line) -> Iterable[str]:
    if not r.segments:
        yield f"route {r.id}: no segments"
        return
    visited: list[str] = []
    for i, seg in enumerate(r.segments):
        if seg.line not in line_ids:
            yield f"route {r.id}: unknown line {seg.line}"
            continue
        line = inst.line_by_id[seg.line]
        if not (line.has_station(seg.board) and line.has_station(seg.alight)):
            yield f"route {r.id}: segment {i} stations not on line {seg.line}"
            continue
        if line.position(seg.board) >= line.position(seg.alight):
            yield f"route {r.id}: segment {i} runs against line {seg.line} direction"
        if i > 0:
            prev = r.segments[i - 1]
            if prev.alight != seg.board:
                yield f"route {r.id}: route discontinuity between segments {i - 1} and {i}"
        if not by_line.get(seg.line):
            yield f"route {r.id}: no train serves line {seg.line}"
        visited.extend([seg.board] if i == 0 else [])
        visited.append(seg.alight)
    if len(set(visited)) != len(visited):
        yield f"route {r.id}: cycle (station repeated)"
