"""Instance files, CSV reports and atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Mapping

from .model import CostParams, Line, ODPair, Route, Segment, Station, Train, TransitInstance


class InstanceFormatError(ValueError):
    pass


def instance_to_dict(inst: TransitInstance) -> dict:
    trains = []
    for line in inst.lines:
        ts = inst.trains_by_line.get(line.id, ())
        if not ts:
            continue
        caps = [t.capacity for t in ts]
        trains.append({
            "line": line.id,
            "start_times": [t.start_time for t in ts],
            "capacity": caps[0] if len(set(caps)) == 1 else caps,
        })
    return {
        "name": inst.name,
        "stations": [{"id": s.id, "name": s.name} for s in inst.stations],
        "lines": [
            {"id": l.id, "stations": list(l.stations), "leg_durations": list(l.leg_durations)}
            for l in inst.lines
        ],
        "trains": trains,
        "od_pairs": [
            {"id": k.id, "origin": k.origin, "destination": k.destination, "demand": k.demand, "routes": list(k.routes)}
            for k in inst.od_pairs
        ],
        "routes": [
            {"id": r.id, "od": r.od, "segments": [[s.line, s.board, s.alight] for s in r.segments]}
            for r in inst.routes
        ],
        "cost_params": asdict(inst.cost_params),
    }


def instance_from_dict(data: Mapping) -> TransitInstance:
    try:
        stations = [Station(s["id"], s.get("name", "")) for s in data["stations"]]
        lines = [Line(l["id"], tuple(l["stations"]), tuple(int(x) for x in l["leg_durations"])) for l in data["lines"]]
        trains = []
        for block in data["trains"]:
            starts = block["start_times"]
            cap = block["capacity"]
            caps = cap if isinstance(cap, list) else [cap] * len(starts)
            if len(caps) != len(starts):
                raise InstanceFormatError(f"line {block['line']}: {len(caps)} capacities for {len(starts)} trains")
            for i, (st, c) in enumerate(zip(starts, caps), start=1):
                trains.append(Train(block["line"], i, int(st), int(c)))
        routes = [
            Route(r["id"], r["od"], tuple(Segment(*seg) for seg in r["segments"])) for r in data["routes"]
        ]
        ods = [
            ODPair(k["id"], k["origin"], k["destination"], int(k["demand"]), tuple(k["routes"]))
            for k in data["od_pairs"]
        ]
        cp = CostParams(**data.get("cost_params", {}))
    except (KeyError, TypeError) as exc:
        raise InstanceFormatError(f"malformed instance document: {exc!r}") from exc
    return TransitInstance(
        tuple(stations), tuple(lines), tuple(trains), tuple(ods), tuple(routes), cp, name=data.get("name", "")
    )


def dumps_instance(inst: TransitInstance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, indent=2) + "\n"


def read_instance(path: str | os.PathLike, demand_csv: str | os.PathLike | None = None) -> TransitInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc})") from exc
    inst = instance_from_dict(data)
    if demand_csv is not None:
        inst = with_demand_csv(inst, demand_csv)
    return inst


def with_demand_csv(inst: TransitInstance, path) -> TransitInstance:
    """Replace OD demands from ``origin,destination,count`` rows."""
    counts: dict[tuple[str, str], int] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["origin"].strip(), row["destination"].strip())
            counts[key] = counts.get(key, 0) + int(row["count"])
    ods = []
    for k in inst.od_pairs:
        dem = counts.pop((k.origin, k.destination), 0)
        ods.append(ODPair(k.id, k.origin, k.destination, dem, k.routes))
    if counts:
        raise InstanceFormatError(f"demand rows without a matching OD pair: {sorted(counts)}")
    return inst.evolve(od_pairs=tuple(ods))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_instance(inst: TransitInstance, path) -> None:
    atomic_write_text(path, dumps_instance(inst))


def csv_text(rows: Iterable[Mapping], fieldnames: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path, rows: Iterable[Mapping], fieldnames: list[str]) -> None:
    atomic_write_text(path, csv_text(rows, fieldnames))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def assignment_rows(q: Mapping) -> list[dict]:
    rows = []
    for (k, t, r), v in sorted(q.items(), key=lambda x: (x[0][0], x[0][1][0], x[0][1][1], x[0][2])):
        if v:
            rows.append({"od": k, "train": f"{t[0]}#{t[1]}", "route": r, "passengers": _num(v)})
    return rows


def _num(v):
    return int(v) if float(v).is_integer() else round(float(v), 6)


EVENT_FIELDS = ["time", "train", "station", "boarded", "denied", "alighted", "onboard_after"]
ASSIGNMENT_FIELDS = ["od", "train", "route", "passengers"]
OD_COST_FIELDS = ["od", "ivcst", "chcst", "dbcst", "elcst", "total"]
