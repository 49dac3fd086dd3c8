"""Bundled instances: the synthetic ``hk-lite`` network, oracle-sized toys, and
a random tiny-instance generator used by the property and oracle suites.

hk-lite follows the published station subset, OD matrix and train counts of
the Hong Kong MTR case study, but the timetable is synthetic: the real
schedules were never released. Uniform headways are fitted to each line's
train count over the 5:50-10:00 window. Dollar totals are therefore only
directionally comparable to published figures.
"""

from __future__ import annotations

import random
from typing import Optional

from .model import CostParams, Line, ODPair, Route, Segment, Station, Train, TransitInstance

# Numbered stations follow the case-study map; the rest are intermediate stops.
HK_STATIONS = {
    "sha_tin": ("Sha Tin", 1),
    "cheung_sha_wan": ("Cheung Sha Wan", 2),
    "choi_hung": ("Choi Hung", 3),
    "che_kung_temple": ("Che Kung Temple", 4),
    "tai_wai": ("Tai Wai", 5),
    "kowloon_tong": ("Kowloon Tong", 6),
    "hung_hom": ("Hung Hom", 7),
    "admiralty": ("Admiralty", 8),
    "prince_edward": ("Prince Edward", 9),
    "yau_ma_tei": ("Yau Ma Tei", 10),
    "diamond_hill": ("Diamond Hill", 11),
    "ho_man_tin": ("Ho Man Tin", 12),
    "quarry_bay": ("Quarry Bay", 13),
    "central": ("Central", 14),
    "whampoa": ("Whampoa", 15),
    "mong_kok_east": ("Mong Kok East", None),
    "exhibition_centre": ("Exhibition Centre", None),
    "sham_shui_po": ("Sham Shui Po", None),
    "mong_kok": ("Mong Kok", None),
    "jordan": ("Jordan", None),
    "tsim_sha_tsui": ("Tsim Sha Tsui", None),
    "hin_keng": ("Hin Keng", None),
    "kai_tak": ("Kai Tak", None),
    "sung_wong_toi": ("Sung Wong Toi", None),
    "to_kwa_wan": ("To Kwa Wan", None),
    "wong_tai_sin": ("Wong Tai Sin", None),
    "lok_fu": ("Lok Fu", None),
    "shek_kip_mei": ("Shek Kip Mei", None),
    "wan_chai": ("Wan Chai", None),
    "causeway_bay": ("Causeway Bay", None),
    "tin_hau": ("Tin Hau", None),
    "fortress_hill": ("Fortress Hill", None),
    "north_point": ("North Point", None),
}
HK_NUMBER = {num: sid for sid, (_, num) in HK_STATIONS.items() if num is not None}

# (line, [(station, minutes to next)...], trains, first start offset in minutes)
HK_LINES = {
    "EAL": (
        ["sha_tin", "tai_wai", "kowloon_tong", "mong_kok_east", "hung_hom", "exhibition_centre", "admiralty"],
        [4, 5, 4, 4, 4, 3],
        26,
        0,
    ),
    "KTL": (
        ["choi_hung", "diamond_hill", "wong_tai_sin", "lok_fu", "kowloon_tong", "shek_kip_mei",
         "prince_edward", "mong_kok", "yau_ma_tei", "ho_man_tin", "whampoa"],
        [2, 2, 2, 2, 2, 2, 2, 2, 3, 2],
        26,
        0,
    ),
    "TML": (
        ["che_kung_temple", "tai_wai", "hin_keng", "diamond_hill", "kai_tak", "sung_wong_toi",
         "to_kwa_wan", "ho_man_tin", "hung_hom"],
        [3, 3, 3, 2, 2, 2, 2, 2],
        16,
        0,
    ),
    "ISL": (
        ["admiralty", "wan_chai", "causeway_bay", "tin_hau", "fortress_hill", "north_point", "quarry_bay"],
        [2, 2, 2, 2, 2, 2],
        35,
        20,
    ),
    "TWL": (
        ["cheung_sha_wan", "sham_shui_po", "prince_edward", "mong_kok", "yau_ma_tei", "jordan",
         "tsim_sha_tsui", "admiralty", "central"],
        [2, 2, 2, 2, 2, 2, 3, 2],
        17,
        0,
    ),
}

WINDOW = (350, 600)  # 5:50 to 10:00
HK_CAPACITY = 2600

# (origin number, destination number): demand, base routes, additional routes
HK_OD = {
    (1, 13): (5356, ["1-8-13"], ["1-6-9-8-13"]),
    (1, 14): (5663, ["1-8-14", "1-6-9-14"], ["1-5-11-9-14"]),
    (1, 15): (1892, ["1-6-15", "1-5-12-15"], ["1-5-11-15"]),
    (2, 13): (6116, ["2-8-13"], ["2-9-12-7-8-13"]),
    (2, 14): (4073, ["2-14"], []),
    (2, 15): (2049, ["2-9-15"], ["2-10-15"]),
    (3, 13): (14967, ["3-11-7-8-13", "3-9-8-13"], ["3-6-8-13"]),
    (3, 14): (5852, ["3-9-14"], ["3-6-8-14", "3-11-7-8-14"]),
    (3, 15): (2525, ["3-15"], []),
    (4, 13): (1727, ["4-7-8-13", "4-11-9-8-13"], ["4-5-8-13"]),
    (4, 14): (1848, ["4-11-9-14", "4-7-8-14"], ["4-5-8-14"]),
    (4, 15): (649, ["4-12-15", "4-11-15"], ["4-5-6-15"]),
}


def _uniform_starts(n: int, first: int, last: int) -> list[int]:
    if n == 1:
        return [first]
    return [first + round(i * (last - first) / (n - 1)) for i in range(n)]


def _segments_from_path(path: list[str], lines: dict[str, Line]) -> list[Segment]:
    # Each consecutive pair of named stations is ridden on the unique line
    # serving both in that order.
    segs = []
    for a, b in zip(path, path[1:]):
        cands = [
            l.id for l in lines.values()
            if l.has_station(a) and l.has_station(b) and l.position(a) < l.position(b)
        ]
        if len(cands) != 1:
            raise ValueError(f"no unique line from {a} to {b}: {cands}")
        segs.append(Segment(cands[0], a, b))
    return segs


def hk_lite(extended_routes: bool = False, capacity: int = HK_CAPACITY) -> TransitInstance:
    """Five-line, twelve-OD benchmark (52,717 passengers)."""
    stations = [Station(sid, name) for sid, (name, _) in HK_STATIONS.items()]
    lines = {}
    trains = []
    for lid, (stops, legs, n, offset) in HK_LINES.items():
        lines[lid] = Line(lid, tuple(stops), tuple(legs))
        for i, start in enumerate(_uniform_starts(n, WINDOW[0] + offset, WINDOW[1] + offset), start=1):
            trains.append(Train(lid, i, start, capacity))
    routes = []
    ods = []
    for (o, d), (demand, base, extra) in HK_OD.items():
        kid = f"{o}-{d}"
        rids = []
        for label in base + (extra if extended_routes else []):
            path = [HK_NUMBER[int(x)] for x in label.split("-")]
            routes.append(Route(label, kid, tuple(_segments_from_path(path, lines))))
            rids.append(label)
        ods.append(ODPair(kid, HK_NUMBER[o], HK_NUMBER[d], demand, tuple(rids)))
    return TransitInstance(
        tuple(stations), tuple(lines.values()), tuple(trains), tuple(ods), tuple(routes),
        CostParams(), name="hk-lite-extended" if extended_routes else "hk-lite",
    )


def toy_1line() -> TransitInstance:
    """A -> B, 10 minutes; two cap-2 trains at 8:50 and 9:00; 3 passengers."""
    return TransitInstance(
        (Station("A"), Station("B")),
        (Line("L1", ("A", "B"), (10,)),),
        (Train("L1", 1, 530, 2), Train("L1", 2, 540, 2)),
        (ODPair("A-B", "A", "B", 3, ("A-B",)),),
        (Route("A-B", "A-B", (Segment("L1", "A", "B"),)),),
        CostParams(),
        name="toy-1line",
    )


def toy_2line() -> TransitInstance:
    """Two lines meeting at X; one OD with a direct and a transfer route.

    L1: A -5- X -7- B, L2: X -4- C -6- B. OD A->B (4 passengers) may ride L1
    straight through or change at X onto L2. A second OD X->B (2 passengers)
    competes for both lines.
    """
    l1 = Line("L1", ("A", "X", "B"), (5, 7))
    l2 = Line("L2", ("X", "C", "B"), (4, 6))
    trains = (
        Train("L1", 1, 515, 3), Train("L1", 2, 523, 3), Train("L1", 3, 531, 3),
        Train("L2", 1, 520, 2), Train("L2", 2, 526, 2), Train("L2", 3, 534, 4),
    )
    routes = (
        Route("A-X-B/L1", "A-B", (Segment("L1", "A", "B"),)),
        Route("A-X-B/L2", "A-B", (Segment("L1", "A", "X"), Segment("L2", "X", "B"))),
        Route("X-B/L1", "X-B", (Segment("L1", "X", "B"),)),
        Route("X-B/L2", "X-B", (Segment("L2", "X", "B"),)),
    )
    ods = (
        ODPair("A-B", "A", "B", 4, ("A-X-B/L1", "A-X-B/L2")),
        ODPair("X-B", "X", "B", 2, ("X-B/L1", "X-B/L2")),
    )
    return TransitInstance(
        tuple(Station(s) for s in ("A", "X", "B", "C")), (l1, l2), trains, ods, routes,
        CostParams(), name="toy-2line",
    )


BENCHMARKS = {"hk-lite": hk_lite, "hk-lite-extended": lambda: hk_lite(True), "toy-1line": toy_1line, "toy-2line": toy_2line}


def load_benchmark(name: str) -> TransitInstance:
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None


def random_instance(
    rng: random.Random,
    *,
    max_lines: int = 2,
    max_trains: int = 3,
    max_stations: int = 4,
    max_demand: int = 6,
    closed: bool = True,
    capacity_range: tuple[int, int] = (1, 4),
    rejoin: float = 0.5,
) -> TransitInstance:
    """Tiny random network of one or two lines sharing a transfer station.

    With ``closed=True`` the last train on every line is large enough for all
    demand and the second line's last train leaves the transfer station after
    every first-line arrival there, so no loading can strand passengers.
    """
    n_lines = rng.randint(1, max_lines)
    n1 = rng.randint(2, max_stations)
    l1_st = [f"a{i}" for i in range(n1)]
    lines = [Line("L1", tuple(l1_st), tuple(rng.randint(1, 6) for _ in range(n1 - 1)))]
    transfer: Optional[str] = None
    if n_lines == 2:
        # L2 starts at a transfer station somewhere on L1 and runs on to its
        # own stops; sometimes it rejoins L1's terminal, giving ODs a choice
        # between riding through and changing lines.
        xi = rng.randint(0, n1 - 1)
        transfer = l1_st[xi]
        n2 = rng.randint(2, max_stations)
        l2_st = [transfer] + [f"b{i}" for i in range(1, n2)]
        if n2 >= 3 and xi < n1 - 1 and rng.random() < rejoin:
            l2_st[-1] = l1_st[-1]
        lines.append(Line("L2", tuple(l2_st), tuple(rng.randint(1, 6) for _ in range(n2 - 1))))

    total_demand = rng.randint(1, max_demand)
    trains = []
    for line in lines:
        nt = rng.randint(1, max_trains)
        t0 = 500 + rng.randint(0, 20)
        starts = [t0]
        for _ in range(nt - 1):
            starts.append(starts[-1] + rng.randint(2, 12))
        if closed and line.id == "L2" and transfer is not None:
            l1 = lines[0]
            latest = max(t.start_time for t in trains if t.line == "L1") + l1.offsets[l1.position(transfer) - 1]
            if starts[-1] < latest:
                starts[-1] = latest + rng.randint(0, 3)
                starts = sorted(set(starts))
                for i in range(1, len(starts)):
                    if starts[i] <= starts[i - 1]:
                        starts[i] = starts[i - 1] + 1
        for i, st in enumerate(starts, start=1):
            cap = rng.randint(*capacity_range)
            if closed and i == len(starts):
                cap = max(cap, total_demand)
            trains.append(Train(line.id, i, st, cap))

    # Candidate ODs and their routes.
    cands: dict[tuple[str, str], list[list[Segment]]] = {}
    for line in lines:
        st = line.stations
        for i in range(len(st)):
            for j in range(i + 1, len(st)):
                cands.setdefault((st[i], st[j]), []).append([Segment(line.id, st[i], st[j])])
    if transfer is not None:
        l1, l2 = lines
        xi = l1.position(transfer)
        for i in range(xi - 1):
            for j in range(1, l2.n_stations):
                o, d = l1.stations[i], l2.stations[j]
                cands.setdefault((o, d), []).append(
                    [Segment("L1", o, transfer), Segment("L2", transfer, d)]
                )
    keys = sorted(cands)
    n_od = rng.randint(1, min(3, len(keys), total_demand))
    chosen = rng.sample(keys, n_od)
    # Split demand over chosen ODs, each at least 1.
    cuts = sorted(rng.sample(range(1, total_demand), n_od - 1)) if n_od > 1 else []
    parts = [b - a for a, b in zip([0] + cuts, cuts + [total_demand])]
    ods, routes = [], []
    for (o, d), dem in zip(sorted(chosen), parts):
        kid = f"{o}-{d}"
        rids = []
        for ri, segs in enumerate(cands[(o, d)]):
            rid = f"{kid}/r{ri}"
            routes.append(Route(rid, kid, tuple(segs)))
            rids.append(rid)
        ods.append(ODPair(kid, o, d, dem, tuple(rids)))
    stations = sorted({s for l in lines for s in l.stations})
    return TransitInstance(
        tuple(Station(s) for s in stations), tuple(lines), tuple(trains), tuple(ods), tuple(routes),
        CostParams(), name="random",
    )


def uncapacitated(inst: TransitInstance, capacity: int = 10**9) -> TransitInstance:
    """Copy of ``inst`` with every train effectively unlimited."""
    return inst.evolve(trains=tuple(Train(t.line, t.index, t.start_time, capacity) for t in inst.trains))
