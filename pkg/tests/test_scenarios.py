import random

import pytest
from hypothesis import given, strategies as st

from transit_so.benchmarks import hk_lite, random_instance, toy_1line, toy_2line
from transit_so.io import dumps_instance
from transit_so.exactso import free_flow_state, solve_exact
from transit_so.loader import Assignment, FlowState
from transit_so.model import ODPair, TopologyError
from transit_so.scenarios import (
    ScenarioError,
    ScenarioSpec,
    apply_scenario,
    compare,
    contribution_per_passenger,
    impacted_passengers,
    link_flows,
    pscir,
    run_matrix,
    scale_demands,
    shift_histogram,
)

from conftest import random_q


# -- apply_scenario -----------------------------------------------------------


def test_identity_scenario_is_unchanged(hk):
    assert dumps_instance(apply_scenario(hk, ScenarioSpec())) == dumps_instance(hk)


def test_sha_tin_central_at_150_percent(hk):
    sc = apply_scenario(hk, ScenarioSpec(demand_scale=150))
    assert sc.od_by_id["1-14"].demand in (8494, 8495)
    # same input, same answer
    assert apply_scenario(hk, ScenarioSpec(demand_scale=150)).od_by_id["1-14"].demand == sc.od_by_id["1-14"].demand


def test_capacity_2600_at_60_percent(hk):
    sc = apply_scenario(hk, ScenarioSpec(capacity_scale=60))
    assert {t.capacity for t in sc.trains} == {1560}


def test_scale_demands_hand_cases():
    assert scale_demands([1, 1, 1], 50) == [1, 1, 0]  # 1.5 -> 2, ties to the earlier OD
    assert scale_demands([3, 7], 100) == [3, 7]
    assert scale_demands([10, 5], 130) == [13, 7]  # 13 + 6.5 = 19.5 -> 20 total


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=30), st.integers(1, 400))
def test_scaled_total_within_rounding(demands, pct):
    out = scale_demands(demands, pct)
    exact = sum(demands) * pct / 100
    assert abs(sum(out) - exact) <= 0.5 + 1e-9
    assert all(abs(o - d * pct / 100) < 1 for o, d in zip(out, demands))


def test_capacity_floor_below_one_is_rejected(toy1):
    with pytest.raises(ScenarioError):
        apply_scenario(toy1, ScenarioSpec(capacity_scale=10))


def test_route_filter(hk_ext):
    k = next(k for k in hk_ext.od_pairs if len(k.routes) > 1)
    sc = apply_scenario(hk_ext, ScenarioSpec(enabled_routes={k.id: k.routes[:1]}))
    assert sc.od_by_id[k.id].routes == k.routes[:1]
    with pytest.raises(ScenarioError):
        apply_scenario(hk_ext, ScenarioSpec(enabled_routes={k.id: ()}))
    with pytest.raises(ScenarioError):
        apply_scenario(hk_ext, ScenarioSpec(enabled_routes={"nope": k.routes}))


def test_nonpositive_scale_rejected():
    with pytest.raises(ScenarioError):
        ScenarioSpec(demand_scale=0)


# -- pscir, impacted, contribution -------------------------------------------


def test_pscir_examples():
    assert pscir(100, 64) == pytest.approx(0.36)
    assert pscir(123.4, 123.4) == 0
    implied_ue = 447_780 / (1 - 0.3635)
    assert implied_ue == pytest.approx(703_503.5, abs=1)
    assert pscir(implied_ue, 447_780) == pytest.approx(0.3635, abs=1e-12)
    with pytest.raises(ValueError):
        pscir(0, 1)


def _two_option_q(a, b):
    return {("k", ("L", 1), "r"): a, ("k", ("L", 2), "r"): b}


@pytest.mark.parametrize("ue,so,want", [((5, 0), (0, 5), 5), ((3, 2), (2, 3), 1), ((4, 1), (4, 1), 0)])
def test_impacted_examples(ue, so, want):
    assert impacted_passengers(_two_option_q(*ue), _two_option_q(*so))["k"] == want


@given(st.integers(0, 10**6))
def test_impacted_is_a_metric(seed):
    inst = random_instance(random.Random(seed))
    rng = random.Random(seed + 1)
    a, b, c = (random_q(inst, rng).q for _ in range(3))
    ab, ba = impacted_passengers(a, b, inst), impacted_passengers(b, a, inst)
    bc, ac = impacted_passengers(b, c, inst), impacted_passengers(a, c, inst)
    for k in inst.od_pairs:
        assert ab[k.id] == ba[k.id]
        assert ac[k.id] <= ab[k.id] + bc[k.id] + 1e-9
        assert 0 <= ab[k.id] <= k.demand
    assert all(v == 0 for v in impacted_passengers(a, a, inst).values())


def test_impacted_rejects_foreign_options(toy1):
    with pytest.raises(ScenarioError):
        impacted_passengers({("A-C", ("L1", 9), "r"): 1}, {}, toy1)


def test_contribution_examples():
    out = contribution_per_passenger({"a": 200, "b": 0, "c": 7}, {"a": 100, "b": 50, "c": 7}, {"a": 10, "b": 10, "c": 0})
    assert out == {"a": 10.0, "b": -5.0, "c": 0.0}


# -- shift histogram ----------------------------------------------------------


def _hist_instance(toy1):
    """toy1 with its trains retimed to depart 474 and 480."""
    trains = tuple(t.__class__(t.line, t.index, s, t.capacity) for t, s in zip(toy1.trains, (474, 480)))
    k = toy1.od_pairs[0]
    return toy1.evolve(trains=trains, od_pairs=(ODPair(k.id, k.origin, k.destination, 5, k.routes),))


def test_shift_five_passengers_six_minutes_earlier(toy1):
    inst = _hist_instance(toy1)
    (k, (t1, r1)), (_, (t2, r2)) = [(kk.id, o) for kk in inst.od_pairs for o in inst.options(kk.id)]
    early, late = (k, t1, r1), (k, t2, r2)
    assert inst.dep(early[1], inst.od_pairs[0].origin) == 474
    h = shift_histogram({late: 5}, {early: 5}, inst)
    assert h.bins() == {-6: 5}
    assert h.share_within(6) == 1.0 and h.share_within(5) == 0.0


def test_identical_assignments_all_in_zero_bin(hk):
    from transit_so.adafw import min_cost_assignment

    q = min_cost_assignment(hk).q
    h = shift_histogram(q, q, hk)
    assert h.bins() == {0: hk.total_demand}
    assert h.total_moved == 0


@given(st.integers(0, 10**6))
def test_moved_mass_equals_impacted(seed):
    inst = random_instance(random.Random(seed))
    rng = random.Random(~seed)
    a, b = random_q(inst, rng).q, random_q(inst, rng).q
    h = shift_histogram(a, b, inst)
    assert h.total_moved == pytest.approx(sum(impacted_passengers(a, b, inst).values()))
    assert h.total_moved + h.unmoved == pytest.approx(inst.total_demand)


# -- link flows ---------------------------------------------------------------


def test_no_flow_flags_every_train(toy2):
    pts = link_flows(FlowState({}, {}, {}), toy2, toy2.lines[0].id, 1)
    assert len(pts) == len(toy2.trains_by_line[toy2.lines[0].id])
    assert all(p.zero and p.passengers == 0 for p in pts)


def test_single_train_hundred_passengers(toy1):
    k = toy1.od_pairs[0]
    inst = toy1.evolve(
        od_pairs=(ODPair(k.id, k.origin, k.destination, 100, k.routes),),
        trains=tuple(t.__class__(t.line, t.index, t.start_time, 1000) for t in toy1.trains),
    )
    t, r = inst.options(k.id)[0]
    fs = free_flow_state(inst, Assignment({(k.id, t, r): 100}, True))
    pts = link_flows(fs, inst, t[0], 1)
    assert [(p.departure, p.passengers) for p in pts if not p.zero] == [(inst.dep(t, k.origin), 100)]


def test_unknown_leg(toy1):
    with pytest.raises(ScenarioError):
        link_flows(FlowState({}, {}, {}), toy1, toy1.lines[0].id, toy1.lines[0].n_stations)
    with pytest.raises(TopologyError):
        link_flows(FlowState({}, {}, {}), toy1, "no-such-line", 1)


# -- compare and run_matrix ---------------------------------------------------


def test_compare_on_toy(toy1):
    from transit_so.adafw import UE, solve

    ue = solve(toy1, UE)
    so = solve_exact(toy1)
    rep = compare(toy1, ue, so)
    assert rep.pscir["exact_so"] == pytest.approx(1 - so.total_cost / ue.total_cost)
    assert sum(rep.impacted.values()) == 1  # 3/0 -> 2/1
    s = rep.summary()
    assert s["impacted_total"] == 1 and s["top_contribution_od"] == toy1.od_pairs[0].id


def test_matrix_single_exact_cell(toy2):
    rows = run_matrix(toy2, [ScenarioSpec()], ["exact-so"])
    assert len(rows) == 1
    assert rows[0]["status"] == "ok" and rows[0]["pscir"] == ""


def test_matrix_records_failures(toy1):
    def boom(inst, solver):
        raise RuntimeError("solver exploded")

    rows = run_matrix(toy1, [ScenarioSpec(), ScenarioSpec(capacity_scale=10)], ["ue", "exact-so"], run=boom)
    assert len(rows) == 4
    assert all(r["status"] == "error" for r in rows)
    assert "exploded" in rows[0]["error"] and "capacity" in rows[2]["error"]


def test_matrix_is_reproducible(toy2):
    specs = [ScenarioSpec(), ScenarioSpec(demand_scale=200)]

    def strip(rows):
        return [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]

    a = run_matrix(toy2, specs, ["ue", "approx-so", "exact-so"])
    b = run_matrix(toy2, specs, ["ue", "approx-so", "exact-so"])
    assert strip(a) == strip(b)
    assert all(r["pscir"] for r in a if r["status"] == "ok")
