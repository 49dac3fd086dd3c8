import math
import random

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import random_q
from transit_so.adafw import (
    APPROX_SO,
    UE,
    OptionCostTable,
    SolverConfig,
    attribute_costs,
    direction,
    free_flow_cost,
    golden_section,
    initial_candidates,
    round_assignment,
    shift,
    solve,
    step_sizes,
    ue_gap,
)
from transit_so.benchmarks import random_instance, uncapacitated
from transit_so.costs import cost_breakdown
from transit_so.exactso import InfeasibleModelError, brute_force_so
from transit_so.loader import Assignment, load
from transit_so.model import ODPair, UnservableOptionError


def _table(avcs, flows=None):
    keys = [("k", ("L", i + 1), "r") for i in range(len(avcs))]
    avc = dict(zip(keys, avcs))
    best = min(keys, key=lambda x: avc[x])
    return OptionCostTable({"k": keys}, avc, dict(avc), {"k": avc[best]}, {"k": best}), keys


# -- step sizes ---------------------------------------------------------------


def test_nonoptimal_average_divides_by_all_options():
    t, keys = _table([10, 12, 18])
    s = step_sizes(t, 1.0)
    # C = (12 + 18) / 3 = 10 = avc*, so no shift
    assert s.od_gap_ratio["k"] == 0


def test_gap_ratio_one_third():
    t, keys = _table([10, 20, 25])  # C = 45 / 3 = 15
    assert step_sizes(t, 1.0).od_gap_ratio["k"] == pytest.approx(1 / 3)


def test_sigma_is_product():
    t, keys = _table([10, 20, 25])
    s = step_sizes(t, 0.6)
    for key in keys:
        assert s.sigma[key] == pytest.approx(0.6 * (1 / 3) * s.option_weight[key])
    assert sum(s.option_weight.values()) == pytest.approx(1.0)
    assert s.option_weight[keys[0]] == pytest.approx(10 / 55)


def test_negative_ratio_is_clamped_and_recorded():
    t, _ = _table([10, 11])  # C = 11 / 2 < 10
    s = step_sizes(t, 1.0)
    assert s.od_gap_ratio["k"] == 0 and s.clamped == ["k"]


def test_no_nonoptimal_options_means_no_shift():
    t, _ = _table([7, 7])
    assert step_sizes(t, 1.0).od_gap_ratio["k"] == 0


def test_targeted_od_moves_only_that_od():
    t, _ = _table([10, 20])
    assert step_sizes(t, 1.0, targeted="k").od_gap_ratio["k"] == 1
    assert step_sizes(t, 1.0, targeted="other").od_gap_ratio["k"] == 0


# -- line search --------------------------------------------------------------


def test_golden_section_quadratic():
    assert golden_section(lambda x: (x - 0.3) ** 2, 0, 1, 1e-4) == pytest.approx(0.3, abs=1e-4)


def test_golden_section_monotone_goes_to_hi():
    assert golden_section(lambda x: -x, 0, 1, 1e-3) == pytest.approx(1, abs=1e-3)


def test_golden_section_constant_returns_midpoint_of_final_interval():
    x = golden_section(lambda x: 1.0, 0, 1, 1e-3)
    assert 0 <= x <= 1


def test_golden_section_handles_infinite_probes():
    f = lambda x: math.inf if x > 0.5 else (x - 0.2) ** 2
    assert golden_section(f, 0, 1, 1e-3) == pytest.approx(0.2, abs=2e-3)


# -- gap and direction --------------------------------------------------------


def test_ue_gap_direct_substitution():
    t, keys = _table([10, 12])
    assert ue_gap(t, Assignment({keys[0]: 5, keys[1]: 5})) == 10
    assert ue_gap(t, Assignment({keys[0]: 10})) == 0


def test_direction_puts_demand_on_best(toy1):
    a = Assignment({("A-B", ("L1", 1), "A-B"): 2, ("A-B", ("L1", 2), "A-B"): 1})
    t = attribute_costs(toy1, a, load(toy1, a).flow_state)
    v = direction(t, a, toy1)
    assert v == {("A-B", ("L1", 1), "A-B"): 3, ("A-B", ("L1", 2), "A-B"): 0}


def test_direction_ties_go_to_lowest_train():
    t, keys = _table([5, 5, 5])
    assert t.best["k"] == keys[0]


# -- option costs ---------------------------------------------------------------


def test_free_flow_costs(toy1, toy2):
    assert free_flow_cost(toy1, "A-B", ("L1", 1), "A-B") == pytest.approx(1.0)  # 10 min, on time
    assert free_flow_cost(toy1, "A-B", ("L1", 2), "A-B") == pytest.approx(1.0 + 2.0)  # 10 min late
    # L1#2 -> X 528, L2#3 leaves 534: 6 min transfer, arrives 544
    c = free_flow_cost(toy2, "A-B", ("L1", 2), "A-X-B/L2")
    assert c == pytest.approx(15 * 0.1 + 6 * 0.3 + 4 * 0.2)
    with pytest.raises(UnservableOptionError):
        free_flow_cost(toy2, "A-B", ("L1", 3), "A-X-B/L2")


def test_queued_passenger_pays_a_headway(toy1):
    a = Assignment({("A-B", ("L1", 1), "A-B"): 3})
    t = attribute_costs(toy1, a, load(toy1, a).flow_state)
    # passengers 1-2 ride train 1 (cost 1); passenger 3 waits 10 min and is 10 min late
    assert t.passenger_costs(("A-B", ("L1", 1), "A-B")) == pytest.approx([1.0, 1.0, 1.0 + 3.0 + 2.0])
    assert t.avc[("A-B", ("L1", 1), "A-B")] == pytest.approx(8 / 3)
    assert t.avc[("A-B", ("L1", 2), "A-B")] == t.avc0[("A-B", ("L1", 2), "A-B")] == pytest.approx(3.0)


@given(st.integers(0, 10**6), st.booleans())
def test_average_costs_price_the_whole_system(seed, integer):
    rng = random.Random(seed)
    inst = random_instance(rng)
    a = random_q(inst, rng, integer)
    fs = load(inst, a).flow_state
    t = attribute_costs(inst, a, fs)
    total = sum(t.avc[key] * v for key, v in a.q.items())
    assert total == pytest.approx(cost_breakdown(fs, inst).total, rel=1e-9, abs=1e-9)
    assert ue_gap(t, a) >= -1e-9
    for k, keys in t.options.items():
        assert t.avc_star[k] == min(t.avc[x] for x in keys)
    assert all(c >= 0 for key in t.pieces for _, c in t.pieces[key])


@given(st.integers(0, 10**6))
def test_zero_gap_iff_used_options_are_best(seed):
    rng = random.Random(seed)
    inst = random_instance(rng)
    a = random_q(inst, rng)
    t = attribute_costs(inst, a, load(inst, a).flow_state)
    used_best = all(
        t.avc[key] <= t.avc_star[key[0]] + 1e-12 for key, v in a.q.items() if v
    )
    assert (ue_gap(t, a) <= 1e-9) == used_best


# -- updates ------------------------------------------------------------------


@given(st.integers(0, 10**6), st.floats(0, 1))
def test_shift_keeps_each_od_on_its_simplex(seed, theta):
    rng = random.Random(seed)
    inst = random_instance(rng)
    a = random_q(inst, rng, integer=False)
    t = attribute_costs(inst, a, load(inst, a).flow_state)
    b = shift(a, t, step_sizes(t, theta))
    for k in inst.od_pairs:
        assert b.od_total(k.id) == pytest.approx(k.demand)
    assert all(v >= -1e-12 for v in b.q.values())


def test_shift_at_vertex_is_fixed_point(toy1):
    a = Assignment({("A-B", ("L1", 1), "A-B"): 3.0}, integer=False)
    t = attribute_costs(toy1, a, load(toy1, a).flow_state)
    assert shift(a, t, step_sizes(t, 0.8)).q == a.q


@given(st.integers(0, 10**6))
def test_rounding_restores_integer_demands(seed):
    rng = random.Random(seed)
    inst = random_instance(rng)
    r = round_assignment(inst, random_q(inst, rng, integer=False))
    assert r.integer
    for k in inst.od_pairs:
        assert r.od_total(k.id) == k.demand
        assert all(float(v).is_integer() for v in r.q.values())


# -- solve ----------------------------------------------------------------------


def _toy1_gap_oracle(q1):
    """Hand-derived gap of toy-1line for q1 on the 8:50 train and 3 - q1 on 9:00.

    Train capacity is 2. Riding 8:50 costs $1; riding 9:00 costs $3 (10 min
    late); a passenger queued off 8:50 onto 9:00 pays $1 + $3 wait + $2 late.
    """
    q2 = 3 - q1
    if q2 > 2:
        return None  # 9:00 train cannot take 3 from the platform: stranded
    c1 = [1.0] * min(q1, 2) + [6.0] * max(0, q1 - 2)
    avc1 = sum(c1) / q1 if q1 else 1.0
    avc2 = 3.0
    star = min(avc1, avc2)
    return q1 * (avc1 - star) + q2 * (avc2 - star)


def test_toy1_ue_matches_exhaustive_scan(toy1):
    gaps = {q1: _toy1_gap_oracle(q1) for q1 in range(4)}
    assert gaps == {0: None, 1: 4.0, 2: 2.0, 3: 0.0}
    ue_set = [q1 for q1, g in gaps.items() if g == 0]
    sol = solve(toy1, UE)
    assert sol.objective == 0
    assert [sol.q.get(("A-B", ("L1", 1), "A-B"), 0)] == ue_set
    loads = sol.flow_state.leg_load()
    assert (loads[(("L1", 1), 1)], loads[(("L1", 2), 1)]) == (2, 1)
    assert sol.total_cost == pytest.approx(8.0)


def test_single_passenger_gets_cheapest_option(toy2):
    inst = uncapacitated(toy2).evolve(
        od_pairs=(ODPair("A-B", "A", "B", 1, toy2.od("A-B").routes),),
        routes=tuple(r for r in toy2.routes if r.od == "A-B"),
    )
    best = min(free_flow_cost(inst, "A-B", t, r) for t, r in inst.options("A-B"))
    for obj in (UE, APPROX_SO):
        sol = solve(inst, obj)
        assert sol.total_cost == pytest.approx(best)
    assert solve(inst, UE).objective == 0


def test_solution_objective_recomputes_from_q(toy2):
    for obj in (UE, APPROX_SO):
        sol = solve(toy2, obj)
        res = load(toy2, sol.assignment)
        assert res.feasible
        total = cost_breakdown(res.flow_state, toy2).total
        assert total == pytest.approx(sol.total_cost)
        if obj == APPROX_SO:
            assert sol.objective == pytest.approx(total)
        else:
            t = attribute_costs(toy2, sol.assignment, res.flow_state)
            assert sol.objective == pytest.approx(ue_gap(t, sol.assignment))


@given(st.integers(0, 10**6))
def test_solve_is_deterministic(seed):
    inst = random_instance(random.Random(seed))
    cfg = SolverConfig(rng_seed=seed % 7)
    a, b = solve(inst, UE, cfg), solve(inst, UE, cfg)
    assert a.q == b.q and a.objective == b.objective


@given(st.integers(0, 10**6))
def test_system_loop_never_gets_worse(seed):
    inst = random_instance(random.Random(seed))
    sol = solve(inst, APPROX_SO)
    accepted = [h["objective"] for h in sol.history if h["phase"] in ("start", "system")]
    assert all(b <= a + 1e-9 for a, b in zip(accepted, accepted[1:]))
    od = [h["objective"] for h in sol.history if h["phase"] in ("round", "od", "sweep")]
    assert all(b < a for a, b in zip(od[1:], od[2:]))


@given(st.integers(0, 10**6))
def test_approx_so_never_beats_exact(seed):
    inst = random_instance(random.Random(seed))
    try:
        exact = brute_force_so(inst)
    except InfeasibleModelError:
        assume(False)
    approx = solve(inst, APPROX_SO)
    assert exact.total_cost <= approx.total_cost + 1e-9


def test_start_candidates_all_load(hk):
    cands = initial_candidates(hk)
    assert [n for n, _ in cands][:1] in (["min-cost"], ["greedy"])
    for _, a in cands:
        assert load(hk, a).feasible


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(golden_section_tol=0.5)
    with pytest.raises(ValueError):
        SolverConfig(max_od_iters=-1)
