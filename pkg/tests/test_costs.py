import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_q
from transit_so.benchmarks import random_instance
from transit_so.costs import (
    FeasibilityError,
    add_flow_states,
    cost_breakdown,
    denied_boarding_cost,
    in_vehicle_cost,
    scale_flow_state,
    schedule_delay_cost,
    transfer_wait_cost,
)
from transit_so.loader import Assignment, FlowState, load


def test_toy1_components(toy1):
    # 2 on the 8:50 train, 1 denied and on the 9:00 train; 10 minutes in-vehicle each
    fs = load(toy1, Assignment({("A-B", ("L1", 1), "A-B"): 3})).flow_state
    cb = cost_breakdown(fs, toy1).per_od["A-B"]
    assert cb.ivcst == pytest.approx(3 * 10 * 6 / 60)
    assert cb.chcst == 0
    assert cb.dbcst == pytest.approx(1 * 10 * 18 / 60)  # one headway of waiting
    # train 1 arrives at 9:00 sharp, train 2 ten minutes late
    assert cb.elcst == pytest.approx(10 * 12 / 60)


def test_toy1_schedule_delay(toy1):
    fs = load(toy1, Assignment({("A-B", ("L1", 1), "A-B"): 1, ("A-B", ("L1", 2), "A-B"): 2})).flow_state
    # 8:50 start arrives 9:00 sharp; 9:00 start arrives 9:10, 10 minutes late
    assert schedule_delay_cost(fs, toy1)["A-B"] == pytest.approx(2 * 10 * 12 / 60)
    assert denied_boarding_cost(fs, toy1)["A-B"] == 0
    assert cost_breakdown(fs, toy1).total == pytest.approx(3 + 4)


def test_transfer_wait(toy2):
    # L1#2 reaches X at 528; next L2 departure from X is #3 at 534: 6 minutes
    q = {
        ("A-B", ("L1", 2), "A-X-B/L2"): 1,
        ("A-B", ("L1", 1), "A-X-B/L1"): 3,
        ("X-B", ("L2", 1), "X-B/L2"): 2,
    }
    fs = load(toy2, Assignment(q)).flow_state
    assert transfer_wait_cost(fs, toy2)["A-B"] == pytest.approx(6 * 18 / 60)
    assert in_vehicle_cost(fs, toy2)["A-B"] == pytest.approx((1 * (5 + 10) + 3 * 12) * 6 / 60)


def test_db_on_first_train_is_rejected(toy1):
    fs = FlowState({}, {}, {("A-B", "A-B", ("L1", 1), "A"): 1})
    with pytest.raises(FeasibilityError):
        denied_boarding_cost(fs, toy1)


def test_rows_round_to_cents(toy1):
    fs = load(toy1, Assignment({("A-B", ("L1", 1), "A-B"): 3})).flow_state
    (row,) = list(cost_breakdown(fs, toy1).rows())
    assert set(row) == {"od", "ivcst", "chcst", "dbcst", "elcst", "total"}
    assert row["total"] == f"{cost_breakdown(fs, toy1).total:.2f}"


@given(st.integers(0, 10**6), st.floats(0.1, 5.0))
def test_costs_are_linear_in_flows(seed, c):
    rng = random.Random(seed)
    inst = random_instance(rng)
    fs = load(inst, random_q(inst, rng)).flow_state
    base = cost_breakdown(fs, inst).total
    assert cost_breakdown(scale_flow_state(fs, c), inst).total == pytest.approx(c * base)
    assert cost_breakdown(add_flow_states(fs, fs), inst).total == pytest.approx(2 * base)
    assert all(v >= 0 for v in cost_breakdown(fs, inst).component_totals().values())
