from __future__ import annotations

from dataclasses import dataclass, field

from .costs import CostBreakdown
from .loader import Assignment, FlowState


@dataclass
class Solution:
    """An assignment together with its loaded network and priced costs.

    ``objective`` is the quantity the producing solver minimised: the UE gap
    for ``ue``, total system cost for ``approx-so`` and ``exact-so``.
    """

    kind: str
    assignment: Assignment
    flow_state: FlowState
    cost_breakdown: CostBreakdown
    objective: float
    iterations: int = 0
    wall_time: float = 0.0
    history: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return self.cost_breakdown.total

    @property
    def q(self):
        return self.assignment.q
