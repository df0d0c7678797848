import math

import pytest

from reorch.domain import Deployment, Node, ResourceVector, Scenario, Topology
from reorch.plan_sim import (
    Action,
    PlanStep,
    PlanStructureError,
    ReschedulePlan,
    cost_bounds,
    disruption_cost,
    min_cover_cost,
    package_result,
    qos_violation,
    Status,
    validate_and_execute,
)

ALL_TO_N0 = ReschedulePlan.migrations(["m1", "m2", "m3", "m4"], {"m1": 0, "m2": 0, "m3": 0, "m4": 0})


def test_tiny_all_to_private_node(tiny):
    trace = validate_and_execute(tiny, ALL_TO_N0)
    assert trace.valid
    assert [round(s[0][0], 6) for s in trace.snapshots] == [8, 6.5, 5, 3.5, 2]
    assert trace.final == Deployment({"m1": 0, "m2": 0, "m3": 0, "m4": 0})
    assert disruption_cost(trace) == 0
    res = package_result(tiny, ALL_TO_N0, Status.FEASIBLE, 0.0)
    assert (res.deployment_cost, res.disruption_cost, res.qos_violation) == (0.0, 0, 0.0)


def test_coexistence_is_checked(coex):
    plan = ReschedulePlan.migrations(["m1"], {"m1": 0})
    trace = validate_and_execute(coex, plan)
    (v,) = trace.violations
    assert (v.slot, v.node_id, v.dimension) == (0, 0, "cpu")
    assert v.overload == pytest.approx(4.0)
    # transient is the residual with both instances present
    assert trace.transients[0][0][0] == pytest.approx(-4.0)


def test_retire_frees_and_disrupts(coex):
    trace = validate_and_execute(coex, ReschedulePlan((PlanStep(0, "m1", Action.RETIRE),)))
    assert trace.valid
    assert disruption_cost(trace) == 1
    assert len(trace.final) == 0


def test_retire_then_create_counts_once(tiny):
    plan = ReschedulePlan((
        PlanStep(0, "m1", Action.RETIRE),
        PlanStep(1, "m1", Action.CREATE, 0),
    ))
    trace = validate_and_execute(tiny, plan, require_complete=False)
    assert trace.valid and trace.final["m1"] == 0
    assert disruption_cost(trace) == 1
    assert trace.terminated == frozenset()


@pytest.mark.parametrize("steps", [
    [PlanStep(1, "m1", Action.MIGRATE, 0)],
    [PlanStep(0, "m1", Action.MIGRATE, 0), PlanStep(1, "m1", Action.MIGRATE, 0)],
    [PlanStep(0, "zz", Action.MIGRATE, 0)],
    [PlanStep(0, "m1", Action.CREATE, 0)],
    [PlanStep(0, "m1", Action.MIGRATE, 7)],
])
def test_structural_errors(tiny, steps):
    with pytest.raises((PlanStructureError, KeyError, ValueError)):
        validate_and_execute(tiny, ReschedulePlan(tuple(steps)), require_complete=False)


def test_non_reschedulable_step_rejected(tiny):
    sc = tiny.with_reschedulable({"m3", "m4"})
    with pytest.raises(PlanStructureError):
        validate_and_execute(sc, ReschedulePlan.migrations(["m1"], {"m1": 0}), require_complete=False)


def test_incomplete_plan_rejected_unless_allowed(tiny):
    plan = ReschedulePlan.migrations(["m1"], {"m1": 0})
    with pytest.raises(PlanStructureError):
        validate_and_execute(tiny, plan)
    assert validate_and_execute(tiny, plan, require_complete=False).valid


def test_step_needs_destination_iff_not_retire():
    with pytest.raises(PlanStructureError):
        PlanStep(0, "m1", Action.MIGRATE)
    with pytest.raises(PlanStructureError):
        PlanStep(0, "m1", Action.RETIRE, 1)


def test_plan_json_round_trip():
    back = ReschedulePlan.from_dict(ALL_TO_N0.to_dict())
    assert back == ALL_TO_N0
    with pytest.raises(PlanStructureError):
        ReschedulePlan.from_dict({"steps": [{"slot": 0}]})


def test_qos_violation_share(tiny):
    assert qos_violation(Deployment({"m1": 0, "m2": 1, "m3": 0, "m4": 0}), tiny) == 1.0
    assert qos_violation(Deployment({"m1": 1, "m2": 2, "m3": 0, "m4": 1}), tiny) == 0.0
    # the 100 ms flow is not constrained, so only one flow counts
    assert len(tiny.constrained_flows) == 1


def test_cost_bounds_tiny(tiny):
    assert tuple(cost_bounds(tiny)) == (0.0, 2.0)


def test_cost_bounds_without_private_node(tiny):
    nodes = tuple(Node(i, 1, n.capacity, 1.0) for i, n in enumerate(tiny.topology.nodes[1:]))
    topo = Topology(2, nodes, [[0.0, 50.0], [50.0, 0.0]])
    initial = Deployment({"m1": 0, "m2": 0, "m3": 1, "m4": 1})
    sc = Scenario(topo, tiny.apps, initial, tiny.reschedulable)
    assert tuple(cost_bounds(sc)) == (1.0, 2.0)


def test_min_cover_cost():
    assert min_cover_cost(0.0, [8, 8], [1, 1]) == 0.0
    assert min_cover_cost(9.0, [8, 8, 8], [3, 1, 2]) == 3.0
    assert math.isinf(min_cover_cost(17.0, [8, 8], [1, 1]))
    # unequal capacities: fractional by cost per unit
    assert min_cover_cost(6.0, [4, 8], [1, 4]) == pytest.approx(1 + 4 * 2 / 8)
