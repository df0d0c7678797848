import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reorch.domain import (
    Deployment,
    Flow,
    LoadState,
    Node,
    ResourceError,
    ResourceVector,
    Scalarization,
    Topology,
    availability_share,
    deployment_cost,
    fits,
    is_feasible,
    load_share,
    locality_indicator,
    node_loads,
    residual_capacity,
    CapacityExceeded,
)

amounts = st.floats(min_value=0, max_value=1e3, allow_nan=False)


@given(amounts, amounts, amounts, amounts)
def test_add_then_subtract_round_trips(a, b, c, d):
    x, y = ResourceVector(a, b), ResourceVector(c, d)
    back = (x + y) - y
    assert back.cpu == pytest.approx(a, abs=1e-9)
    assert back.ram == pytest.approx(b, abs=1e-9)


def test_negative_components_rejected():
    with pytest.raises(ResourceError):
        ResourceVector(-1.0, 0.0)
    with pytest.raises(ResourceError):
        ResourceVector(1.0, 1.0) - ResourceVector(2.0, 0.0)


def test_componentwise_order():
    assert ResourceVector(1, 1) <= ResourceVector(1, 2)
    assert not ResourceVector(2, 1) <= ResourceVector(1, 2)
    assert fits(ResourceVector(1.5, 0.4), np.array([1.5, 0.4]))
    assert not fits(ResourceVector(1.5, 0.4), np.array([1.4, 64]))


def test_scalar_shares():
    assert load_share((6, 1), (8, 64)) == 0.75
    assert load_share((2, 60), (8, 64), Scalarization.DOMINANT) == pytest.approx(60 / 64)
    assert availability_share((2, 8), (8, 64), Scalarization.DOMINANT) == pytest.approx(0.125)


def test_node_cost_matches_cluster():
    with pytest.raises(ValueError):
        Node(0, 0, ResourceVector(8, 64), 1.0)
    with pytest.raises(ValueError):
        Node(0, 1, ResourceVector(8, 64), 0.0)


def test_topology_rejects_bad_latency():
    nodes = (Node(0, 0, ResourceVector(8, 64), 0.0), Node(1, 1, ResourceVector(8, 64), 1.0))
    with pytest.raises(ValueError):
        Topology(2, nodes, [[0, 50], [40, 0]])
    with pytest.raises(ValueError):
        Topology(2, nodes, [[0, 0], [0, 0]])


def test_locality_indicator_across_clusters(tiny):
    topo = tiny.topology
    f = Flow("a1", "m1", "m2", 20.0)
    assert not locality_indicator(f, topo.nodes[0], topo.nodes[1], topo)
    assert locality_indicator(f, topo.nodes[1], topo.nodes[2], topo)
    loose = Flow("a2", "m3", "m4", 100.0)
    assert locality_indicator(loose, topo.nodes[0], topo.nodes[1], topo)


def test_tiny_initial_is_feasible_and_costs_two(tiny):
    assert is_feasible(tiny.initial, tiny, use_new_requests=False)
    assert deployment_cost(tiny.initial, tiny) == 2.0


def test_tiny_residual_on_n1(tiny):
    r = residual_capacity(tiny.initial, tiny.topology.nodes[1], tiny, use_new_requests=False)
    assert (r.cpu, r.ram) == pytest.approx((2.0, 63.2))


def test_three_big_ms_overload_one_node(tiny):
    dep = Deployment({"m1": 1, "m2": 1, "m3": 1})
    report = is_feasible(dep, tiny, use_new_requests=False)
    assert not report
    (v,) = report.capacity_violations
    assert (v.node_id, v.dimension) == (1, "cpu")
    assert v.overload == pytest.approx(1.0)
    with pytest.raises(CapacityExceeded):
        residual_capacity(dep, tiny.topology.nodes[1], tiny, use_new_requests=False)


def test_locality_violation_reported(tiny):
    dep = Deployment({"m1": 0, "m2": 1, "m3": 2, "m4": 2})
    report = is_feasible(dep, tiny, use_new_requests=True)
    assert not report.feasible
    assert len(report.locality_violations) == 1


def test_empty_deployment_costs_nothing(tiny):
    assert deployment_cost(Deployment(), tiny) == 0.0


def test_deployment_is_immutable_value():
    d = Deployment({"m1": 0})
    d2 = d.moved("m1", 2)
    assert d["m1"] == 0 and d2["m1"] == 2
    assert d.without("m1") == Deployment()
    assert hash(Deployment({"a": 1})) == hash(Deployment({"a": 1}))


def test_load_state_coexistence(tiny):
    s = LoadState.initial(tiny)
    assert s.residual[1].tolist() == pytest.approx([2.0, 63.2])
    s2 = s.apply_migrate("m1", 1, tiny.microservices["m1"].request_new)
    # new instance admitted against 2.0, then 3.0 freed
    assert s2.residual[1].tolist() == pytest.approx([3.5, 63.2])
    s3 = s2.apply_retire("m2")
    assert "m2" not in s3.deployment()
    assert s.residual[1][0] == pytest.approx(2.0)


def test_node_loads_new_vs_old(tiny):
    old = node_loads(tiny.initial, tiny, use_new_requests=False)
    new = node_loads(tiny.initial, tiny, use_new_requests=True)
    assert old[1].tolist() == pytest.approx([6.0, 0.8])
    assert new[1].tolist() == pytest.approx([3.0, 0.8])
    assert math.isclose(old.sum(), 12 + 1.6)
