import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micro import micro_scenario
from reorch.baselines import FilterError, ScoringWeights, k8s_score, recreate_baseline, rolling_update_baseline
from reorch.domain import Application, Deployment, Microservice, Node, ResourceVector, Scenario, Topology
from reorch.plan_sim import Action


def _live(sc):
    res = sc.topology.capacity_array.copy()
    for m, n in sc.initial.items():
        r = sc.microservices[m].request_old
        res[n] -= (r.cpu, r.ram)
    return res


def test_score_on_empty_private_node(tiny):
    s = k8s_score(0, "m1", _live(tiny), dict(tiny.initial), tiny, ScoringWeights())
    # fit 100*mean(1.5/8, 0.4/64) = 9.6875, price 100, partner m2 sits in cluster 1
    assert s == pytest.approx(109.6875)


def test_price_term_is_zero_on_most_expensive_node(tiny):
    w = ScoringWeights(0, 1, 0)
    assert k8s_score(1, "m3", _live(tiny), dict(tiny.initial), tiny, w) == 0.0
    assert k8s_score(0, "m3", _live(tiny), dict(tiny.initial), tiny, w) == 100.0


def test_affinity_when_partner_in_cluster(tiny):
    w = ScoringWeights(0, 0, 1)
    assert k8s_score(2, "m1", _live(tiny), dict(tiny.initial), tiny, w) == 100.0


def test_unfiltered_node_raises(tiny):
    res = _live(tiny)
    res[0] = (1.0, 64.0)
    with pytest.raises(FilterError):
        k8s_score(0, "m1", res, dict(tiny.initial), tiny, ScoringWeights())


def test_weights_validation():
    with pytest.raises(ValueError):
        ScoringWeights(0, 0, 0)
    with pytest.raises(ValueError):
        ScoringWeights(-1, 1, 1)
    assert ScoringWeights.parse("2,1,0.5") == ScoringWeights(2, 1, 0.5)


def test_rolling_tiny_golden(tiny):
    # hand trace: m1 ties n1/n2 at 147.8125 -> n1; m2 prefers n2 (147.8125
    # over n1's 138.4375); m3 and m4 score highest on the free node
    res = rolling_update_baseline(tiny)
    assert [(s.ms_id, s.dest) for s in res.plan] == [("m1", 1), ("m2", 2), ("m3", 0), ("m4", 0)]
    assert res.deployment_cost == 2.0
    assert res.disruption_cost == 0 and res.qos_violation == 0.0


def test_recreate_tiny(tiny):
    res = recreate_baseline(tiny)
    assert res.disruption_cost == 4
    assert [s.action for s in res.plan.steps[:4]] == [Action.RETIRE] * 4
    assert dict(res.final) == {"m1": 0, "m2": 0, "m3": 0, "m4": 0}
    assert res.deployment_cost == 0.0


def test_rolling_keeps_stuck_ms_in_place(coex):
    res = rolling_update_baseline(coex)
    assert len(res.plan) == 0 and res.disruption_cost == 0
    assert dict(res.final) == {"m1": 0}


def test_price_dominant_with_huge_private_node():
    big = ResourceVector(1000.0, 1000.0)
    cap = ResourceVector(8.0, 64.0)
    topo = Topology(2, (Node(0, 0, big, 0.0), Node(1, 1, cap, 1.0), Node(2, 1, cap, 1.0)), [[0, 50], [50, 0]])
    ms = tuple(Microservice(f"m{i}", "a", ResourceVector(2.0, 0.3), ResourceVector(1.0, 0.3)) for i in range(6))
    sc = Scenario(topo, (Application("a", ms, ()),), Deployment({m.ms_id: 1 + i % 2 for i, m in enumerate(ms)}),
                  frozenset(m.ms_id for m in ms))
    w = ScoringWeights(0.01, 100, 0)
    assert rolling_update_baseline(sc, w).deployment_cost == 0.0
    assert recreate_baseline(sc, w).deployment_cost == 0.0


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_baseline_contracts(seed):
    sc = micro_scenario(seed)
    roll = rolling_update_baseline(sc)
    assert roll.violations == 0 and roll.disruption_cost == 0
    rec = recreate_baseline(sc)
    assert rec.violations == 0 and rec.disruption_cost == len(sc.reschedulable)
    assert rolling_update_baseline(sc).plan == roll.plan
