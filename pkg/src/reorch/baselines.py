"""Kubernetes-style scheduler emulation under Rolling Update and Recreate.

Scoring is a weighted sum of three plugin-like terms: a most-allocated fit
score, a price score, and a soft affinity towards the cluster holding the
ms's latency-constrained partners. Filtering is component-wise on cpu and
ram against the live residuals.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from .domain import Scenario, fits
from .plan_sim import Action, PlanStep, ReschedulePlan, SolveResult, Status, package_result


class FilterError(ValueError):
    """Raised when scoring a node that cannot host the microservice."""


@dataclass(frozen=True)
class ScoringWeights:
    w_fit: float = 1.0
    w_price: float = 1.0
    w_affinity: float = 1.0

    def __post_init__(self):
        ws = (self.w_fit, self.w_price, self.w_affinity)
        if any(w < 0 for w in ws):
            raise ValueError("scoring weights must be non-negative")
        if not any(w > 0 for w in ws):
            raise ValueError("at least one scoring weight must be positive")

    @classmethod
    def parse(cls, text: str) -> ScoringWeights:
        """``"fit,price,aff"``, e.g. ``"1,1,1"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))


class _Live:
    """Residuals and placement while a baseline builds its plan."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.caps = sc.topology.capacity_array
        self.residual = self.caps.copy()
        self.placement = dict(sc.initial)
        for m, n in sc.initial.items():
            r = sc.microservices[m].request_old
            self.residual[n] -= (r.cpu, r.ram)

    def migrate(self, m: str, dest: int) -> None:
        ms = self.sc.microservices[m]
        self.residual[dest] -= (ms.request_new.cpu, ms.request_new.ram)
        self.residual[self.placement[m]] += (ms.request_old.cpu, ms.request_old.ram)
        self.placement[m] = dest

    def retire(self, m: str) -> None:
        r = self.sc.microservices[m].request_old
        self.residual[self.placement.pop(m)] += (r.cpu, r.ram)

    def create(self, m: str, dest: int) -> None:
        r = self.sc.microservices[m].request_new
        self.residual[dest] -= (r.cpu, r.ram)
        self.placement[m] = dest


def k8s_score(node_id: int, ms_id: str, residual: np.ndarray, placement, sc: Scenario,
              weights: ScoringWeights) -> float:
    node = sc.topology.nodes[node_id]
    r = sc.microservices[ms_id].request_new
    avail = residual[node_id]
    if not fits(r, avail):
        raise FilterError(f"{ms_id} does not fit node {node_id}")
    cap = node.capacity
    fit = 100.0 * ((cap.cpu - avail[0] + r.cpu) / cap.cpu + (cap.ram - avail[1] + r.ram) / cap.ram) / 2
    max_cost = sc.topology.max_node_cost
    price = 100.0 if max_cost <= 0 else 100.0 * (1.0 - node.node_cost / max_cost)
    placed = [p for p, _ in sc.constrained_partners.get(ms_id, ()) if p in placement]
    near = sum(1 for p in placed if sc.topology.nodes[placement[p]].cluster_id == node.cluster_id)
    aff = 100.0 * near / max(1, len(placed))
    return weights.w_fit * fit + weights.w_price * price + weights.w_affinity * aff


def _pick(live: _Live, m: str, weights: ScoringWeights) -> int | None:
    sc = live.sc
    r = sc.microservices[m].request_new
    best, best_score = None, -np.inf
    for n in range(len(sc.topology.nodes)):
        if not fits(r, live.residual[n]):
            continue
        s = k8s_score(n, m, live.residual, live.placement, sc, weights)
        if s > best_score:
            best, best_score = n, s
    return best


def rolling_update_baseline(sc: Scenario, weights: ScoringWeights | None = None,
                            shuffle_seed: int | None = None) -> SolveResult:
    """One ms at a time: start the new instance on the best-scored node,
    then stop the old one. An ms with no feasible node stays put."""
    weights = weights or ScoringWeights()
    t0 = time.perf_counter()
    live = _Live(sc)
    todo = list(sc.resched_order)
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(todo)
    steps = []
    for m in todo:
        dest = _pick(live, m, weights)
        if dest is None:
            continue
        steps.append(PlanStep(len(steps), m, Action.MIGRATE, dest))
        live.migrate(m, dest)
    plan = ReschedulePlan(tuple(steps))
    return package_result(sc, plan, Status.FEASIBLE, (time.perf_counter() - t0) * 1e3, require_complete=False)


def recreate_baseline(sc: Scenario, weights: ScoringWeights | None = None) -> SolveResult:
    """Stop every reschedulable ms, then schedule the new instances largest first."""
    weights = weights or ScoringWeights()
    t0 = time.perf_counter()
    live = _Live(sc)
    steps = []
    for m in sc.resched_order:
        steps.append(PlanStep(len(steps), m, Action.RETIRE))
        live.retire(m)
    create_slot = len(steps)
    ms = sc.microservices
    for m in sorted(sc.resched_order, key=lambda m: (-ms[m].request_new.cpu, -ms[m].request_new.ram)):
        dest = _pick(live, m, weights)
        if dest is None:
            continue
        steps.append(PlanStep(create_slot, m, Action.CREATE, dest))
        live.create(m, dest)
    plan = ReschedulePlan(tuple(steps))
    return package_result(sc, plan, Status.FEASIBLE, (time.perf_counter() - t0) * 1e3)
