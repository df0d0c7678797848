"""Two-phase heuristic: allocate a cheap target, then order the moves.

Allocation ignores where the reschedulable microservices currently run and
packs their new sizes onto the room left by everything else. Ordering then
walks from the initial deployment towards that target one move per slot,
retiring a microservice whenever no move can be made.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from .domain import EPS, Deployment, Scalarization, Scenario, availability_share, fits
from .plan_sim import Action, PlanStep, ReschedulePlan, SolveResult, Status, package_result


@dataclass(frozen=True)
class HeuristicOptions:
    scalarization: Scalarization = Scalarization.CPU
    # pick the least available cluster instead of the most available one
    literal_cluster_argmin: bool = False


@dataclass(frozen=True)
class Allocation:
    """Target node per reschedulable ms; ``unplaceable`` ms have none."""

    target: Deployment
    unplaceable: tuple[str, ...] = ()


def _node_key(sc: Scenario, avail: np.ndarray, n: int, mode) -> tuple:
    node = sc.topology.nodes[n]
    return (node.node_cost, availability_share(avail[n], node.capacity, mode), n)


def _best_node(sc: Scenario, avail: np.ndarray, r, nodes, mode) -> int | None:
    best, best_key = None, None
    for n in nodes:
        if fits(r, avail[n]):
            key = _node_key(sc, avail, n, mode)
            if best_key is None or key < best_key:
                best, best_key = n, key
    return best


def _cluster_order(sc: Scenario, avail: np.ndarray, opts: HeuristicOptions) -> list[int]:
    topo = sc.topology
    caps = topo.capacity_array
    scores = []
    for c in range(topo.clusters):
        members = [n.node_id for n in topo.cluster_nodes(c)]
        if not members:
            continue
        score = availability_share(avail[members].sum(axis=0), caps[members].sum(axis=0), opts.scalarization)
        scores.append((score if opts.literal_cluster_argmin else -score, c))
    return [c for _, c in sorted(scores)]


def allocate(sc: Scenario, opts: HeuristicOptions | None = None) -> Allocation:
    opts = opts or HeuristicOptions()
    mode = opts.scalarization
    topo = sc.topology
    avail = topo.capacity_array - sc.fixed_load()
    target: dict[str, int] = {}
    all_nodes = range(len(topo.nodes))
    constrained = {m for f in sc.constrained_flows for m in (f.ms_a, f.ms_b)}
    leftover: list[str] = []

    def place(m: str, nodes) -> bool:
        r = sc.request(m, True)
        n = _best_node(sc, avail, r, nodes, mode)
        if n is None:
            return False
        target[m] = n
        avail[n] -= (r.cpu, r.ram)
        return True

    for app in sc.apps:
        group = [m.ms_id for m in app.microservices if m.ms_id in sc.reschedulable and m.ms_id in constrained]
        if not group:
            continue
        placed = False
        for c in _cluster_order(sc, avail, opts):
            snapshot = avail.copy()
            members = [n.node_id for n in topo.cluster_nodes(c)]
            if all(place(m, members) for m in group):
                placed = True
                break
            # all or nothing per cluster
            avail[:] = snapshot
            for m in group:
                target.pop(m, None)
        if not placed:
            leftover.extend(group)

    rest = [m for m in sc.resched_order if m not in target and m not in leftover]
    rest.sort(key=lambda m: -sc.microservices[m].request_new.cpu)
    unplaceable = []
    for m in leftover + rest:
        if place(m, all_nodes):
            continue
        src = sc.initial[m]
        r = sc.request(m, True)
        if fits(r, avail[src]):
            target[m] = src
            avail[src] -= (r.cpu, r.ram)
        else:
            unplaceable.append(m)
    return Allocation(Deployment(target), tuple(unplaceable))


class _Ordering:
    def __init__(self, sc: Scenario, alloc: Allocation, mode):
        self.sc = sc
        self.mode = mode
        self.live = sc.topology.capacity_array - sc.fixed_load()
        for m in sc.reschedulable:
            r = sc.microservices[m].request_old
            self.live[sc.initial[m]] -= (r.cpu, r.ram)
        self.steps: list[PlanStep] = []
        self.pending = [m for m in sc.resched_order if m in alloc.target]
        self.target = alloc.target
        for m in alloc.unplaceable:
            self.retire(m)

    def executable(self, m: str) -> bool:
        return fits(self.sc.microservices[m].request_new, self.live[self.target[m]])

    def score(self, m: str) -> float:
        n = self.target[m]
        r = self.sc.microservices[m].request_new
        live = self.live[n]
        if self.mode is Scalarization.CPU:
            need, room = r.cpu, live[0]
        else:
            cap = self.sc.topology.nodes[n].capacity
            need = max(r.cpu / cap.cpu, r.ram / cap.ram)
            room = min(live[0] / cap.cpu, live[1] / cap.ram)
        return need / room if room > EPS else np.inf

    def migrate(self, m: str) -> None:
        ms = self.sc.microservices[m]
        dest = self.target[m]
        self.live[dest] -= (ms.request_new.cpu, ms.request_new.ram)
        self.live[self.sc.initial[m]] += (ms.request_old.cpu, ms.request_old.ram)
        self.steps.append(PlanStep(len(self.steps), m, Action.MIGRATE, dest))
        self.pending.remove(m)

    def retire(self, m: str) -> None:
        r = self.sc.microservices[m].request_old
        self.live[self.sc.initial[m]] += (r.cpu, r.ram)
        self.steps.append(PlanStep(len(self.steps), m, Action.RETIRE))
        if m in self.pending:
            self.pending.remove(m)

    def retire_largest(self) -> None:
        ms = self.sc.microservices
        self.retire(max(self.pending, key=lambda m: (ms[m].request_old.cpu, ms[m].request_old.ram)))

    def plan(self) -> ReschedulePlan:
        return ReschedulePlan(tuple(self.steps))


def order(sc: Scenario, alloc: Allocation, opts: HeuristicOptions | None = None) -> ReschedulePlan:
    """Least-impact move first; retire the biggest pending ms when stuck."""
    opts = opts or HeuristicOptions()
    o = _Ordering(sc, alloc, Scalarization(opts.scalarization))
    while o.pending:
        best, best_score = None, np.inf
        for m in o.pending:
            if not o.executable(m):
                continue
            s = o.score(m)
            if best is None or s < best_score:
                best, best_score = m, s
        if best is None:
            o.retire_largest()
        else:
            o.migrate(best)
    return o.plan()


def order_random(sc: Scenario, alloc: Allocation, rng: random.Random) -> ReschedulePlan:
    """Same fallback, but the next move is a uniformly random executable ms."""
    o = _Ordering(sc, alloc, Scalarization.CPU)
    while o.pending:
        candidates = list(o.pending)
        rng.shuffle(candidates)
        pick = next((m for m in candidates if o.executable(m)), None)
        if pick is None:
            o.retire_largest()
        else:
            o.migrate(pick)
    return o.plan()


def heuristic_solve(sc: Scenario, variant: str = "ordered", rng: random.Random | None = None,
                    opts: HeuristicOptions | None = None) -> SolveResult:
    t0 = time.perf_counter()
    alloc = allocate(sc, opts)
    if variant == "ordered":
        plan = order(sc, alloc, opts)
    elif variant == "random":
        plan = order_random(sc, alloc, rng if rng is not None else random.Random(sc.seed))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return package_result(sc, plan, Status.FEASIBLE, (time.perf_counter() - t0) * 1e3)
