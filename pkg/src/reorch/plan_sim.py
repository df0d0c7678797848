"""Rescheduling plans, the slot-by-slot executor, and the evaluation metrics.

The executor is the ground truth for every algorithm. A migration creates the
updated instance on the destination while the old instance still holds its
source, then frees the source; a move onto the same node therefore needs room
for both instances at once.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import (
    DIMENSIONS,
    EPS,
    CapacityViolation,
    Deployment,
    LoadState,
    Scenario,
    deployment_cost,
)


class PlanStructureError(ValueError):
    """A plan that cannot be executed at all (unknown ms, duplicate step, ...)."""


class Action(str, enum.Enum):
    MIGRATE = "migrate"
    RETIRE = "retire"
    CREATE = "create"


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class PlanStep:
    slot: int
    ms_id: str
    action: Action
    dest: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "action", Action(self.action))
        if self.slot < 0:
            raise PlanStructureError("slots start at 0")
        if (self.dest is None) != (self.action is Action.RETIRE):
            raise PlanStructureError(f"{self.action.value} step for {self.ms_id}: destination mismatch")

    def to_dict(self) -> dict:
        d = {"slot": self.slot, "ms": self.ms_id, "action": self.action.value}
        if self.dest is not None:
            d["dest"] = self.dest
        return d


@dataclass(frozen=True)
class ReschedulePlan:
    steps: tuple[PlanStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    @classmethod
    def migrations(cls, order: Iterable[str], target: Mapping[str, int]) -> ReschedulePlan:
        return cls(tuple(PlanStep(t, m, Action.MIGRATE, target[m]) for t, m in enumerate(order)))

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, data: dict) -> ReschedulePlan:
        try:
            return cls(tuple(PlanStep(int(s["slot"]), str(s["ms"]), Action(s["action"]), s.get("dest")) for s in data["steps"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanStructureError(f"malformed plan: {exc!r}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class ExecutionTrace:
    """Residuals after every step plus, for each step that starts an
    instance, the transient residuals while old and new instances coexist."""

    snapshots: tuple[np.ndarray, ...]
    transients: tuple[np.ndarray, ...]
    final: Deployment
    terminated: frozenset[str]
    retired: frozenset[str]
    violations: tuple[CapacityViolation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "residuals": [[[round(float(v), 6) for v in row] for row in snap] for snap in self.snapshots],
            "final": self.final.as_dict(),
            "terminated": sorted(self.terminated),
            "violations": [
                {"slot": v.slot, "node": v.node_id, "dimension": v.dimension, "overload": round(v.overload, 6)}
                for v in self.violations
            ],
        }


@dataclass(frozen=True)
class SolveResult:
    plan: ReschedulePlan
    final: Deployment
    deployment_cost: float
    disruption_cost: int
    qos_violation: float
    runtime_ms: float
    status: Status
    violations: int = 0

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "deployment_cost": self.deployment_cost,
            "disruption_cost": self.disruption_cost,
            "qos_violation": self.qos_violation,
            "runtime_ms": round(self.runtime_ms, 3),
            "capacity_violations": self.violations,
            "steps": len(self.plan),
        }


def _check_structure(sc: Scenario, plan: ReschedulePlan, require_complete: bool) -> None:
    moved: set[str] = set()
    retired: set[str] = set()
    created: set[str] = set()
    expected_slot = 0
    last_retire_slot = -1
    seen_create = False
    for step in plan:
        if step.ms_id not in sc.microservices:
            raise PlanStructureError(f"unknown microservice {step.ms_id}")
        if step.ms_id not in sc.reschedulable:
            raise PlanStructureError(f"{step.ms_id} is not reschedulable")
        if step.dest is not None:
            sc.topology.node(step.dest)
        if step.action is Action.CREATE:
            if step.ms_id not in retired or step.ms_id in created:
                raise PlanStructureError(f"create for {step.ms_id} without a preceding retire")
            if step.slot <= last_retire_slot:
                raise PlanStructureError("create steps must follow every retire")
            created.add(step.ms_id)
            seen_create = True
            continue
        if seen_create:
            raise PlanStructureError("migrate/retire steps cannot follow create steps")
        if step.slot != expected_slot:
            raise PlanStructureError(f"expected slot {expected_slot}, got {step.slot} for {step.ms_id}")
        expected_slot += 1
        if step.ms_id in moved or step.ms_id in retired:
            raise PlanStructureError(f"duplicate step for {step.ms_id}")
        (retired if step.action is Action.RETIRE else moved).add(step.ms_id)
        if step.action is Action.RETIRE:
            last_retire_slot = step.slot
    if require_complete:
        missing = sc.reschedulable - moved - retired
        if missing:
            raise PlanStructureError(f"reschedulable microservices without a step: {sorted(missing)}")


def _admit(violations, state: LoadState, node_id: int, request, slot: int) -> None:
    avail = state.residual[node_id]
    for d in (0, 1):
        short = request[d] - avail[d]
        if short > EPS:
            violations.append(CapacityViolation(node_id, DIMENSIONS[d], float(short), slot))


def validate_and_execute(sc: Scenario, plan: ReschedulePlan, require_complete: bool = True,
                         keep_snapshots: bool = True) -> ExecutionTrace:
    """Run ``plan`` from the initial deployment, auditing every instant.

    Structural problems raise :class:`PlanStructureError`. Capacity overloads
    are recorded with their slot and execution continues. With
    ``require_complete=False`` reschedulable microservices may be left
    without a step, staying where they are.
    """
    _check_structure(sc, plan, require_complete)
    state = LoadState.initial(sc)
    violations: list[CapacityViolation] = []
    snapshots = [state.residual] if keep_snapshots else []
    transients = []
    retired: set[str] = set()
    for step in plan:
        m = sc.microservices[step.ms_id]
        if keep_snapshots and step.action is not Action.RETIRE:
            peak = state.residual.copy()
            peak[step.dest] -= (m.request_new.cpu, m.request_new.ram)
            transients.append(peak)
        if step.action is Action.MIGRATE:
            # old instance still holds its source while the new one starts
            _admit(violations, state, step.dest, m.request_new, step.slot)
            state = state.apply_migrate(step.ms_id, step.dest, m.request_new)
        elif step.action is Action.RETIRE:
            state = state.apply_retire(step.ms_id)
            retired.add(step.ms_id)
        else:
            _admit(violations, state, step.dest, m.request_new, step.slot)
            state = state.apply_create(step.ms_id, step.dest, m.request_new)
        if keep_snapshots:
            snapshots.append(state.residual)
    final = state.deployment()
    return ExecutionTrace(
        tuple(snapshots), tuple(transients), final, frozenset(retired - set(final)), frozenset(retired), tuple(violations)
    )


def disruption_cost(trace: ExecutionTrace) -> int:
    """Microservices that had no running instance at some point.

    Covers both permanent terminations and retire-then-create windows; each
    microservice counts once.
    """
    return len(trace.retired | trace.terminated)


def qos_violation(dep: Mapping[str, int], sc: Scenario) -> float:
    """Share of topology-constrained flows whose endpoints ended up too far apart."""
    constrained = sc.constrained_flows
    if not constrained:
        return 0.0
    topo = sc.topology
    violated = sum(
        1
        for f in constrained
        if f.ms_a in dep and f.ms_b in dep and f.max_latency < topo.latency_between(dep[f.ms_a], dep[f.ms_b])
    )
    return violated / len(constrained)


def min_cover_cost(need: float, capacities: Sequence[float], costs: Sequence[float]) -> float:
    """Lower bound on the cost of nodes whose summed capacity reaches ``need``.

    Exact (cheapest whole nodes first) when all candidate capacities are
    equal, otherwise the fractional relaxation by cost per unit of capacity.
    """
    if need <= EPS:
        return 0.0
    if sum(capacities) < need - EPS:
        return math.inf
    if len(set(capacities)) <= 1:
        cap = capacities[0]
        k = math.ceil(need / cap - EPS)
        return float(sum(sorted(costs)[:k]))
    total = 0.0
    for cap, cost in sorted(zip(capacities, costs), key=lambda cc: cc[1] / cc[0]):
        take = min(cap, need)
        total += cost * take / cap
        need -= take
        if need <= EPS:
            break
    return total


@dataclass(frozen=True)
class CostBounds:
    min_cost: float
    max_cost: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.min_cost)

    def __iter__(self):
        yield self.min_cost
        yield self.max_cost


def cost_bounds(sc: Scenario) -> CostBounds:
    """(min, max) reference costs.

    ``max`` is the initial deployment cost. ``min`` keeps every node with a
    non-reschedulable tenant active and adds the cheapest capacity that could
    absorb the remaining new-size demand, ignoring locality and ordering.
    ``min`` is ``inf`` when total capacity cannot hold the demand.
    """
    max_cost = deployment_cost(sc.initial, sc)
    nodes = sc.topology.nodes
    forced = sc.forced_nodes()
    free = sc.topology.capacity_array - sc.fixed_load()
    demand = np.zeros(2)
    for m in sc.reschedulable:
        demand += sc.microservices[m].request_new.as_array()
    base = sum(nodes[n].node_cost for n in forced)
    others = [n for n in nodes if n.node_id not in forced]
    extra = 0.0
    for d in (0, 1):
        need = demand[d] - sum(free[n, d] for n in forced)
        extra = max(extra, min_cover_cost(need, [free[n.node_id, d] for n in others], [n.node_cost for n in others]))
    return CostBounds(float(base + extra), max_cost)


def package_result(sc: Scenario, plan: ReschedulePlan, status: Status, runtime_ms: float,
                   require_complete: bool = True) -> SolveResult:
    """Execute ``plan`` and collect every metric from the resulting trace."""
    trace = validate_and_execute(sc, plan, require_complete=require_complete, keep_snapshots=False)
    return SolveResult(
        plan=plan,
        final=trace.final,
        deployment_cost=deployment_cost(trace.final, sc),
        disruption_cost=disruption_cost(trace),
        qos_violation=qos_violation(trace.final, sc),
        runtime_ms=runtime_ms,
        status=status,
        violations=len(trace.violations),
    )


def unsolved_result(sc: Scenario, status: Status, runtime_ms: float) -> SolveResult:
    """Placeholder for runs that produced no plan; the initial deployment stays."""
    return SolveResult(
        plan=ReschedulePlan(),
        final=sc.initial,
        deployment_cost=math.nan,
        disruption_cost=0,
        qos_violation=math.nan,
        runtime_ms=runtime_ms,
        status=status,
    )
