"""Core data model: topology, applications, deployments, and the feasibility,
cost and locality primitives shared by every algorithm."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

EPS = 1e-9

CPU = 0
RAM = 1
DIMENSIONS = ("cpu", "ram")


class ResourceError(ValueError):
    """Raised when a resource quantity would become negative."""


class Scalarization(str, enum.Enum):
    """How a two-dimensional resource quantity is reduced to one number.

    ``cpu`` uses the cpu share only. ``dominant`` uses the most constrained
    dimension: the largest share for loads, the smallest for availabilities.
    """

    CPU = "cpu"
    DOMINANT = "dominant"


@dataclass(frozen=True)
class ResourceVector:
    cpu: float
    ram: float

    def __post_init__(self):
        if self.cpu < -EPS or self.ram < -EPS:
            raise ResourceError(f"negative resource vector ({self.cpu}, {self.ram})")

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(self.cpu + other.cpu, self.ram + other.ram)

    def __sub__(self, other: ResourceVector) -> ResourceVector:
        cpu, ram = self.cpu - other.cpu, self.ram - other.ram
        if cpu < -EPS or ram < -EPS:
            raise ResourceError(
                f"({self.cpu}, {self.ram}) - ({other.cpu}, {other.ram}) goes negative"
            )
        return ResourceVector(max(cpu, 0.0), max(ram, 0.0))

    def __le__(self, other: ResourceVector) -> bool:
        return self.cpu <= other.cpu + EPS and self.ram <= other.ram + EPS

    def __ge__(self, other: ResourceVector) -> bool:
        return other <= self

    def __lt__(self, other: ResourceVector) -> bool:
        return self <= other and self != other

    def __gt__(self, other: ResourceVector) -> bool:
        return other < self

    def __iter__(self) -> Iterator[float]:
        yield self.cpu
        yield self.ram

    def __getitem__(self, dim: int) -> float:
        return (self.cpu, self.ram)[dim]

    def __len__(self) -> int:
        return 2

    def scale(self, cpu_factor: float = 1.0, ram_factor: float = 1.0) -> ResourceVector:
        return ResourceVector(self.cpu * cpu_factor, self.ram * ram_factor)

    def as_array(self) -> np.ndarray:
        return np.array([self.cpu, self.ram], dtype=float)

    @classmethod
    def zero(cls) -> ResourceVector:
        return cls(0.0, 0.0)


def load_share(used, capacity, mode: Scalarization = Scalarization.CPU) -> float:
    """Used fraction of a capacity, reduced to a scalar."""
    cpu = used[0] / capacity[0]
    if Scalarization(mode) is Scalarization.CPU:
        return cpu
    return max(cpu, used[1] / capacity[1])


def availability_share(available, capacity, mode: Scalarization = Scalarization.CPU) -> float:
    """Available fraction of a capacity, reduced to a scalar."""
    cpu = available[0] / capacity[0]
    if Scalarization(mode) is Scalarization.CPU:
        return cpu
    return min(cpu, available[1] / capacity[1])


def fits(request, available) -> bool:
    """Component-wise ``request <= available`` with float slack."""
    return request[0] <= available[0] + EPS and request[1] <= available[1] + EPS


@dataclass(frozen=True)
class Node:
    node_id: int
    cluster_id: int
    capacity: ResourceVector
    node_cost: float = 0.0

    def __post_init__(self):
        if self.capacity.cpu <= 0 or self.capacity.ram <= 0:
            raise ValueError(f"node {self.node_id}: capacity must be positive")
        if self.node_cost < 0:
            raise ValueError(f"node {self.node_id}: negative cost")
        if (self.node_cost == 0) != (self.cluster_id == 0):
            raise ValueError(
                f"node {self.node_id}: cost must be zero exactly on the private cluster 0"
            )


@dataclass(frozen=True)
class Topology:
    clusters: int
    nodes: tuple[Node, ...]
    latency: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "latency", tuple(tuple(float(v) for v in row) for row in self.latency))
        R = self.clusters
        if R < 1 or len(self.latency) != R or any(len(row) != R for row in self.latency):
            raise ValueError(f"latency matrix must be {R}x{R}")
        for i in range(R):
            if self.latency[i][i] != 0:
                raise ValueError("intra-cluster latency must be zero")
            for j in range(R):
                if i != j and (self.latency[i][j] <= 0 or self.latency[i][j] != self.latency[j][i]):
                    raise ValueError("inter-cluster latency must be positive and symmetric")
        for i, n in enumerate(self.nodes):
            if n.node_id != i:
                raise ValueError(f"node ids must be 0..N-1 in order, got {n.node_id} at {i}")
            if not 0 <= n.cluster_id < R:
                raise ValueError(f"node {n.node_id}: unknown cluster {n.cluster_id}")

    def node(self, node_id: int) -> Node:
        if not isinstance(node_id, (int, np.integer)) or not 0 <= node_id < len(self.nodes):
            raise KeyError(f"unknown node id {node_id!r}")
        return self.nodes[node_id]

    def latency_between(self, node_a: int, node_b: int) -> float:
        return self.latency[self.node(node_a).cluster_id][self.node(node_b).cluster_id]

    @cached_property
    def max_latency(self) -> float:
        return max((v for row in self.latency for v in row), default=0.0)

    @cached_property
    def max_node_cost(self) -> float:
        return max((n.node_cost for n in self.nodes), default=0.0)

    @cached_property
    def capacity_array(self) -> np.ndarray:
        arr = np.array([[n.capacity.cpu, n.capacity.ram] for n in self.nodes], dtype=float)
        arr.setflags(write=False)
        return arr

    def cluster_nodes(self, cluster_id: int) -> list[Node]:
        return [n for n in self.nodes if n.cluster_id == cluster_id]


@dataclass(frozen=True)
class Microservice:
    ms_id: str
    app_id: str
    request_old: ResourceVector
    request_new: ResourceVector

    def __post_init__(self):
        for req in (self.request_old, self.request_new):
            if req.cpu <= 0 or req.ram <= 0:
                raise ValueError(f"{self.ms_id}: requests must be positive")


@dataclass(frozen=True)
class Flow:
    app_id: str
    ms_a: str
    ms_b: str
    max_latency: float

    def __post_init__(self):
        if self.ms_a == self.ms_b:
            raise ValueError("a flow needs two distinct endpoints")
        if self.max_latency <= 0:
            raise ValueError("max_latency must be positive")

    def other(self, ms_id: str) -> str:
        return self.ms_b if ms_id == self.ms_a else self.ms_a


@dataclass(frozen=True)
class Application:
    app_id: str
    microservices: tuple[Microservice, ...]
    flows: tuple[Flow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "microservices", tuple(self.microservices))
        object.__setattr__(self, "flows", tuple(self.flows))
        ids = {m.ms_id for m in self.microservices}
        for f in self.flows:
            if f.ms_a not in ids or f.ms_b not in ids:
                raise ValueError(f"app {self.app_id}: flow {f.ms_a}-{f.ms_b} leaves the app")


class Deployment(Mapping[str, int]):
    """Immutable ms_id -> node_id assignment."""

    __slots__ = ("_assignment", "_hash")

    def __init__(self, assignment: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        self._assignment = MappingProxyType(dict(assignment))
        self._hash = None

    def __getitem__(self, ms_id: str) -> int:
        return self._assignment[ms_id]

    def __iter__(self):
        return iter(self._assignment)

    def __len__(self):
        return len(self._assignment)

    def __eq__(self, other):
        if isinstance(other, Deployment):
            return dict(self._assignment) == dict(other._assignment)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._assignment.items()))
        return self._hash

    def __repr__(self):
        return f"Deployment({dict(self._assignment)!r})"

    def moved(self, ms_id: str, node_id: int) -> Deployment:
        d = dict(self._assignment)
        d[ms_id] = node_id
        return Deployment(d)

    def without(self, ms_id: str) -> Deployment:
        d = dict(self._assignment)
        d.pop(ms_id, None)
        return Deployment(d)

    def hosted_on(self, node_id: int) -> list[str]:
        return [m for m, n in self._assignment.items() if n == node_id]

    def active_nodes(self) -> set[int]:
        return set(self._assignment.values())

    def as_dict(self) -> dict[str, int]:
        return dict(self._assignment)


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    apps: tuple[Application, ...]
    initial: Deployment
    reschedulable: frozenset[str]
    seed: int | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "apps", tuple(self.apps))
        object.__setattr__(self, "reschedulable", frozenset(self.reschedulable))
        if not isinstance(self.initial, Deployment):
            object.__setattr__(self, "initial", Deployment(self.initial))
        seen = set()
        for app in self.apps:
            for m in app.microservices:
                if m.ms_id in seen:
                    raise ValueError(f"duplicate microservice id {m.ms_id}")
                if m.app_id != app.app_id:
                    raise ValueError(f"{m.ms_id} claims app {m.app_id}, listed under {app.app_id}")
                seen.add(m.ms_id)
        for ms_id, node_id in self.initial.items():
            if ms_id not in seen:
                raise ValueError(f"initial deployment names unknown microservice {ms_id}")
            self.topology.node(node_id)
        missing = self.reschedulable - set(self.initial)
        if missing:
            raise ValueError(f"reschedulable microservices missing from initial: {sorted(missing)}")

    @cached_property
    def microservices(self) -> dict[str, Microservice]:
        return {m.ms_id: m for app in self.apps for m in app.microservices}

    @cached_property
    def ms_order(self) -> dict[str, int]:
        """(app index, ms index) position of every microservice."""
        return {m.ms_id: i for i, m in enumerate(m for app in self.apps for m in app.microservices)}

    @cached_property
    def flows(self) -> tuple[Flow, ...]:
        return tuple(f for app in self.apps for f in app.flows)

    @cached_property
    def constrained_flows(self) -> tuple[Flow, ...]:
        """Flows whose bound is below some inter-cluster latency of the topology."""
        d_max = self.topology.max_latency
        return tuple(f for f in self.flows if f.max_latency < d_max)

    @cached_property
    def constrained_partners(self) -> dict[str, tuple[tuple[str, float], ...]]:
        partners: dict[str, list[tuple[str, float]]] = {m: [] for m in self.microservices}
        for f in self.constrained_flows:
            partners[f.ms_a].append((f.ms_b, f.max_latency))
            partners[f.ms_b].append((f.ms_a, f.max_latency))
        return {m: tuple(p) for m, p in partners.items()}

    @cached_property
    def resched_order(self) -> tuple[str, ...]:
        """Reschedulable microservices in (app, ms) index order."""
        order = self.ms_order
        return tuple(sorted(self.reschedulable, key=order.__getitem__))

    @cached_property
    def app_of(self) -> dict[str, str]:
        return {m.ms_id: m.app_id for m in self.microservices.values()}

    def request(self, ms_id: str, new: bool) -> ResourceVector:
        m = self.microservices[ms_id]
        return m.request_new if new else m.request_old

    def with_reschedulable(self, reschedulable: Iterable[str]) -> Scenario:
        return Scenario(self.topology, self.apps, self.initial, frozenset(reschedulable), self.seed, self.meta)

    def fixed_load(self) -> np.ndarray:
        """Per-node (cpu, ram) held by non-reschedulable microservices at their old size."""
        load = np.zeros((len(self.topology.nodes), 2))
        for ms_id, node_id in self.initial.items():
            if ms_id not in self.reschedulable:
                r = self.microservices[ms_id].request_old
                load[node_id, 0] += r.cpu
                load[node_id, 1] += r.ram
        return load

    def forced_nodes(self) -> set[int]:
        """Nodes that stay active because they host non-reschedulable microservices."""
        return {n for m, n in self.initial.items() if m not in self.reschedulable}


# --- operations -------------------------------------------------------------


def locality_indicator(flow: Flow, node_a: Node, node_b: Node, topology: Topology) -> bool:
    for n in (node_a, node_b):
        if topology.node(n.node_id) != n:
            raise KeyError(f"node {n.node_id} is not part of the topology")
    return flow.max_latency >= topology.latency[node_a.cluster_id][node_b.cluster_id]


@dataclass(frozen=True)
class CapacityViolation:
    node_id: int
    dimension: str
    overload: float
    slot: int | None = None


@dataclass(frozen=True)
class LocalityViolation:
    flow: Flow
    node_a: int
    node_b: int


@dataclass(frozen=True)
class FeasibilityReport:
    capacity_violations: tuple[CapacityViolation, ...]
    locality_violations: tuple[LocalityViolation, ...]

    @property
    def feasible(self) -> bool:
        return not self.capacity_violations and not self.locality_violations

    def __bool__(self):
        return self.feasible


def node_loads(dep: Mapping[str, int], sc: Scenario, use_new_requests: bool) -> np.ndarray:
    load = np.zeros((len(sc.topology.nodes), 2))
    for ms_id, node_id in dep.items():
        r = sc.request(ms_id, use_new_requests)
        load[node_id, 0] += r.cpu
        load[node_id, 1] += r.ram
    return load


def is_feasible(dep: Mapping[str, int], sc: Scenario, use_new_requests: bool) -> FeasibilityReport:
    for ms_id in dep:
        if ms_id not in sc.microservices:
            raise KeyError(f"unknown microservice {ms_id}")
    over = node_loads(dep, sc, use_new_requests) - sc.topology.capacity_array
    cap_v = [
        CapacityViolation(node_id, DIMENSIONS[d], float(over[node_id, d]))
        for node_id in range(len(sc.topology.nodes))
        for d in (CPU, RAM)
        if over[node_id, d] > EPS
    ]
    loc_v = []
    topo = sc.topology
    for f in sc.flows:
        if f.ms_a in dep and f.ms_b in dep:
            na, nb = topo.node(dep[f.ms_a]), topo.node(dep[f.ms_b])
            if not locality_indicator(f, na, nb, topo):
                loc_v.append(LocalityViolation(f, na.node_id, nb.node_id))
    return FeasibilityReport(tuple(cap_v), tuple(loc_v))


def deployment_cost(dep: Mapping[str, int], sc: Scenario) -> float:
    nodes = sc.topology.nodes
    return float(sum(nodes[n].node_cost for n in set(dep.values())))


class CapacityExceeded(ResourceError):
    """A node's hosted requests exceed its capacity; ``overload`` says by how much."""

    def __init__(self, node_id: int, overload: ResourceVector):
        super().__init__(f"node {node_id} overloaded by ({overload.cpu:g} cpu, {overload.ram:g} ram)")
        self.node_id = node_id
        self.overload = overload


def residual_capacity(dep: Mapping[str, int], node: Node, sc: Scenario, use_new_requests: bool) -> ResourceVector:
    used = np.zeros(2)
    for ms_id, node_id in dep.items():
        if node_id == node.node_id:
            used += sc.request(ms_id, use_new_requests).as_array()
    cpu, ram = node.capacity.cpu - float(used[0]), node.capacity.ram - float(used[1])
    if cpu < -EPS or ram < -EPS:
        raise CapacityExceeded(node.node_id, ResourceVector(max(-cpu, 0.0), max(-ram, 0.0)))
    return ResourceVector(max(cpu, 0.0), max(ram, 0.0))


class LoadState:
    """Snapshot of live instances during a re-orchestration.

    ``residual`` is the (N, 2) free capacity; it may go negative when an
    executor runs an infeasible plan in audit mode. ``placement`` maps each
    live microservice to its node and ``footprint`` to the request it holds
    there. Every ``apply_*`` method returns a new state.
    """

    __slots__ = ("residual", "placement", "footprint")

    def __init__(self, residual: np.ndarray, placement: Mapping[str, int], footprint: Mapping[str, ResourceVector]):
        self.residual = residual
        self.placement = placement
        self.footprint = footprint
        self.residual.setflags(write=False)

    @classmethod
    def initial(cls, sc: Scenario) -> LoadState:
        residual = sc.topology.capacity_array - node_loads(sc.initial, sc, use_new_requests=False)
        footprint = {m: sc.microservices[m].request_old for m in sc.initial}
        return cls(residual, dict(sc.initial), footprint)

    def available(self, node_id: int) -> np.ndarray:
        return self.residual[node_id]

    def can_host(self, node_id: int, request: ResourceVector) -> bool:
        return fits(request, self.residual[node_id])

    def _with(self, deltas, placement, footprint) -> LoadState:
        residual = self.residual.copy()
        for node_id, vec, sign in deltas:
            residual[node_id, 0] += sign * vec.cpu
            residual[node_id, 1] += sign * vec.ram
        return LoadState(residual, placement, footprint)

    def apply_migrate(self, ms_id: str, dest: int, new_request: ResourceVector) -> LoadState:
        src, old = self.placement[ms_id], self.footprint[ms_id]
        placement = dict(self.placement)
        footprint = dict(self.footprint)
        placement[ms_id] = dest
        footprint[ms_id] = new_request
        return self._with([(dest, new_request, -1), (src, old, +1)], placement, footprint)

    def apply_retire(self, ms_id: str) -> LoadState:
        src, old = self.placement[ms_id], self.footprint[ms_id]
        placement = dict(self.placement)
        footprint = dict(self.footprint)
        del placement[ms_id]
        del footprint[ms_id]
        return self._with([(src, old, +1)], placement, footprint)

    def apply_create(self, ms_id: str, dest: int, new_request: ResourceVector) -> LoadState:
        placement = dict(self.placement)
        footprint = dict(self.footprint)
        placement[ms_id] = dest
        footprint[ms_id] = new_request
        return self._with([(dest, new_request, -1)], placement, footprint)

    def deployment(self) -> Deployment:
        return Deployment(self.placement)
