"""Scenario JSON reading and writing."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .domain import (
    Application,
    Deployment,
    Flow,
    Microservice,
    Node,
    ResourceVector,
    Scenario,
    Topology,
)


class ScenarioFormatError(ValueError):
    pass


def scenario_from_dict(data: dict) -> Scenario:
    try:
        nodes = [
            Node(int(n["id"]), int(n["cluster"]), ResourceVector(float(n["cpu"]), float(n["ram"])), float(n["cost"]))
            for n in data["nodes"]
        ]
        topology = Topology(int(data["clusters"]), tuple(nodes), data["latency_ms"])
        apps = []
        for a in data["apps"]:
            app_id = str(a["id"])
            ms = tuple(
                Microservice(
                    str(m["id"]),
                    app_id,
                    ResourceVector(float(m["cpu_old"]), float(m["ram_old"])),
                    ResourceVector(float(m["cpu_new"]), float(m["ram_new"])),
                )
                for m in a["ms"]
            )
            flows = tuple(
                Flow(app_id, str(f["a"]), str(f["b"]), float(f["max_latency_ms"])) for f in a.get("flows", [])
            )
            apps.append(Application(app_id, ms, flows))
        initial = Deployment({str(k): int(v) for k, v in data["initial"].items()})
        return Scenario(
            topology,
            tuple(apps),
            initial,
            frozenset(str(m) for m in data.get("reschedulable", [])),
            data.get("seed"),
            data.get("meta", {}),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioFormatError(f"malformed scenario: {exc!r}") from exc


def scenario_to_dict(sc: Scenario) -> dict:
    topo = sc.topology
    out = {
        "clusters": topo.clusters,
        "nodes": [
            {"id": n.node_id, "cluster": n.cluster_id, "cpu": n.capacity.cpu, "ram": n.capacity.ram, "cost": n.node_cost}
            for n in topo.nodes
        ],
        "latency_ms": [list(row) for row in topo.latency],
        "apps": [
            {
                "id": app.app_id,
                "ms": [
                    {
                        "id": m.ms_id,
                        "cpu_old": m.request_old.cpu,
                        "ram_old": m.request_old.ram,
                        "cpu_new": m.request_new.cpu,
                        "ram_new": m.request_new.ram,
                    }
                    for m in app.microservices
                ],
                "flows": [{"a": f.ms_a, "b": f.ms_b, "max_latency_ms": f.max_latency} for f in app.flows],
            }
            for app in sc.apps
        ],
        "initial": {m: sc.initial[m] for m in sorted(sc.initial, key=sc.ms_order.__getitem__)},
        "reschedulable": list(sc.resched_order),
        "seed": sc.seed,
    }
    if sc.meta:
        out["meta"] = dict(sc.meta)
    return out


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2) + "\n"


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc))


def load_fixture(name: str) -> Scenario:
    """Load a bundled fixture scenario (``tiny`` or ``coex``)."""
    text = resources.files("reorch.fixtures").joinpath(f"{name}.json").read_text()
    return scenario_from_dict(json.loads(text))
