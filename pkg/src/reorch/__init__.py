"""Disruption-free re-orchestration of microservices over priced multi-cloud nodes."""

from .domain import (
    Application,
    Deployment,
    Flow,
    Microservice,
    Node,
    ResourceVector,
    Scalarization,
    Scenario,
    Topology,
    deployment_cost,
    is_feasible,
    locality_indicator,
    residual_capacity,
)
from .io import load_fixture, load_scenario, save_scenario

__version__ = "0.1.0"
