"""Experiment driver: seeded scenarios x sweep points x algorithms -> CSV/JSON.

Each repetition is independent, so repetitions run in a process pool
(``REORCH_THREADS`` caps the worker count). Rows are sorted before
writing, so the output bytes never depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .baselines import ScoringWeights, recreate_baseline, rolling_update_baseline
from .domain import Scenario
from .exact import SolveOptions, solve_exact
from .heuristic import HeuristicOptions, heuristic_solve
from .plan_sim import ReschedulePlan, SolveResult, Status, cost_bounds
from .scenario_gen import PRESETS, GenConfig, generate_scenario, select_reschedulable

log = logging.getLogger(__name__)

ALGOS = ("exact", "heuristic", "heuristic-random", "rolling", "recreate")
CSV_HEADER = (
    "algo", "seed", "resched_count", "deployment_cost", "disruption_cost",
    "qos_violation", "min_cost", "max_cost", "runtime_ms", "status",
)
SKIPPED = "skipped"
ERROR = "error"
_SOLVED = (Status.OPTIMAL.value, Status.FEASIBLE.value)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    base: GenConfig = field(default_factory=GenConfig)
    sweep: tuple[int, ...] = (10, 20, 30, 40, 50)
    algos: tuple[str, ...] = ("heuristic", "heuristic-random", "rolling", "recreate")
    repetitions: int = 50
    seed_base: int = 0
    timeout_ms: dict = field(default_factory=lambda: {"exact": 60_000.0})
    exact_cap: int = 10
    weights: ScoringWeights = field(default_factory=ScoringWeights)
    literal_cluster_argmin: bool = False
    # wall-clock times make the CSV non-reproducible, so they are opt-in
    record_runtime: bool = False
    keep_plans: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sweep", tuple(int(k) for k in self.sweep))
        object.__setattr__(self, "algos", tuple(self.algos))
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if not self.sweep:
            raise ConfigError("sweep must list at least one reschedulable count")
        unknown = [a for a in self.algos if a not in ALGOS]
        if unknown or not self.algos:
            raise ConfigError(f"unknown algorithms {unknown}; choose from {list(ALGOS)}")
        total = self.base.app_count * self.base.ms_per_app
        scaled = math.ceil(self.base.scaledown_app_fraction * self.base.app_count) * self.base.ms_per_app
        for k in self.sweep:
            if not scaled <= k <= total:
                raise ConfigError(f"sweep point {k} outside [{scaled}, {total}] for this configuration")
        for algo, t in self.timeout_ms.items():
            if algo not in ALGOS or not t > 0:
                raise ConfigError(f"bad timeout entry {algo}: {t}")

    def timeout_for(self, algo: str) -> float | None:
        return self.timeout_ms.get(algo)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        try:
            base = dict(data.pop("base", {}))
            if "preset" in data:
                base.setdefault("preset", data.pop("preset"))
            if base.get("preset") is not None and base["preset"] not in PRESETS:
                raise ConfigError(f"unknown preset {base['preset']!r}; choose from {sorted(PRESETS)}")
            kwargs = {"base": GenConfig.from_dict(base)}
            if "weights" in data:
                w = data.pop("weights")
                kwargs["weights"] = ScoringWeights.parse(w) if isinstance(w, str) else ScoringWeights(*w)
            if "timeout_ms" in data:
                t = data.pop("timeout_ms")
                kwargs["timeout_ms"] = {"exact": float(t)} if isinstance(t, (int, float)) else {k: float(v) for k, v in t.items()}
            known = {"sweep", "algos", "repetitions", "seed_base", "exact_cap", "literal_cluster_argmin", "record_runtime"}
            extra = set(data) - known
            if extra:
                raise ConfigError(f"unknown experiment fields: {sorted(extra)}")
            kwargs.update(data)
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class ResultRow:
    algo: str
    seed: int
    resched_count: int
    deployment_cost: float
    disruption_cost: float
    qos_violation: float
    min_cost: float
    max_cost: float
    runtime_ms: float
    status: str
    plan: ReschedulePlan | None = field(default=None, compare=False, repr=False)

    @property
    def solved(self) -> bool:
        return self.status in _SOLVED

    def sort_key(self):
        return (self.algo, self.resched_count, self.seed)


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)

    def sorted(self) -> ResultsTable:
        return ResultsTable(sorted(self.rows, key=ResultRow.sort_key))

    def select(self, algo: str | None = None, resched_count: int | None = None) -> list[ResultRow]:
        return [
            r for r in self.rows
            if (algo is None or r.algo == algo) and (resched_count is None or r.resched_count == resched_count)
        ]

    def __len__(self):
        return len(self.rows)


def sweep_scenario(cfg: ExperimentConfig, seed: int, k: int, base: Scenario | None = None) -> Scenario:
    """The scenario used for repetition ``seed`` at sweep point ``k``."""
    sc = base if base is not None else generate_scenario(cfg.base.replace(seed=seed))
    return sc.with_reschedulable(select_reschedulable(sc, k, random.Random(seed * 1_000_003 + k)))


def run_algo(algo: str, sc: Scenario, cfg: ExperimentConfig, seed: int, k: int) -> SolveResult:
    hopts = HeuristicOptions(scalarization=cfg.base.scalarization, literal_cluster_argmin=cfg.literal_cluster_argmin)
    if algo == "exact":
        timeout = cfg.timeout_for("exact") or 60_000.0
        return solve_exact(sc, SolveOptions(timeout_ms=timeout))
    if algo == "heuristic":
        return heuristic_solve(sc, "ordered", opts=hopts)
    if algo == "heuristic-random":
        return heuristic_solve(sc, "random", random.Random(seed * 1_000_003 + k + 500_009), opts=hopts)
    if algo == "rolling":
        return rolling_update_baseline(sc, cfg.weights)
    if algo == "recreate":
        return recreate_baseline(sc, cfg.weights)
    raise ConfigError(f"unknown algorithm {algo!r}")


def _row(algo, seed, k, bounds, status, result: SolveResult | None, runtime, keep_plan) -> ResultRow:
    nan = math.nan
    solved = result is not None and status in _SOLVED
    return ResultRow(
        algo=algo,
        seed=seed,
        resched_count=k,
        deployment_cost=result.deployment_cost if solved else nan,
        disruption_cost=result.disruption_cost if solved else nan,
        qos_violation=result.qos_violation if solved else nan,
        min_cost=bounds.min_cost,
        max_cost=bounds.max_cost,
        runtime_ms=runtime,
        status=status,
        plan=result.plan if (keep_plan and result is not None) else None,
    )


def run_repetition(cfg: ExperimentConfig, rep: int) -> list[ResultRow]:
    """Every sweep point and algorithm for one seed. Failures become rows."""
    seed = cfg.seed_base + rep
    rows = []
    try:
        base = generate_scenario(cfg.base.replace(seed=seed))
    except Exception as exc:  # noqa: BLE001 - a bad seed must not abort the sweep
        log.warning("seed %d: generation failed: %s", seed, exc)
        nan = math.nan
        return [
            ResultRow(a, seed, k, nan, nan, nan, nan, nan, 0.0, ERROR)
            for k in cfg.sweep for a in cfg.algos
        ]
    for k in cfg.sweep:
        sc = sweep_scenario(cfg, seed, k, base)
        count = len(sc.reschedulable)
        bounds = cost_bounds(sc)
        for algo in cfg.algos:
            if algo == "exact" and count > cfg.exact_cap:
                rows.append(_row(algo, seed, count, bounds, SKIPPED, None, 0.0, False))
                continue
            t0 = time.perf_counter()
            try:
                result = run_algo(algo, sc, cfg, seed, k)
                status = result.status.value
            except Exception as exc:  # noqa: BLE001
                log.warning("seed %d, k=%d, %s failed: %s", seed, k, algo, exc)
                result, status = None, ERROR
            runtime = (time.perf_counter() - t0) * 1e3 if cfg.record_runtime else 0.0
            rows.append(_row(algo, seed, count, bounds, status, result, runtime, cfg.keep_plans))
    return rows


def worker_count(tasks: int) -> int:
    env = os.environ.get("REORCH_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"REORCH_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(cap, tasks))


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ResultsTable:
    reps = range(cfg.repetitions)
    workers = workers or worker_count(cfg.repetitions)
    rows: list[ResultRow] = []
    if workers == 1:
        for rep in reps:
            rows.extend(run_repetition(cfg, rep))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(run_repetition, [cfg] * len(reps), reps):
                rows.extend(chunk)
    return ResultsTable(rows).sorted()


# --- output -------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and math.isnan(v):
        return ""
    return f"{float(v):.6f}"


def write_csv(table: ResultsTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table.sorted().rows:
            w.writerow([
                r.algo, r.seed, r.resched_count,
                _fmt(r.deployment_cost), _fmt(r.disruption_cost), _fmt(r.qos_violation),
                _fmt(r.min_cost), _fmt(r.max_cost), _fmt(r.runtime_ms), r.status,
            ])


def read_csv(path) -> ResultsTable:
    def num(text: str) -> float:
        return math.nan if text == "" else float(text)

    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in reader:
            rows.append(ResultRow(
                rec[0], int(rec[1]), int(rec[2]),
                *(num(x) for x in rec[3:9]),
                rec[9],
            ))
    return ResultsTable(rows)


def _stat(values: list[float]) -> dict:
    finite = [v for v in values if not math.isnan(v)]
    if not finite:
        return {"mean": None, "std": None}
    mean = statistics.fmean(finite)
    if any(math.isinf(v) for v in finite):
        return {"mean": None, "std": None}
    return {"mean": round(mean, 6), "std": round(statistics.pstdev(finite), 6)}


METRICS = ("deployment_cost", "disruption_cost", "qos_violation", "min_cost", "max_cost", "runtime_ms")


def aggregate(table: ResultsTable) -> list[dict]:
    """Mean and std per (algo, resched_count), over solved rows only.

    Skipped, timed-out, infeasible and failed rows are counted but left out
    of the means.
    """
    groups: dict[tuple[str, int], list[ResultRow]] = {}
    for r in table.rows:
        groups.setdefault((r.algo, r.resched_count), []).append(r)
    out = []
    for (algo, k), rows in sorted(groups.items()):
        used = [r for r in rows if r.solved]
        if not used:
            log.warning("no solved rows for %s at %d reschedulable; group omitted", algo, k)
            continue
        statuses: dict[str, int] = {}
        for r in rows:
            statuses[r.status] = statuses.get(r.status, 0) + 1
        entry = {"algo": algo, "resched_count": k, "rows": len(rows), "used": len(used), "statuses": statuses}
        for m in METRICS:
            entry[m] = _stat([getattr(r, m) for r in used])
        out.append(entry)
    return out


def write_json(summary: list[dict], path) -> None:
    Path(path).write_text(json.dumps({"groups": summary}, indent=2, sort_keys=True) + "\n")


def summary_schema() -> dict:
    text = resources.files("reorch.schemas").joinpath("summary.schema.json").read_text()
    return json.loads(text)
