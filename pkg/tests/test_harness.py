import json
import math

import jsonschema
import pytest

from reorch.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    ResultRow,
    ResultsTable,
    aggregate,
    read_csv,
    run_experiment,
    summary_schema,
    sweep_scenario,
    worker_count,
    write_csv,
    write_json,
)
from reorch.plan_sim import validate_and_execute, package_result, Status


@pytest.fixture(scope="module")
def small_table():
    cfg = ExperimentConfig(sweep=(10, 20), algos=("exact", "heuristic", "rolling", "recreate"), repetitions=3,
                           keep_plans=True)
    return cfg, run_experiment(cfg, workers=1)


def test_row_count_and_skips(small_table):
    cfg, table = small_table
    assert len(table) == 4 * 2 * 3
    exact = table.select("exact")
    assert {r.status for r in exact if r.resched_count == 20} == {"skipped"}
    assert all(r.status in ("Optimal", "Infeasible") for r in exact if r.resched_count == 10)


def test_recreate_mean_disruption_equals_k(small_table):
    _, table = small_table
    for g in aggregate(table):
        if g["algo"] == "recreate":
            assert g["disruption_cost"]["mean"] == g["resched_count"]


def test_csv_header_and_round_trip(small_table, tmp_path):
    _, table = small_table
    path = tmp_path / "r.csv"
    write_csv(table, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert path.read_text().splitlines()[0] == (
        "algo,seed,resched_count,deployment_cost,disruption_cost,qos_violation,min_cost,max_cost,runtime_ms,status"
    )
    back = read_csv(path)
    assert len(back) == len(table)
    for a, b in zip(back.rows, table.sorted().rows):
        assert (a.algo, a.seed, a.resched_count, a.status) == (b.algo, b.seed, b.resched_count, b.status)
        for f in ("deployment_cost", "disruption_cost", "qos_violation", "min_cost", "max_cost"):
            x, y = getattr(a, f), getattr(b, f)
            assert (math.isnan(x) and math.isnan(y)) or x == pytest.approx(y, abs=5e-7)


def test_rows_sorted(small_table):
    _, table = small_table
    keys = [r.sort_key() for r in table.rows]
    assert keys == sorted(keys)


def test_summary_validates(small_table, tmp_path):
    _, table = small_table
    path = tmp_path / "s.json"
    write_json(aggregate(table), path)
    jsonschema.validate(json.loads(path.read_text()), summary_schema())


def test_rows_match_reexecution(small_table):
    cfg, table = small_table
    for r in table.rows:
        if r.plan is None or not r.solved:
            continue
        sc = sweep_scenario(cfg, r.seed, r.resched_count)
        res = package_result(sc, r.plan, Status.FEASIBLE, 0.0, require_complete=r.algo != "rolling")
        assert res.deployment_cost == r.deployment_cost
        assert res.disruption_cost == r.disruption_cost
        assert res.qos_violation == r.qos_violation


def test_aggregate_constant_group():
    rows = [ResultRow("heuristic", s, 10, 3.0, 0, 0.0, 1.0, 4.0, 0.0, "Feasible") for s in range(50)]
    (g,) = aggregate(ResultsTable(rows))
    assert g["deployment_cost"] == {"mean": 3.0, "std": 0.0}


def test_aggregate_skips_unsolved_and_empty_groups():
    nan = math.nan
    rows = [
        ResultRow("exact", 0, 10, 5.0, 0, 0.0, 1.0, 6.0, 0.0, "Optimal"),
        ResultRow("exact", 1, 10, nan, nan, nan, 1.0, 6.0, 0.0, "Timeout"),
        ResultRow("exact", 0, 20, nan, nan, nan, 1.0, 6.0, 0.0, "skipped"),
    ]
    (g,) = aggregate(ResultsTable(rows))
    assert g["rows"] == 2 and g["used"] == 1 and g["statuses"] == {"Optimal": 1, "Timeout": 1}


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(repetitions=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(algos=("magic",))
    with pytest.raises(ConfigError):
        ExperimentConfig(sweep=(5,))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"preset": "nope"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": 1})
    cfg = ExperimentConfig.from_dict({"preset": "small-r4", "repetitions": 2, "weights": "1,2,3", "timeout_ms": 500})
    assert cfg.base.cluster_count == 4 and cfg.weights.w_price == 2 and cfg.timeout_for("exact") == 500


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("REORCH_THREADS", "3")
    assert worker_count(50) == 3 and worker_count(2) == 2
    monkeypatch.setenv("REORCH_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count(5)


def test_pool_matches_serial(monkeypatch):
    cfg = ExperimentConfig(sweep=(10,), algos=("heuristic", "recreate"), repetitions=3)
    assert run_experiment(cfg, workers=2).rows == run_experiment(cfg, workers=1).rows
