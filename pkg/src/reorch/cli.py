"""Command-line entry point.

    reorch gen --preset small --seed 3 -o scenario.json
    reorch solve --scenario scenario.json --algo heuristic -o plan.json
    reorch sweep --config exp.json -o results.csv [--summary summary.json]
    reorch export-lp scenario.json > model.lp

Exit codes: 0 success, 1 bad configuration or input, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from . import __version__
from .baselines import ScoringWeights, recreate_baseline, rolling_update_baseline
from .exact import SearchLimitError, SolveOptions, build_ilp, export_lp, solve_exact
from .harness import ALGOS, ConfigError, ExperimentConfig, aggregate, run_experiment, write_csv, write_json
from .heuristic import HeuristicOptions, heuristic_solve
from .io import ScenarioFormatError, dumps_scenario, load_scenario
from .plan_sim import PlanStructureError, validate_and_execute
from .scenario_gen import PRESETS, GenConfig, GenerationError, generate_scenario, select_reschedulable

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2

log = logging.getLogger("reorch")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is our I/O code
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_gen(args) -> int:
    cfg = GenConfig.from_json(args.config) if args.config else PRESETS[args.preset]
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    _emit(dumps_scenario(generate_scenario(cfg)), args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    if args.resched is not None:
        seed = sc.seed if sc.seed is not None else 0
        sc = sc.with_reschedulable(select_reschedulable(sc, args.resched, random.Random(seed)))
    weights = ScoringWeights.parse(args.weights) if args.weights else ScoringWeights()
    hopts = HeuristicOptions(literal_cluster_argmin=args.cluster_argmin)
    if args.algo == "exact":
        result = solve_exact(sc, SolveOptions(timeout_ms=args.timeout_ms, strategy=args.strategy))
    elif args.algo == "heuristic":
        result = heuristic_solve(sc, "ordered", opts=hopts)
    elif args.algo == "heuristic-random":
        rng = random.Random(args.rng_seed if args.rng_seed is not None else sc.seed)
        result = heuristic_solve(sc, "random", rng, opts=hopts)
    elif args.algo == "rolling":
        result = rolling_update_baseline(sc, weights)
    else:
        result = recreate_baseline(sc, weights)
    if args.output:
        _emit(result.plan.dumps(), args.output)
    if args.trace:
        trace = validate_and_execute(sc, result.plan, require_complete=args.algo != "rolling")
        Path(args.trace).write_text(json.dumps(trace.to_dict(), indent=2) + "\n")
    summary = {"algo": args.algo, **result.summary()}
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    table = run_experiment(cfg)
    write_csv(table, args.output)
    if args.summary:
        write_json(aggregate(table), args.summary)
    return EXIT_OK


def cmd_export_lp(args) -> int:
    sc = load_scenario(args.scenario)
    _emit(export_lp(build_ilp(sc)), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reorch", description="Disruption-free microservice re-orchestration workbench")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a scenario")
    g.add_argument("--preset", choices=sorted(PRESETS), default="small")
    g.add_argument("--config", help="GenConfig JSON (overrides --preset)")
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output", help="scenario JSON path (default stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one algorithm on a scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--algo", choices=ALGOS, required=True)
    s.add_argument("--resched", type=int, help="widen the reschedulable set to this many ms")
    s.add_argument("-o", "--output", help="write the plan JSON here")
    s.add_argument("--trace", help="write the execution trace JSON here")
    s.add_argument("--timeout-ms", type=float, default=60_000.0)
    s.add_argument("--strategy", choices=("interleaved", "two-level"), default="interleaved")
    s.add_argument("--weights", help="baseline scoring weights fit,price,affinity")
    s.add_argument("--rng-seed", type=int, help="seed for heuristic-random (default: scenario seed)")
    s.add_argument("--cluster-argmin", action="store_true", help="pick the least available cluster")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run an experiment grid")
    w.add_argument("--config", required=True)
    w.add_argument("-o", "--output", required=True, help="results CSV path")
    w.add_argument("--summary", help="aggregated JSON path")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export-lp", help="write the ILP in LP format")
    e.add_argument("scenario")
    e.add_argument("-o", "--output", help="LP path (default stdout)")
    e.set_defaults(func=cmd_export_lp)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ScenarioFormatError, PlanStructureError, GenerationError, SearchLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
