"""Command-line interface tying the modules into reproducible experiments.

Every subcommand is a pure function of its input files and flags; seeds
are always explicit. Exit codes: 0 success, 1 validation or mismatch
failure, 2 usage error or malformed input.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import feasibility, oracle, rlt, sim, solver
from .domain import (
    SchemaError,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    simconfig_from_json,
)
from .reduction import enumerate_placements, gcd_group_size, group_scenario
from .solver import SolveOptions, solution_from_json, solution_to_json


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _group_size_arg(value: str) -> int:
    if value == "auto":
        return 0
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {value!r}")
    if k < 1:
        raise argparse.ArgumentTypeError("group size must be >= 1, or 'auto'")
    return k


def _cmd_gen_scenario(args) -> int:
    cfg = simconfig_from_json(_read(args.config))
    scenario = generate_scenario(cfg, args.run_index)
    _write(args.output, scenario_to_json(scenario))
    return 0


def _cmd_solve(args) -> int:
    scenario = scenario_from_json(_read(args.scenario))
    opts = SolveOptions(time_limit=args.time_limit, order=args.order,
                        group_size=args.group_size, round_demands=args.round_demands)
    sol = solver.solve(scenario, opts)
    _write(args.output, solution_to_json(sol, include_timing=not args.no_timing))
    return 0


def _cmd_validate(args) -> int:
    scenario = scenario_from_json(_read(args.scenario))
    sol = solution_from_json(_read(args.solution))
    violations = feasibility.check(scenario, solver.to_assignment(sol, scenario))
    for v in violations:
        print(f"{v.constraint.value}: witness {v.witness}")
    if violations:
        print(f"{len(violations)} violation(s)")
        return 1
    print("ok: solution is feasible")
    return 0


def _cmd_export_lp(args) -> int:
    scenario = scenario_from_json(_read(args.scenario))
    if args.group_size != 1:
        k = args.group_size or gcd_group_size(scenario.requests)
        scenario = group_scenario(scenario, k, round_up=args.round_demands).grouped
    model = rlt.linearize(scenario)
    rlt.export_lp(model, args.output)
    counts = model.counts()
    print(f"wrote {args.output}: {counts['variables']} variables, "
          f"{counts['constraints']} constraints", file=sys.stderr)
    return 0


def _cmd_oracle_check(args) -> int:
    matched = 0
    for i in range(args.instances):
        scenario = oracle.random_tiny_scenario(args.seed, i)
        got = solver.solve(scenario)
        want = oracle.brute_force(scenario, budget=args.budget)
        same_objective = got.objective == want.objective
        same_solution = (sorted(got.accepted, key=lambda p: p.request)
                         == sorted(want.accepted, key=lambda p: p.request))
        if not (same_objective and same_solution):
            print(f"mismatch on instance {i}: solver {got.objective} "
                  f"vs oracle {want.objective}", file=sys.stderr)
            sys.stdout.write(scenario_to_json(scenario))
            return 1
        matched += 1
    print(f"{matched}/{args.instances} matched")
    return 0


def _parse_sweep(value: str) -> tuple[str, list]:
    if "=" not in value:
        raise argparse.ArgumentTypeError("expected axis=v1,v2,... e.g. I=5,10,20")
    axis, _, raw = value.partition("=")
    if axis not in sim.SWEEP_AXES:
        raise argparse.ArgumentTypeError(f"axis must be one of {sim.SWEEP_AXES}")
    cast = float if axis in ("p_ns", "p_sb") else int
    try:
        values = [cast(v) for v in raw.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sweep values {raw!r}")
    if not values:
        raise argparse.ArgumentTypeError("sweep needs at least one value")
    return axis, values


def _cmd_simulate(args) -> int:
    cfg = simconfig_from_json(_read(args.config))
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("NEUTRAL_HOST_JOBS", "1"))
    if args.sweep is not None:
        axis, values = args.sweep
        records = sim.sweep(cfg, axis, values, jobs=jobs)
    else:
        records = [sim.run_campaign(cfg, jobs=jobs)]
    _write(args.output, sim.records_to_csv(records, include_timing=not args.no_timing))
    return 0


def _cmd_timeslot(args) -> int:
    arrivals = sim.arrivals_from_json(_read(args.arrivals))
    scenario = scenario_from_json(_read(args.scenario))
    trace = sim.timeslot_run(arrivals, args.delta, scenario, args.latency,
                             end_time=args.end_time)
    _write(args.output, sim.trace_to_jsonl(trace))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhopt",
        description="Exact neutral-host spectrum allocation: solve, validate, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenario", help="generate a scenario from a SimConfig JSON")
    p.add_argument("config", help="SimConfig JSON path")
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_gen_scenario)

    p = sub.add_parser("solve", help="solve a scenario to certified optimality")
    p.add_argument("scenario", help="Scenario JSON path")
    p.add_argument("--group-size", type=_group_size_arg, default=1,
                   help="PRB group size K, or 'auto' for the GCD of demands")
    p.add_argument("--round-demands", action="store_true",
                   help="round demands up to whole blocks when K does not divide them")
    p.add_argument("--time-limit", type=float, default=0.0,
                   help="seconds; 0 disables (default)")
    p.add_argument("--order", choices=("most_constrained_first", "input_order"),
                   default="most_constrained_first")
    p.add_argument("--no-timing", action="store_true",
                   help="zero out wall-time fields for byte-comparable output")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("validate", help="check a solution against a scenario")
    p.add_argument("scenario")
    p.add_argument("solution")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("export-lp", help="write the linearized 0-1 program as an LP file")
    p.add_argument("scenario")
    p.add_argument("--group-size", type=_group_size_arg, default=1)
    p.add_argument("--round-demands", action="store_true")
    p.add_argument("-o", "--output", required=True, help="LP file path")
    p.set_defaults(func=_cmd_export_lp)

    p = sub.add_parser("oracle-check",
                       help="cross-check the solver against brute force on random tiny instances")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=10_000_000)
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("simulate", help="run a Monte Carlo campaign, emit CSV")
    p.add_argument("config", help="SimConfig JSON path")
    p.add_argument("--sweep", type=_parse_sweep, default=None,
                   help="axis=v1,v2,... with axis in I, p_ns, p_sb, W, K")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel runs (default: NEUTRAL_HOST_JOBS or 1)")
    p.add_argument("--no-timing", action="store_true",
                   help="zero the timing column for byte-comparable output")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("timeslot", help="replay arrivals through the timeslot engine")
    p.add_argument("arrivals", help="arrivals JSON path")
    p.add_argument("--scenario", required=True, help="base Scenario JSON path")
    p.add_argument("--delta", type=float, required=True, help="slot length in seconds")
    p.add_argument("--latency", type=float, required=True,
                   help="activation latency in seconds")
    p.add_argument("--end-time", type=float, default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_timeslot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
