"""Monte Carlo campaign engine and timeslot-based request lifecycle.

Campaigns generate one scenario per run from independent RNG substreams,
solve each to certified optimality, validate the solution, and aggregate
acceptance / cell-site activation / band-utilization ratios with 95%
normal-approximation confidence intervals. Runs may execute in parallel;
aggregation is indexed by run number so the output is identical for any
worker count.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import feasibility
from .domain import Request, Scenario, SimConfig, generate_scenario, with_requests
from .reduction import Placement, enumerate_placements, group_scenario, ungroup_solution
from .solver import Solution, SolveOptions, solve, solve_placements, to_assignment

log = logging.getLogger(__name__)

CSV_HEADER = ("I,B,W,p_ns,p_sb,K,acceptance_ratio,acceptance_ci,activation_ratio,"
              "activation_ci,band_utilization_ratio,band_ci,mean_solve_time_s,runs")


@dataclass(frozen=True)
class RunMetrics:
    acceptance: float
    activation: float
    band_utilization: float
    prb_fraction: float  # alternative utilization metric, logged only


@dataclass
class MetricsRecord:
    num_requests: int
    num_sites: int
    num_bands: int
    p_ns: float
    p_sb: float
    group_size: int
    acceptance_ratio: float
    acceptance_ci: float
    activation_ratio: float
    activation_ci: float
    band_utilization_ratio: float
    band_ci: float
    mean_solve_time_s: float
    runs: int
    prb_utilization_ratio: float = 0.0
    tainted_runs: int = 0


def metrics(scenario: Scenario, sol: Solution) -> RunMetrics:
    """Single-run ratios: accepted/I, active sites/B, active (site, band)
    pairs/(B*W). A site or band counts as active when at least one PRB of
    the solution lands on it."""
    n_req = scenario.num_requests
    n_sites = scenario.num_sites
    n_bands = scenario.spectrum.num_bands
    total_prbs = scenario.spectrum.total_prbs
    sites = {p.site for p in sol.accepted}
    site_bands = {(p.site, p.band) for p in sol.accepted}
    allocated = sum(p.length for p in sol.accepted)
    return RunMetrics(
        acceptance=len(sol.accepted) / n_req if n_req else 0.0,
        activation=len(sites) / n_sites,
        band_utilization=len(site_bands) / (n_sites * n_bands),
        prb_fraction=allocated / (n_sites * total_prbs) if total_prbs else 0.0,
    )


def _solve_run(cfg: SimConfig, run_index: int) -> tuple[int, RunMetrics, float, bool]:
    scenario = generate_scenario(cfg, run_index)
    opts = SolveOptions(group_size=cfg.group_size)
    sol = solve(scenario, opts)
    violations = feasibility.check(scenario, to_assignment(sol, scenario))
    if violations:
        raise AssertionError(
            f"run {run_index}: solver output failed validation: {violations[:3]}")
    return run_index, metrics(scenario, sol), sol.stats.wall_time_s, sol.optimal


def _ci_half_width(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return 1.96 * float(np.std(values, ddof=1)) / math.sqrt(len(values))


def run_campaign(cfg: SimConfig, jobs: int = 1) -> MetricsRecord:
    """Solve cfg.runs independent scenarios and aggregate the ratios.

    Every run is solved to certified optimality and validated; a run that
    somehow returns a non-optimal solution taints the campaign (counted in
    ``tainted_runs`` and logged). Deterministic for a fixed seed,
    regardless of ``jobs``.
    """
    results: dict[int, tuple[RunMetrics, float, bool]] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for run_index, m, wall, optimal in pool.map(
                    _solve_run, [cfg] * cfg.runs, range(cfg.runs)):
                results[run_index] = (m, wall, optimal)
    else:
        for run_index in range(cfg.runs):
            idx, m, wall, optimal = _solve_run(cfg, run_index)
            results[idx] = (m, wall, optimal)

    ordered = [results[i] for i in range(cfg.runs)]
    acc = np.array([m.acceptance for m, _, _ in ordered])
    act = np.array([m.activation for m, _, _ in ordered])
    band = np.array([m.band_utilization for m, _, _ in ordered])
    prb = np.array([m.prb_fraction for m, _, _ in ordered])
    times = np.array([w for _, w, _ in ordered])
    tainted = sum(1 for _, _, optimal in ordered if not optimal)
    if tainted:
        log.warning("campaign tainted: %d/%d runs returned non-optimal solutions",
                    tainted, cfg.runs)

    record = MetricsRecord(
        num_requests=cfg.num_requests,
        num_sites=cfg.num_sites,
        num_bands=cfg.num_bands,
        p_ns=cfg.p_ns,
        p_sb=cfg.p_sb,
        group_size=cfg.group_size,
        acceptance_ratio=float(acc.mean()),
        acceptance_ci=_ci_half_width(acc),
        activation_ratio=float(act.mean()),
        activation_ci=_ci_half_width(act),
        band_utilization_ratio=float(band.mean()),
        band_ci=_ci_half_width(band),
        mean_solve_time_s=float(times.mean()),
        runs=cfg.runs,
        prb_utilization_ratio=float(prb.mean()),
        tainted_runs=tainted,
    )
    log.info("campaign I=%d B=%d: acceptance %.4f, activation %.4f, band %.4f "
             "(allocated-PRB fraction %.4f)",
             cfg.num_requests, cfg.num_sites, record.acceptance_ratio,
             record.activation_ratio, record.band_utilization_ratio,
             record.prb_utilization_ratio)
    return record


SWEEP_AXES = ("I", "p_ns", "p_sb", "W", "K")

_AXIS_FIELD = {"I": "num_requests", "p_ns": "p_ns", "p_sb": "p_sb",
               "W": "num_bands", "K": "group_size"}


def sweep(cfg: SimConfig, axis: str, values: list, jobs: int = 1) -> list[MetricsRecord]:
    """One campaign per axis value, holding everything else fixed."""
    if axis not in _AXIS_FIELD:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ValueError("sweep values must be non-empty")
    records = []
    for value in values:
        point = dataclasses.replace(cfg, **{_AXIS_FIELD[axis]: value})
        records.append(run_campaign(point, jobs=jobs))
    return records


def records_to_csv(records: list[MetricsRecord], include_timing: bool = True) -> str:
    lines = [CSV_HEADER]
    for r in records:
        timing = r.mean_solve_time_s if include_timing else 0.0
        lines.append(
            f"{r.num_requests},{r.num_sites},{r.num_bands},{r.p_ns:.6f},{r.p_sb:.6f},"
            f"{r.group_size},{r.acceptance_ratio:.6f},{r.acceptance_ci:.6f},"
            f"{r.activation_ratio:.6f},{r.activation_ci:.6f},"
            f"{r.band_utilization_ratio:.6f},{r.band_ci:.6f},{timing:.6f},{r.runs}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Timeslot engine

EVENT_KINDS = ("request_arrived", "slot_solved", "request_admitted",
               "request_rejected_kept", "request_rejected_dropped", "service_active")


@dataclass(frozen=True)
class TimeslotEvent:
    time: float
    kind: str
    request: int | None


@dataclass
class TimeslotTrace:
    events: list[TimeslotEvent]


def timeslot_run(arrivals: list[tuple[float, Request]], delta: float,
                 scenario_base: Scenario, activation_latency: float,
                 end_time: float | None = None,
                 solve_options: SolveOptions = SolveOptions()) -> TimeslotTrace:
    """Batch admission every ``delta`` seconds over a shared infrastructure.

    Requests arriving at or before a slot boundary t = k*delta are jointly
    optimized there against the spectrum still unallocated (admitted
    allocations persist; there is no lease expiry). Admitted requests
    become service_active exactly ``activation_latency`` seconds after
    admission; rejected ones stay buffered or are dropped per their retry
    policy. Slots run until ``end_time`` (default: the first slot boundary
    at or after the last arrival).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if activation_latency < 0:
        raise ValueError("activation_latency must be non-negative")
    times = [t for t, _ in arrivals]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("arrivals must be sorted by time")
    if end_time is None:
        end_time = delta * math.ceil(times[-1] / delta) if arrivals else 0.0

    events: list[TimeslotEvent] = []
    buffered: list[tuple[float, Request]] = []
    occupied: list[Placement] = []
    next_arrival = 0
    slot = 1
    while slot * delta <= end_time + 1e-9:
        now = slot * delta
        while next_arrival < len(arrivals) and arrivals[next_arrival][0] <= now:
            t_arr, req = arrivals[next_arrival]
            events.append(TimeslotEvent(t_arr, "request_arrived", req.id))
            buffered.append((t_arr, req))
            next_arrival += 1
        if buffered:
            outstanding = [req for _, req in buffered]
            sub = with_requests(
                scenario_base,
                [dataclasses.replace(r, id=pos) for pos, r in enumerate(outstanding)],
            )
            sub_sol = solve_placements(sub, enumerate_placements(sub),
                                       solve_options, fixed=occupied)
            events.append(TimeslotEvent(now, "slot_solved", None))
            admitted_pos = {p.request for p in sub_sol.accepted}
            still: list[tuple[float, Request]] = []
            for pos, (t_arr, req) in enumerate(buffered):
                if pos in admitted_pos:
                    events.append(TimeslotEvent(now, "request_admitted", req.id))
                    events.append(TimeslotEvent(now + activation_latency,
                                                "service_active", req.id))
                elif req.retry_policy.value == "drop":
                    events.append(TimeslotEvent(now, "request_rejected_dropped", req.id))
                else:
                    events.append(TimeslotEvent(now, "request_rejected_kept", req.id))
                    still.append((t_arr, req))
            for p in sub_sol.accepted:
                original = outstanding[p.request]
                occupied.append(dataclasses.replace(p, request=original.id))
            buffered = still
        slot += 1

    # any arrivals after the final slot still enter the trace
    while next_arrival < len(arrivals):
        t_arr, req = arrivals[next_arrival]
        events.append(TimeslotEvent(t_arr, "request_arrived", req.id))
        next_arrival += 1

    events.sort(key=lambda e: e.time)
    return TimeslotTrace(events=events)


def trace_to_jsonl(trace: TimeslotTrace) -> str:
    lines = [json.dumps({"time": e.time, "kind": e.kind, "request": e.request})
             for e in trace.events]
    return "\n".join(lines) + ("\n" if lines else "")


def arrivals_from_json(text: str) -> list[tuple[float, Request]]:
    """Parse an arrivals document: {"arrivals": [{"time": t, "request": {...}}]}.

    Request objects use the same field names as scenario requests; ids must
    be unique across arrivals.
    """
    from .domain import RetryPolicy, SchemaError, _as_int, _as_number, _require_keys

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"arrivals: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SchemaError("arrivals: top level must be an object")
    _require_keys(doc, {"arrivals"}, {"arrivals"}, "arrivals")
    out: list[tuple[float, Request]] = []
    seen_ids = set()
    for pos, entry in enumerate(doc["arrivals"]):
        where = f"arrivals[{pos}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        _require_keys(entry, {"time", "request"}, {"time", "request"}, where)
        t = _as_number(entry["time"], f"{where}.time")
        r = entry["request"]
        if not isinstance(r, dict):
            raise SchemaError(f"{where}.request: expected an object")
        _require_keys(r, {"id", "tenant", "area", "demand", "weight", "retry_policy"},
                      {"id", "area", "demand"}, f"{where}.request")
        policy_raw = r.get("retry_policy", RetryPolicy.KEEP_IN_BUFFER.value)
        try:
            policy = RetryPolicy(policy_raw)
        except ValueError:
            raise SchemaError(f"{where}.request.retry_policy: invalid value "
                              f"{policy_raw!r}") from None
        req = Request(
            id=_as_int(r["id"], f"{where}.request.id"),
            tenant=_as_int(r.get("tenant", 0), f"{where}.request.tenant"),
            area=_as_int(r["area"], f"{where}.request.area"),
            demand=_as_int(r["demand"], f"{where}.request.demand"),
            weight=_as_number(r.get("weight", 1.0), f"{where}.request.weight"),
            retry_policy=policy,
        )
        if req.id in seen_ids:
            raise SchemaError(f"{where}.request.id: duplicate id {req.id}")
        seen_ids.add(req.id)
        out.append((t, req))
    return out
