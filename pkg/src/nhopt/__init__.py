"""Exact optimization engine, validator and Monte Carlo harness for
neutral-host spectrum sharing: value-maximal assignment of tenant requests
to contiguous PRB windows on shared cell sites, under coverage,
interference, contiguity and single-band constraints."""

from .backend import backend_name
from .domain import (
    Band,
    CellSite,
    DemandModel,
    Grid,
    Request,
    RetryPolicy,
    Scenario,
    SimConfig,
    SpectrumPlan,
    compute_coverage,
    compute_interference,
    generate_grid,
    generate_scenario,
)
from .feasibility import Assignment, Constraint, Violation, check, objective
from .reduction import (
    GroupedScenario,
    Placement,
    count_variables,
    enumerate_placements,
    gcd_group_size,
    group_scenario,
    ungroup_solution,
)
from .rlt import LinearModel, certify_projection, export_lp, linearize, solve_exhaustive
from .solver import Solution, SolveOptions, solve, to_assignment
from .oracle import brute_force, brute_force_raw
from .sim import MetricsRecord, metrics, run_campaign, sweep, timeslot_run

__version__ = "0.1.0"

__all__ = [
    "Assignment", "Band", "CellSite", "Constraint", "DemandModel", "Grid",
    "GroupedScenario", "LinearModel", "MetricsRecord", "Placement", "Request",
    "RetryPolicy", "Scenario", "SimConfig", "Solution", "SolveOptions",
    "SpectrumPlan", "Violation", "backend_name", "brute_force",
    "brute_force_raw", "certify_projection", "check", "compute_coverage",
    "compute_interference", "count_variables", "enumerate_placements",
    "export_lp", "gcd_group_size", "generate_grid", "generate_scenario",
    "group_scenario", "linearize", "metrics", "objective", "run_campaign",
    "solve", "solve_exhaustive", "sweep", "timeslot_run", "to_assignment",
    "ungroup_solution",
]
