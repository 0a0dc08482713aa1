"""Ground-truth feasibility validator.

Evaluates the seven constraint families literally over an explicit
(x, y) assignment: sums of 0-1 terms, with the quadratic contiguity and
single-band constraints computed directly as products. No linearization
and no solver conflict logic is shared with any other module, so this is
the surface everything else is verified against.

Constraint families:
  C1  each request served by at most one site
  C2  per (site, prb): at most one request, and only on supported bands
  C3  interfering site pairs never reuse a PRB
  C4  allocated PRBs at the serving site equal the demand exactly
  C5  no allocation at sites that do not cover the request's area
  C6  the allocation is one contiguous same-band run (adjacent-pair count)
  C7  single-band sites use at most one band
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import Scenario


class Constraint(Enum):
    C1_ONE_SITE = "C1_one_site"
    C2_OVERPROVISION = "C2_overprovision"
    C3_INTERFERENCE = "C3_interference"
    C4_DEMAND = "C4_demand"
    C5_LOCALITY = "C5_locality"
    C6_CONTIGUITY = "C6_contiguity"
    C7_SINGLE_BAND = "C7_single_band"


_ORDER = {c: i for i, c in enumerate(Constraint)}


@dataclass(frozen=True)
class Violation:
    constraint: Constraint
    witness: tuple[int, ...]


@dataclass
class Assignment:
    """A possibly-infeasible candidate: y over (request, site), x over
    (request, site, global prb)."""

    y: np.ndarray  # bool (I, B)
    x: np.ndarray  # bool (I, B, F)

    @classmethod
    def empty(cls, scenario: Scenario) -> "Assignment":
        i, b, f = scenario.num_requests, scenario.num_sites, scenario.spectrum.total_prbs
        return cls(y=np.zeros((i, b), dtype=bool), x=np.zeros((i, b, f), dtype=bool))


@dataclass(frozen=True)
class ScenarioTables:
    """Dense numpy views of the scenario indicators used by the validator."""

    beta: np.ndarray        # bool (B, F): site supports the band owning prb f
    covers: np.ndarray      # bool (I, B): site covers the request's area
    alpha: np.ndarray       # bool (F-1,): prbs (f, f+1) adjacent within one band
    demand: np.ndarray      # int64 (I,)
    weight: np.ndarray      # float64 (I,)
    single_band: np.ndarray  # bool (B,)
    pairs: np.ndarray       # int64 (P, 2): unordered interfering pairs
    band_of: np.ndarray     # int64 (F,)


def tables(scenario: Scenario) -> ScenarioTables:
    plan = scenario.spectrum
    n_sites, n_req = scenario.num_sites, scenario.num_requests
    total = plan.total_prbs

    band_of = np.empty(total, dtype=np.int64)
    for band in plan.bands:
        band_of[list(plan.band_range(band.id))] = band.id

    beta = np.zeros((n_sites, total), dtype=bool)
    for site in scenario.sites:
        for band in plan.bands:
            if site.band_supported[band.id]:
                beta[site.id, plan.band_offset(band.id):plan.band_offset(band.id) + band.prb_count] = True

    covers = np.zeros((n_req, n_sites), dtype=bool)
    for req in scenario.requests:
        for site in scenario.sites:
            covers[req.id, site.id] = req.area in site.coverage

    alpha = band_of[:-1] == band_of[1:] if total > 1 else np.zeros(0, dtype=bool)

    return ScenarioTables(
        beta=beta,
        covers=covers,
        alpha=alpha,
        demand=np.array([r.demand for r in scenario.requests], dtype=np.int64),
        weight=np.array([r.weight for r in scenario.requests], dtype=np.float64),
        single_band=np.array([s.single_band for s in scenario.sites], dtype=bool),
        pairs=np.array(scenario.interference_pairs(), dtype=np.int64).reshape(-1, 2),
        band_of=band_of,
    )


def check(scenario: Scenario, asg: Assignment) -> list[Violation]:
    """All constraint violations of ``asg``; empty iff feasible.

    Exhaustive rather than fail-fast, and a pure function of its inputs:
    the result is a deterministically ordered set.
    """
    t = tables(scenario)
    n_req, n_sites, total = scenario.num_requests, scenario.num_sites, scenario.spectrum.total_prbs
    if asg.y.shape != (n_req, n_sites) or asg.x.shape != (n_req, n_sites, total):
        raise ValueError(
            f"assignment shape mismatch: y {asg.y.shape}, x {asg.x.shape} for "
            f"I={n_req}, B={n_sites}, F={total}"
        )
    y = asg.y.astype(np.int64)
    x = asg.x.astype(np.int64)
    out: list[Violation] = []

    # C1: sum_b y[i, b] <= 1
    for i in np.flatnonzero(y.sum(axis=1) > 1):
        out.append(Violation(Constraint.C1_ONE_SITE, (int(i),)))

    # C2: sum_i x[i, b, f] <= beta[b, f]
    counts = x.sum(axis=0)
    for b, f in np.argwhere(counts > t.beta.astype(np.int64)):
        out.append(Violation(Constraint.C2_OVERPROVISION, (int(b), int(f))))

    # C3: per interfering pair and prb, sum_i (x[i,a,f]*beta + x[i,b,f]*beta) <= 1
    masked = x * t.beta[np.newaxis, :, :]
    per_site = masked.sum(axis=0)
    for a, b in t.pairs:
        for f in np.flatnonzero(per_site[a] + per_site[b] > 1):
            out.append(Violation(Constraint.C3_INTERFERENCE, (int(a), int(b), int(f))))

    # C4: sum_f x[i,b,f]*beta*covers == demand_i * y[i,b]
    lhs = (masked * t.covers[:, :, np.newaxis]).sum(axis=2)
    rhs = t.demand[:, np.newaxis] * y
    for i, b in np.argwhere(lhs != rhs):
        out.append(Violation(Constraint.C4_DEMAND, (int(i), int(b))))

    # C5: per request, all y and x mass at non-covering sites is zero
    stray = ~t.covers
    mass = (y * stray).sum(axis=1) + (x.sum(axis=2) * stray).sum(axis=1)
    for i in np.flatnonzero(mass > 0):
        out.append(Violation(Constraint.C5_LOCALITY, (int(i),)))

    # C6: sum_f x[i,b,f]*x[i,b,f+1]*alpha == (demand_i - 1) * y[i,b]
    if total > 1:
        adjacent = (x[:, :, :-1] * x[:, :, 1:] * t.alpha[np.newaxis, np.newaxis, :]).sum(axis=2)
    else:
        adjacent = np.zeros((n_req, n_sites), dtype=np.int64)
    rhs6 = (t.demand - 1)[:, np.newaxis] * y
    for i, b in np.argwhere(adjacent != rhs6):
        out.append(Violation(Constraint.C6_CONTIGUITY, (int(i), int(b))))

    # C7: single-band sites: (sum in band) * (sum outside band) == 0
    site_prbs = x.sum(axis=0)
    for b in np.flatnonzero(t.single_band):
        per_band = np.array([site_prbs[b][t.band_of == w].sum()
                             for w in range(scenario.spectrum.num_bands)], dtype=np.int64)
        grand = per_band.sum()
        for w in np.flatnonzero(per_band * (grand - per_band) > 0):
            out.append(Violation(Constraint.C7_SINGLE_BAND, (int(b), int(w))))

    out.sort(key=lambda v: (_ORDER[v.constraint], v.witness))
    return out


def objective(scenario: Scenario, asg: Assignment) -> float:
    """Cumulative value of the assignment: sum over (i, b) of y[i,b] * w_i."""
    t = tables(scenario)
    return float((asg.y.astype(np.float64) * t.weight[:, np.newaxis]).sum())


def packed_tables(scenario: Scenario) -> dict:
    """Scenario indicators packed into single-word bitmaps for the batch
    evaluation kernels. Requires the global PRB space to fit 63 bits, which
    holds for the tiny certification instances these kernels serve."""
    total = scenario.spectrum.total_prbs
    if total > 63:
        raise ValueError(f"batch evaluation requires <= 63 PRBs, got {total}")
    t = tables(scenario)
    n_sites = scenario.num_sites
    beta_bits = np.zeros(n_sites, dtype=np.uint64)
    for b in range(n_sites):
        for f in range(total):
            if t.beta[b, f]:
                beta_bits[b] |= np.uint64(1) << np.uint64(f)
    alpha_mask = np.uint64(0)
    for f in range(total - 1):
        if t.alpha[f]:
            alpha_mask |= np.uint64(1) << np.uint64(f)
    band_masks = np.zeros(scenario.spectrum.num_bands, dtype=np.uint64)
    for band in scenario.spectrum.bands:
        for f in scenario.spectrum.band_range(band.id):
            band_masks[band.id] |= np.uint64(1) << np.uint64(f)
    pairs = t.pairs
    return {
        "beta_bits": beta_bits,
        "covers": t.covers.astype(np.uint8),
        "demand": t.demand,
        "alpha_mask": alpha_mask,
        "band_masks": band_masks,
        "pair_a": pairs[:, 0].astype(np.int32) if len(pairs) else np.zeros(0, dtype=np.int32),
        "pair_b": pairs[:, 1].astype(np.int32) if len(pairs) else np.zeros(0, dtype=np.int32),
        "single_band": t.single_band.astype(np.uint8),
        "weights": t.weight,
    }
