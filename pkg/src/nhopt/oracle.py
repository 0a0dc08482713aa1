"""Brute-force reference optimizer for tiny instances.

Ground truth for every other module: legality comes exclusively from the
literal constraint evaluation (the feasibility surface), never from the
production solver's incremental conflict rules. Two modes:

* :func:`brute_force` enumerates every combination of per-request
  placements (or reject) — the reduced decision space.
* :func:`brute_force_raw` enumerates per-request raw (y, x-bitmap)
  options without any structural filtering of the bitmaps, certifying
  that the placement reduction loses nothing. Requires the whole PRB
  space to fit 63 bits.

Both modes delegate the enumeration loop to a compiled batch evaluator
whose verdict is property-tested against ``feasibility.check``.
"""

from __future__ import annotations

import math

import numpy as np

from . import feasibility, kernels
from .domain import Scenario, SimConfig, DemandModel, generate_scenario
from .reduction import Placement, enumerate_placements
from .solver import SolveStats, Solution


class BudgetExceeded(ValueError):
    """The instance is too large for exhaustive enumeration."""


def _window_mask(start: int, length: int) -> np.uint64:
    mask = np.uint64(0)
    for f in range(start, start + length):
        mask |= np.uint64(1) << np.uint64(f)
    return mask


def _enumerate(scenario: Scenario, options: list[list[tuple[int, int, np.uint64]]],
               budget: int):
    """Run the odometer kernel over per-request option lists."""
    combos = math.prod(len(opts) for opts in options) if options else 1
    if combos > budget:
        raise BudgetExceeded(f"{combos} combinations exceed the budget of {budget}")
    try:
        tab = feasibility.packed_tables(scenario)
    except ValueError as exc:
        raise BudgetExceeded(str(exc)) from None
    ptr = [0]
    y_site: list[int] = []
    x_site: list[int] = []
    x_mask: list[np.uint64] = []
    for opts in options:
        for ys, xs, m in opts:
            y_site.append(ys)
            x_site.append(xs)
            x_mask.append(m)
        ptr.append(len(y_site))
    best_digits = np.zeros(max(len(options), 1), dtype=np.int64)
    best_val, found, evaluated = kernels.eval_options_kernel(
        np.array(ptr, dtype=np.int64),
        np.array(y_site, dtype=np.int32) if y_site else np.zeros(0, dtype=np.int32),
        np.array(x_site, dtype=np.int32) if x_site else np.zeros(0, dtype=np.int32),
        np.array(x_mask, dtype=np.uint64) if x_mask else np.zeros(0, dtype=np.uint64),
        tab["weights"], tab["beta_bits"], tab["covers"], tab["demand"],
        tab["alpha_mask"], tab["band_masks"], tab["pair_a"], tab["pair_b"],
        tab["single_band"], best_digits,
    )
    return best_val, found, evaluated, best_digits


def brute_force(scenario: Scenario, budget: int = 10_000_000) -> Solution:
    """Exact optimum by enumerating every per-request placement choice.

    Each combination is tested for feasibility on its induced (x, y)
    assignment; ties resolve to the lexicographically-smallest accepted
    placement sequence, matching the solver's canonical tie-break.
    """
    placements = enumerate_placements(scenario)
    options: list[list[tuple[int, int, np.uint64]]] = []
    decode: list[list[Placement | None]] = []
    for req in scenario.requests:
        opts: list[tuple[int, int, np.uint64]] = []
        dec: list[Placement | None] = []
        for p in placements[req.id]:
            opts.append((p.site, p.site, _window_mask(p.start, p.length)))
            dec.append(p)
        opts.append((-1, 0, np.uint64(0)))  # reject sorts after every placement
        dec.append(None)
        options.append(opts)
        decode.append(dec)

    best_val, found, evaluated, best_digits = _enumerate(scenario, options, budget)
    if not found:
        raise AssertionError("the all-reject combination must always be feasible")
    accepted = []
    for i in range(scenario.num_requests):
        chosen = decode[i][int(best_digits[i])]
        if chosen is not None:
            accepted.append(chosen)
    sol = Solution(accepted=accepted, objective=float(best_val), optimal=True,
                   stats=SolveStats(nodes=int(evaluated)))
    from .solver import to_assignment  # local import to keep layering obvious

    violations = feasibility.check(scenario, to_assignment(sol, scenario))
    if violations:
        raise AssertionError(f"oracle produced an infeasible optimum: {violations}")
    return sol


def brute_force_raw(scenario: Scenario, budget: int = 10_000_000) -> float:
    """Optimal objective over raw per-request (y, x-bitmap) options.

    Per request the options are: reject; any y-site paired with any
    x-bitmap at that site (including empty, gapped, wrong-size or
    unsupported-position bitmaps); and any nonzero x-bitmap at any site
    with y unset. Bitmaps spanning several sites at once are omitted —
    the demand constraint forces x to zero wherever y is zero, so such
    points are never feasible and cannot affect the optimum.
    """
    total = scenario.spectrum.total_prbs
    n_opts = 1 << total
    options = []
    for _ in scenario.requests:
        opts: list[tuple[int, int, np.uint64]] = [(-1, 0, np.uint64(0))]
        for site in scenario.sites:
            for mask in range(n_opts):
                opts.append((site.id, site.id, np.uint64(mask)))
            for mask in range(1, n_opts):
                opts.append((-1, site.id, np.uint64(mask)))
        options.append(opts)
    best_val, found, _, _ = _enumerate(scenario, options, budget)
    if not found:
        raise AssertionError("the all-reject combination must always be feasible")
    return float(best_val)


def random_tiny_config(rng: np.random.Generator) -> SimConfig:
    """A random instance in the tiny regime the oracle is meant for:
    B in 1..3, W in 1..2, 4..8 PRBs per band, I in 1..4, demands 1..4,
    band-loss probability in {0, 0.5}, single-band probability in {0, 1}."""
    return SimConfig(
        rows=int(rng.integers(2, 5)),
        cols=int(rng.integers(2, 5)),
        num_sites=int(rng.integers(1, 4)),
        num_bands=int(rng.integers(1, 3)),
        prbs_per_band=int(rng.integers(4, 9)),
        num_requests=int(rng.integers(1, 5)),
        p_ns=(0.0, 0.5)[int(rng.integers(0, 2))],
        p_sb=(0.0, 1.0)[int(rng.integers(0, 2))],
        group_size=1,
        demand_model=DemandModel(1, 4),
        runs=1,
        seed=int(rng.integers(0, 2**63 - 1)),
    )


def random_tiny_scenario(seed: int, index: int) -> Scenario:
    """Deterministic stream of tiny scenarios for cross-checking."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
    cfg = random_tiny_config(rng)
    return generate_scenario(cfg, run_index=0)
