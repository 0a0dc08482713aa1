"""Search-space reduction: placement enumeration and PRB grouping.

Placement enumeration materializes only structurally feasible decisions
(covering site, supported band, window that fits the band), which is the
variable-reduction step; grouping coarsens the PRB space by a factor K,
either the GCD of all demands or a fixed block size with demands rounded
up to whole blocks.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .domain import Band, Request, Scenario, SpectrumPlan


@dataclass(frozen=True)
class Placement:
    """One candidate decision: serve ``request`` at ``site`` with
    ``length`` contiguous PRBs of ``band`` starting at global index
    ``start``."""

    request: int
    site: int
    band: int
    start: int
    length: int


@dataclass(frozen=True)
class GroupedScenario:
    """A scenario recast into blocks of ``k`` PRBs.

    ``grouped`` is a regular scenario whose spectrum holds
    floor(F_band / k) blocks per band (trailing remainder PRBs are
    stranded) and whose demands are expressed in blocks. When demands are
    not multiples of k the caller must have opted into rounding; the
    per-request over-allocation in raw PRBs is recorded.
    """

    base: Scenario
    k: int
    grouped: Scenario
    demand_blocks: tuple[int, ...]
    over_allocation: tuple[int, ...]

    @property
    def rounded(self) -> bool:
        return any(v > 0 for v in self.over_allocation)

    def effective_base(self) -> Scenario:
        """Base scenario with demands rounded up to whole blocks (equal to
        ``base`` when every demand is a multiple of k); ungrouped solutions
        validate against this."""
        if not self.rounded:
            return self.base
        requests = tuple(
            dataclasses.replace(r, demand=self.demand_blocks[r.id] * self.k)
            for r in self.base.requests
        )
        return dataclasses.replace(self.base, requests=requests)

    def raw_window(self, band: int, start_block: int, blocks: int) -> tuple[int, int]:
        """Map a grouped window to (raw global start, raw length)."""
        block_in_band = start_block - self.grouped.spectrum.band_offset(band)
        raw_start = self.base.spectrum.band_offset(band) + block_in_band * self.k
        return raw_start, blocks * self.k


def enumerate_placements(scenario: Scenario) -> dict[int, list[Placement]]:
    """Every structurally feasible placement, per request.

    A placement exists for (request, site, band, start) iff the site
    covers the request's area, supports the band, and the demand-length
    window fits inside the band. Requests mapping to an empty list are
    unservable. Lists are sorted by (site, band, start).
    """
    plan = scenario.spectrum
    out: dict[int, list[Placement]] = {}
    for req in scenario.requests:
        cands: list[Placement] = []
        for site in scenario.sites:
            if req.area not in site.coverage:
                continue
            for band in plan.bands:
                if not site.band_supported[band.id]:
                    continue
                offset = plan.band_offset(band.id)
                for start in range(band.prb_count - req.demand + 1):
                    cands.append(Placement(req.id, site.id, band.id,
                                           offset + start, req.demand))
        out[req.id] = cands
    return out


def count_variables(num_requests: int, num_sites: int, num_prbs: int) -> int:
    """Size of the full 0-1 variable space: I*B*F x-variables plus I*B
    y-variables."""
    if num_requests < 1 or num_sites < 1 or num_prbs < 1:
        raise ValueError("counts must be positive")
    return num_requests * num_sites * num_prbs + num_requests * num_sites


def gcd_group_size(requests: list[Request] | tuple[Request, ...]) -> int:
    """Greatest common divisor of all demands."""
    if not requests:
        raise ValueError("cannot compute a group size for zero requests")
    return math.gcd(*(r.demand for r in requests))


def group_scenario(scenario: Scenario, k: int, round_up: bool = False) -> GroupedScenario:
    """Recast the scenario into blocks of ``k`` PRBs.

    Demands must be multiples of k unless ``round_up`` is set, in which
    case each demand becomes ceil(demand / k) blocks and the over-allocated
    raw PRBs are recorded.
    """
    if k < 1:
        raise ValueError(f"group size must be >= 1, got {k}")
    blocks = []
    over = []
    for req in scenario.requests:
        if req.demand % k == 0:
            n = req.demand // k
        elif round_up:
            n = math.ceil(req.demand / k)
        else:
            raise ValueError(
                f"request {req.id}: demand {req.demand} is not a multiple of {k} "
                "(pass round_up to round demands up to whole blocks)"
            )
        blocks.append(n)
        over.append(n * k - req.demand)

    grouped_plan = SpectrumPlan(tuple(
        Band(b.id, b.prb_count // k) for b in scenario.spectrum.bands
    ))
    grouped_requests = tuple(
        dataclasses.replace(r, demand=blocks[r.id]) for r in scenario.requests
    )
    grouped = dataclasses.replace(scenario, spectrum=grouped_plan, requests=grouped_requests)
    return GroupedScenario(
        base=scenario,
        k=k,
        grouped=grouped,
        demand_blocks=tuple(blocks),
        over_allocation=tuple(over),
    )


def ungroup_placement(placement: Placement, grouped: GroupedScenario) -> Placement:
    """Expand a grouped-space placement back to raw PRBs."""
    raw_start, raw_len = grouped.raw_window(placement.band, placement.start, placement.length)
    return Placement(placement.request, placement.site, placement.band, raw_start, raw_len)


def ungroup_solution(gsol, grouped: GroupedScenario):
    """Map a solution over the grouped scenario back to raw PRB windows.

    Each block expands to its k raw PRBs; the result is feasible for
    ``grouped.effective_base()`` (and for the base scenario itself when
    every demand is a multiple of k). Works on any solution-like object
    with an ``accepted`` list of placements.
    """
    accepted = [ungroup_placement(p, grouped) for p in gsol.accepted]
    return dataclasses.replace(gsol, accepted=accepted)
