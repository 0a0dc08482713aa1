"""Exact branch-and-bound solver over per-request placement decisions.

The search branches on one request per node — by default the undecided
request with the fewest currently-legal placements (most constrained
first, re-evaluated at every node), trying each conflict-free placement
and then an explicit reject branch — and prunes with the admissible bound
"current value + weights of undecided requests that can still be placed".
Conflict state is tracked incrementally: per-site PRB occupancy bitmaps
checked against the site and its interference neighbors, plus
per-(site, band) counters for single-band sites.

Equal-objective optima tie-break to the lexicographically smallest
(request id, site id, band id, start) sequence, with rejection sorting
after any placement. After the optimal value is certified, the canonical
solution is extracted by locking requests in id order: for each request,
the smallest choice that still extends to an optimal completion is found
by target-value searches over the remaining requests; a known optimal
completion (witness) caps how many candidates need testing. With
``order='input_order'`` the main search itself visits decision vectors in
lexicographic order and its incumbent is already canonical.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .domain import Scenario, SchemaError
from .feasibility import Assignment
from .reduction import (
    Placement,
    enumerate_placements,
    gcd_group_size,
    group_scenario,
    ungroup_solution,
)

#: Node entries per kernel invocation when a time limit forces chunking.
_CHUNK_NODES = 200_000


@dataclass(frozen=True)
class SolveOptions:
    time_limit: float = 0.0          # seconds; 0 disables the limit
    order: str = "most_constrained_first"  # or "input_order"
    group_size: int = 1              # 0 = auto (GCD of demands), >= 1 fixed
    round_demands: bool = False      # allow demands that are not multiples

    def __post_init__(self):
        if self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")
        if self.order not in ("most_constrained_first", "input_order"):
            raise ValueError(f"unknown order {self.order!r}")
        if self.group_size < 0:
            raise ValueError("group_size must be 0 (auto) or >= 1")


@dataclass
class SolveStats:
    nodes: int = 0
    prunes: int = 0
    wall_time_s: float = 0.0


@dataclass
class Solution:
    accepted: list[Placement]
    objective: float
    optimal: bool
    stats: SolveStats = field(default_factory=SolveStats)


class _Deadline:
    def __init__(self, limit: float):
        self.at = time.perf_counter() + limit if limit > 0 else None

    def expired(self) -> bool:
        return self.at is not None and time.perf_counter() >= self.at


class _Compiled:
    """Numpy views of a scenario plus its placement lists, kernel-ready."""

    def __init__(self, scenario: Scenario, placements: dict[int, list[Placement]]):
        n_req = scenario.num_requests
        n_sites = scenario.num_sites
        total = scenario.spectrum.total_prbs
        w64 = max(1, (total + 63) // 64)

        flat: list[Placement] = []
        ptr = [0]
        for i in range(n_req):
            cands = sorted(placements.get(i, []), key=lambda p: (p.site, p.band, p.start))
            flat.extend(cands)
            ptr.append(len(flat))

        self.scenario = scenario
        self.flat = flat
        self.n_req = n_req
        self.n_sites = n_sites
        self.n_bands = scenario.spectrum.num_bands
        self.w64 = w64
        self.weights = np.array([r.weight for r in scenario.requests], dtype=np.float64)
        self.req_ptr = np.array(ptr, dtype=np.int64)
        self.p_site = np.array([p.site for p in flat], dtype=np.int32)
        self.p_band = np.array([p.band for p in flat], dtype=np.int32)
        self.p_mask = np.zeros((len(flat), w64), dtype=np.uint64)
        for j, p in enumerate(flat):
            for f in range(p.start, p.start + p.length):
                self.p_mask[j, f >> 6] |= np.uint64(1) << np.uint64(f & 63)

        nbrs: list[list[int]] = [[] for _ in range(n_sites)]
        for a, b in scenario.interference_pairs():
            nbrs[a].append(b)
            nbrs[b].append(a)
        nptr = [0]
        nidx: list[int] = []
        for lst in nbrs:
            nidx.extend(sorted(lst))
            nptr.append(len(nidx))
        self.nbr_ptr = np.array(nptr, dtype=np.int64)
        self.nbr_idx = np.array(nidx, dtype=np.int32)
        self.single_band = np.array([s.single_band for s in scenario.sites], dtype=np.uint8)
        self.identity = np.arange(n_req, dtype=np.int64)

        # per request: the sites whose occupancy can affect its placements
        # (candidate sites and their interference neighbors); drives the
        # backjumping reason sets
        self.site_words = max(1, (n_sites + 63) // 64)
        self.blocker_sites = np.zeros((max(n_req, 1), self.site_words), dtype=np.uint64)
        for r in range(n_req):
            sites = {p.site for p in flat[self.req_ptr[r]:self.req_ptr[r + 1]]}
            for s in list(sites):
                sites.update(nbrs[s])
            for s in sites:
                self.blocker_sites[r, s >> 6] |= np.uint64(1) << np.uint64(s & 63)

        self.band_masks_mw = np.zeros((self.n_bands, w64), dtype=np.uint64)
        for band in scenario.spectrum.bands:
            for f in scenario.spectrum.band_range(band.id):
                self.band_masks_mw[band.id, f >> 6] |= np.uint64(1) << np.uint64(f & 63)
        self.max_candidates = max(
            [1] + [ptr[i + 1] - ptr[i] for i in range(n_req)])

    def fresh_state(self) -> dict:
        n = self.n_req
        return {
            "occ": np.zeros((self.n_sites, self.w64), dtype=np.uint64),
            "site_total": np.zeros(self.n_sites, dtype=np.int64),
            "site_band_cnt": np.zeros((self.n_sites, self.n_bands), dtype=np.int64),
            "decided": np.zeros(max(n, 1), dtype=np.uint8),
            "seq": np.full(n + 1, -1, dtype=np.int64),
            "choice": np.full(n + 1, -1, dtype=np.int64),
            "applied": np.full(n + 1, -1, dtype=np.int64),
            "cur_val": np.zeros(n + 1, dtype=np.float64),
            "node_bound": np.full(n + 1, np.inf, dtype=np.float64),
            "reason": np.zeros((n + 2, max(1, (n + 63) // 64)), dtype=np.uint64),
            "scratch": np.zeros(max(n, 1), dtype=np.int64),
            "cand": np.zeros((n + 1, self.max_candidates), dtype=np.int64),
            "cand_cnt": np.zeros(n + 1, dtype=np.int64),
            "keybuf": np.zeros(self.max_candidates, dtype=np.int64),
            "best_choice": np.full(max(n, 1), -1, dtype=np.int64),
            "best_val": np.array([-np.inf], dtype=np.float64),
            "icounters": np.zeros(4, dtype=np.int64),
        }

    def occupy(self, state: dict, placement_index: int) -> None:
        j = placement_index
        s = int(self.p_site[j])
        state["occ"][s] |= self.p_mask[j]
        state["site_total"][s] += 1
        state["site_band_cnt"][s, int(self.p_band[j])] += 1

    def occupy_window(self, state: dict, p: Placement) -> None:
        occ = state["occ"]
        for f in range(p.start, p.start + p.length):
            word, bit = f >> 6, np.uint64(1) << np.uint64(f & 63)
            if occ[p.site, word] & bit:
                raise ValueError(f"fixed placements overlap at site {p.site}, prb {f}")
            occ[p.site, word] |= bit
        state["site_total"][p.site] += 1
        state["site_band_cnt"][p.site, p.band] += 1

    def legal_now(self, state: dict, placement_index: int) -> bool:
        """Python-side mirror of the kernel's placement legality test, for
        pre-checking lock candidates against the accumulated occupancy."""
        j = placement_index
        s = int(self.p_site[j])
        band = int(self.p_band[j])
        if (self.single_band[s] and state["site_total"][s] > 0
                and state["site_band_cnt"][s, band] != state["site_total"][s]):
            return False
        mask = self.p_mask[j]
        if (state["occ"][s] & mask).any():
            return False
        for t in range(self.nbr_ptr[s], self.nbr_ptr[s + 1]):
            if (state["occ"][self.nbr_idx[t]] & mask).any():
                return False
        return True

    def run(self, state: dict, *, dynamic: bool, mode: int, target: float,
            n_active: int | None = None, deadline: _Deadline | None = None) -> bool:
        """Drive the kernel to completion or deadline; True when complete."""
        if n_active is None:
            n_active = self.n_req
        limited = deadline is not None and deadline.at is not None
        budget = _CHUNK_NODES if limited else -1
        while True:
            status = kernels.search_kernel(
                self.weights, self.req_ptr, self.p_site, self.p_band, self.p_mask,
                self.nbr_ptr, self.nbr_idx, self.single_band, self.blocker_sites,
                self.band_masks_mw, self.identity, n_active,
                1 if dynamic else 0, mode, target, budget,
                state["occ"], state["site_total"], state["site_band_cnt"],
                state["decided"], state["seq"], state["choice"], state["applied"],
                state["cur_val"], state["node_bound"], state["reason"],
                state["scratch"], state["cand"], state["cand_cnt"], state["keybuf"],
                state["best_choice"], state["best_val"], state["icounters"],
            )
            if status == 0:
                return True
            if limited and deadline.expired():
                return False


def _canonical_objective(inst: _Compiled, best_choice: np.ndarray) -> float:
    # accumulate in request-id order so the value is reproducible
    total = 0.0
    for r in range(inst.n_req):
        if best_choice[r] >= 0:
            total += inst.weights[r]
    return total


def _canonicalize(inst: _Compiled, fixed: list[Placement], objective: float,
                  witness: np.ndarray, deadline: _Deadline,
                  stats: SolveStats) -> np.ndarray | None:
    """Lock requests in id order onto their lexicographically smallest
    choice that still extends to a solution of value ``objective``.

    ``witness`` is any optimal choice vector (placement index per request,
    -1 = reject); only candidates strictly smaller than the witness's
    choice need a search, and when none succeeds the witness choice locks
    without one. Returns the canonical choice vector, or None on deadline.
    """
    locked = np.full(max(inst.n_req, 1), -1, dtype=np.int64)
    base_state = inst.fresh_state()
    for p in fixed:
        inst.occupy_window(base_state, p)
    lock_value = 0.0
    witness = witness.copy()

    for r in range(inst.n_req):
        base = int(inst.req_ptr[r])
        end = int(inst.req_ptr[r + 1])
        wpos = int(witness[r]) - base if witness[r] >= 0 else end - base
        chosen = int(witness[r])
        for pos in range(wpos):
            j = base + pos
            if not inst.legal_now(base_state, j):
                continue
            if deadline.expired():
                return None
            target = objective - lock_value - float(inst.weights[r])
            probe = inst.fresh_state()
            probe["occ"][:] = base_state["occ"]
            probe["site_total"][:] = base_state["site_total"]
            probe["site_band_cnt"][:] = base_state["site_band_cnt"]
            probe["decided"][: inst.n_req] = 1
            probe["decided"][r + 1:inst.n_req] = 0
            inst.occupy(probe, j)
            done = inst.run(probe, dynamic=True, mode=1, target=target,
                            n_active=inst.n_req - r - 1, deadline=deadline)
            stats.nodes += int(probe["icounters"][1])
            stats.prunes += int(probe["icounters"][2])
            if not done:
                return None
            if probe["icounters"][3] == 1:
                chosen = j
                witness[r + 1:inst.n_req] = probe["best_choice"][r + 1:inst.n_req]
                break
        locked[r] = chosen
        if chosen >= 0:
            inst.occupy(base_state, chosen)
            lock_value += float(inst.weights[r])
    return locked


def solve_placements(scenario: Scenario, placements: dict[int, list[Placement]],
                     opts: SolveOptions = SolveOptions(),
                     fixed: list[Placement] | None = None) -> Solution:
    """Solve over explicit placement lists (no grouping applied here).

    ``fixed`` placements pre-occupy spectrum without being decision
    variables; the timeslot engine uses this to carry allocations across
    slots.
    """
    t0 = time.perf_counter()
    deadline = _Deadline(opts.time_limit)
    inst = _Compiled(scenario, placements)
    fixed = list(fixed or [])
    stats = SolveStats()

    dynamic = opts.order == "most_constrained_first"
    state = inst.fresh_state()
    for p in fixed:
        inst.occupy_window(state, p)
    complete = inst.run(state, dynamic=dynamic, mode=0, target=0.0, deadline=deadline)
    stats.nodes += int(state["icounters"][1])
    stats.prunes += int(state["icounters"][2])
    best_choice = state["best_choice"]
    if state["best_val"][0] == -np.inf:
        # deadline hit before any leaf; the empty solution is the incumbent
        best_choice = np.full(max(inst.n_req, 1), -1, dtype=np.int64)
    objective = _canonical_objective(inst, best_choice)

    if complete and dynamic and inst.n_req > 0:
        canonical = _canonicalize(inst, fixed, objective, best_choice, deadline, stats)
        if canonical is not None:
            best_choice = canonical

    accepted = [inst.flat[int(best_choice[r])]
                for r in range(inst.n_req) if best_choice[r] >= 0]
    stats.wall_time_s = time.perf_counter() - t0
    return Solution(accepted=accepted, objective=objective, optimal=complete, stats=stats)


def solve(scenario: Scenario, opts: SolveOptions = SolveOptions()) -> Solution:
    """Value-maximal feasible allocation of requests to spectrum windows.

    The returned objective is the certified global optimum unless a time
    limit interrupts the search, in which case the incumbent is returned
    with ``optimal=False``. Grouping (``opts.group_size``) solves in the
    coarsened block space and expands the result back to raw PRBs.
    """
    t0 = time.perf_counter()
    k = opts.group_size
    if k == 0:
        k = gcd_group_size(scenario.requests) if scenario.requests else 1

    if k > 1:
        grouped = group_scenario(scenario, k, round_up=opts.round_demands)
        work = grouped.grouped
    else:
        grouped = None
        work = scenario

    sol = solve_placements(work, enumerate_placements(work), opts)
    if grouped is not None:
        sol = ungroup_solution(sol, grouped)
    sol.stats.wall_time_s = time.perf_counter() - t0
    return sol


def to_assignment(sol: Solution, scenario: Scenario) -> Assignment:
    """Expand a solution into explicit (x, y) indicator arrays."""
    asg = Assignment.empty(scenario)
    total = scenario.spectrum.total_prbs
    for p in sol.accepted:
        if not (0 <= p.request < scenario.num_requests and 0 <= p.site < scenario.num_sites):
            raise ValueError(f"placement references unknown request/site: {p}")
        if not (0 <= p.start and p.start + p.length <= total):
            raise ValueError(f"placement window out of range: {p}")
        if asg.y[p.request, p.site]:
            raise ValueError(f"request {p.request} placed twice")
        asg.y[p.request, p.site] = True
        asg.x[p.request, p.site, p.start:p.start + p.length] = True
    return asg


# ---------------------------------------------------------------------------
# Solution JSON

def solution_to_dict(sol: Solution, include_timing: bool = True) -> dict:
    return {
        "objective": sol.objective,
        "optimal": sol.optimal,
        "accepted": [
            {"request": p.request, "site": p.site, "band": p.band,
             "start": p.start, "length": p.length}
            for p in sorted(sol.accepted, key=lambda p: p.request)
        ],
        "stats": {
            "nodes": sol.stats.nodes,
            "prunes": sol.stats.prunes,
            "wall_time_ms": sol.stats.wall_time_s * 1e3 if include_timing else 0.0,
        },
    }


def solution_to_json(sol: Solution, include_timing: bool = True) -> str:
    return json.dumps(solution_to_dict(sol, include_timing), indent=2) + "\n"


def solution_from_dict(doc: dict) -> Solution:
    if not isinstance(doc, dict):
        raise SchemaError("solution: top level must be an object")
    unknown = set(doc) - {"objective", "optimal", "accepted", "stats"}
    if unknown:
        raise SchemaError(f"solution: unknown key(s) {sorted(unknown)}")
    for key in ("objective", "optimal", "accepted"):
        if key not in doc:
            raise SchemaError(f"solution: missing key '{key}'")
    accepted = []
    for pos, p in enumerate(doc["accepted"]):
        where = f"solution.accepted[{pos}]"
        if not isinstance(p, dict) or set(p) != {"request", "site", "band", "start", "length"}:
            raise SchemaError(f"{where}: expected request/site/band/start/length")
        accepted.append(Placement(p["request"], p["site"], p["band"], p["start"], p["length"]))
    stats = doc.get("stats", {}) or {}
    return Solution(
        accepted=accepted,
        objective=float(doc["objective"]),
        optimal=bool(doc["optimal"]),
        stats=SolveStats(nodes=int(stats.get("nodes", 0)),
                         prunes=int(stats.get("prunes", 0)),
                         wall_time_s=float(stats.get("wall_time_ms", 0.0)) / 1e3),
    )


def solution_from_json(text: str) -> Solution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"solution: invalid JSON ({exc})") from None
    return solution_from_dict(doc)


def canonical_key(accepted: list[Placement], num_requests: int) -> tuple:
    """Total order on solutions: per request id, the placement triple
    (site, band, start) or +infinity when rejected; used for tie-breaking
    among equal-objective optima."""
    inf = (float("inf"),) * 3
    by_req = {p.request: (p.site, p.band, p.start) for p in accepted}
    return tuple(by_req.get(r, inf) for r in range(num_requests))
