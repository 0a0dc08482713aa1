"""Domain model: grids, spectrum plans, cell sites, requests, scenarios.

Also houses deterministic scenario generation and the coverage /
interference geometry, plus the strict JSON (de)serialization of
scenarios and simulation configs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

#: Coverage radius used by the default simulation setup, in units of tile
#: width (tile-center to tile-center distance).
DEFAULT_COVERAGE_RADIUS = 3.0 * math.sqrt(2.0) / 2.0


class SchemaError(ValueError):
    """Raised when a JSON document does not match the expected schema."""


@dataclass(frozen=True)
class Grid:
    """Rectangular deployment area of rows x cols unit-width square tiles.

    Area ids are row-major: area_id = row * cols + col.
    """

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.rows}x{self.cols}")

    @property
    def num_areas(self) -> int:
        return self.rows * self.cols

    def area_id(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ValueError(f"tile ({row}, {col}) is off the {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def tile_of(self, area: int) -> tuple[int, int]:
        if not (0 <= area < self.num_areas):
            raise ValueError(f"area id {area} out of range")
        return divmod(area, self.cols)


@dataclass(frozen=True)
class Band:
    id: int
    prb_count: int

    def __post_init__(self):
        if self.prb_count < 0:
            raise ValueError(f"band {self.id}: prb_count must be non-negative")


@dataclass(frozen=True)
class SpectrumPlan:
    """Ordered bands concatenated into a global PRB index space 0..F-1.

    Two global indices are adjacent only when consecutive within the same
    band; adjacency never crosses a band boundary.
    """

    bands: tuple[Band, ...]

    def __post_init__(self):
        for pos, band in enumerate(self.bands):
            if band.id != pos:
                raise ValueError(f"band ids must equal their position, got id {band.id} at {pos}")

    @property
    def num_bands(self) -> int:
        return len(self.bands)

    @property
    def total_prbs(self) -> int:
        return sum(b.prb_count for b in self.bands)

    def band_offset(self, band_id: int) -> int:
        return sum(b.prb_count for b in self.bands[:band_id])

    def band_range(self, band_id: int) -> range:
        off = self.band_offset(band_id)
        return range(off, off + self.bands[band_id].prb_count)

    def band_of(self, prb: int) -> int:
        if prb < 0:
            raise ValueError(f"prb index {prb} out of range")
        off = 0
        for band in self.bands:
            if prb < off + band.prb_count:
                return band.id
            off += band.prb_count
        raise ValueError(f"prb index {prb} out of range")

    def adjacent(self, f: int, f_next: int) -> bool:
        """Whether (f, f_next) are consecutive PRBs of the same band."""
        if f_next != f + 1:
            return False
        return self.band_of(f) == self.band_of(f_next)


@dataclass(frozen=True)
class CellSite:
    """A radio site: grid position, per-band support, and coverage set.

    ``single_band`` marks sites that may transmit on at most one band at a
    time. ``coverage`` is the set of area ids the site can serve.
    """

    id: int
    tile: tuple[int, int]
    band_supported: tuple[bool, ...]
    single_band: bool
    coverage: frozenset[int]

    def supports_any_band(self) -> bool:
        return any(self.band_supported)


class RetryPolicy(Enum):
    KEEP_IN_BUFFER = "keep_in_buffer"
    DROP = "drop"


@dataclass(frozen=True)
class Request:
    id: int
    tenant: int
    area: int
    demand: int
    weight: float = 1.0
    retry_policy: RetryPolicy = RetryPolicy.KEEP_IN_BUFFER

    def __post_init__(self):
        if self.demand < 1:
            raise ValueError(f"request {self.id}: demand must be >= 1, got {self.demand}")
        if self.weight < 0:
            raise ValueError(f"request {self.id}: weight must be non-negative")


@dataclass(frozen=True)
class Scenario:
    """A full problem instance.

    ``interference`` is a symmetric boolean matrix over site pairs with a
    false diagonal: entry (a, b) says sites a and b may not reuse the same
    PRB.
    """

    grid: Grid
    sites: tuple[CellSite, ...]
    spectrum: SpectrumPlan
    interference: tuple[tuple[bool, ...], ...]
    requests: tuple[Request, ...]

    def __post_init__(self):
        n = len(self.sites)
        for pos, site in enumerate(self.sites):
            if site.id != pos:
                raise ValueError(f"site ids must equal their position, got id {site.id} at {pos}")
            if len(site.band_supported) != self.spectrum.num_bands:
                raise ValueError(f"site {site.id}: band_supported length mismatch")
            self.grid.area_id(*site.tile)
            for area in site.coverage:
                if not (0 <= area < self.grid.num_areas):
                    raise ValueError(f"site {site.id}: coverage area {area} off grid")
        if len(self.interference) != n or any(len(row) != n for row in self.interference):
            raise ValueError("interference matrix shape mismatch")
        for a in range(n):
            if self.interference[a][a]:
                raise ValueError(f"interference diagonal must be false (site {a})")
            for b in range(a + 1, n):
                if self.interference[a][b] != self.interference[b][a]:
                    raise ValueError(f"interference matrix not symmetric at ({a}, {b})")
        for pos, req in enumerate(self.requests):
            if req.id != pos:
                raise ValueError(f"request ids must equal their position, got id {req.id} at {pos}")
            if not (0 <= req.area < self.grid.num_areas):
                raise ValueError(f"request {req.id}: area {req.area} off grid")

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def num_requests(self) -> int:
        return len(self.requests)

    def interference_pairs(self) -> list[tuple[int, int]]:
        """Unordered interfering pairs (a < b), sorted."""
        n = self.num_sites
        return [(a, b) for a in range(n) for b in range(a + 1, n) if self.interference[a][b]]


@dataclass(frozen=True)
class DemandModel:
    """Demand = multiplier * U{min_blocks..max_blocks} (integer, uniform)."""

    min_blocks: int = 1
    max_blocks: int = 1

    def __post_init__(self):
        if self.min_blocks < 1 or self.max_blocks < self.min_blocks:
            raise ValueError("demand model requires 1 <= min_blocks <= max_blocks")


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo sweep parameters.

    ``group_size`` of 0 means auto (GCD of the generated demands is used
    when solving); any value >= 1 is both the demand multiplier and the
    grouping factor. ``demand_model`` defaults to blocks of
    1..floor(prbs_per_band / max(group_size, 1)).
    """

    rows: int
    cols: int
    num_sites: int
    num_bands: int
    prbs_per_band: int
    num_requests: int
    p_ns: float = 0.0
    p_sb: float = 0.0
    group_size: int = 0
    demand_model: DemandModel | None = None
    runs: int = 1
    seed: int = 0
    site_placement: str = "random"
    coverage_radius: float = DEFAULT_COVERAGE_RADIUS

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")
        if self.num_sites < 1:
            raise ValueError("num_sites must be >= 1")
        if self.num_bands < 1 or self.prbs_per_band < 1:
            raise ValueError("num_bands and prbs_per_band must be >= 1")
        if self.num_requests < 0:
            raise ValueError("num_requests must be >= 0")
        if not (0.0 <= self.p_ns <= 1.0 and 0.0 <= self.p_sb <= 1.0):
            raise ValueError("p_ns and p_sb must lie in [0, 1]")
        if self.group_size < 0:
            raise ValueError("group_size must be 0 (auto) or >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.site_placement not in ("random", "lattice"):
            raise ValueError("site_placement must be 'random' or 'lattice'")
        if self.coverage_radius < 0:
            raise ValueError("coverage_radius must be non-negative")

    @property
    def demand_multiplier(self) -> int:
        return self.group_size if self.group_size >= 1 else 1

    def effective_demand_model(self) -> DemandModel:
        if self.demand_model is not None:
            return self.demand_model
        return DemandModel(1, max(1, self.prbs_per_band // self.demand_multiplier))


def generate_grid(rows: int, cols: int) -> Grid:
    """Build a rows x cols grid with row-major area ids."""
    return Grid(rows, cols)


def compute_coverage(site_tile: tuple[int, int], grid: Grid, radius: float) -> frozenset[int]:
    """Area ids whose tile center is within ``radius`` of the site tile.

    Distances are tile-center to tile-center in units of tile width; ties
    at exactly the radius are included. Always contains the site tile.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    row0, col0 = site_tile
    grid.area_id(row0, col0)
    reach = int(math.floor(radius))
    r_sq = radius * radius
    covered = []
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            if dr * dr + dc * dc > r_sq:
                continue
            row, col = row0 + dr, col0 + dc
            if 0 <= row < grid.rows and 0 <= col < grid.cols:
                covered.append(row * grid.cols + col)
    return frozenset(covered)


def compute_interference(sites: list[CellSite] | tuple[CellSite, ...]) -> tuple[tuple[bool, ...], ...]:
    """Symmetric interference matrix: sites interfere iff coverage sets intersect."""
    n = len(sites)
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            row.append(a != b and not sites[a].coverage.isdisjoint(sites[b].coverage))
        rows.append(tuple(row))
    return tuple(rows)


def _rng_for_run(seed: int, run_index: int) -> np.random.Generator:
    """PCG64 generator with a per-run substream.

    The substream key is SeedSequence([seed, run_index]); only
    ``integers`` and ``random`` Generator methods are drawn from, so the
    stream is reproducible for a fixed numpy major version.
    """
    if run_index < 0:
        raise ValueError("run_index must be non-negative")
    masked = seed & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([masked, run_index])))


def _sample_distinct(rng: np.random.Generator, n: int, k: int) -> list[int]:
    # partial Fisher-Yates; uses only Generator.integers draws
    pool = list(range(n))
    for i in range(k):
        j = i + int(rng.integers(0, n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def _lattice_tiles(grid: Grid, count: int) -> list[tuple[int, int]]:
    per_row = math.ceil(math.sqrt(count))
    n_rows = math.ceil(count / per_row)
    tiles = []
    for k in range(count):
        r = int((k // per_row + 0.5) * grid.rows / n_rows)
        c = int((k % per_row + 0.5) * grid.cols / per_row)
        tiles.append((min(r, grid.rows - 1), min(c, grid.cols - 1)))
    if len(set(tiles)) != count:
        raise ValueError(f"lattice placement of {count} sites collides on a {grid.rows}x{grid.cols} grid")
    return tiles


def generate_scenario(cfg: SimConfig, run_index: int) -> Scenario:
    """Deterministically generate a scenario for (cfg.seed, run_index).

    Draw order (fixed for reproducibility): site tiles, then per site and
    per band the band-support draw (unsupported when z < p_ns), then per
    site the single-band draw (z < p_sb), then per request its area (uniform
    over the union of all coverage sets) followed by its demand blocks.
    """
    grid = generate_grid(cfg.rows, cfg.cols)
    if cfg.num_sites > grid.num_areas:
        raise ValueError(f"cannot place {cfg.num_sites} distinct sites on {grid.num_areas} tiles")
    rng = _rng_for_run(cfg.seed, run_index)

    if cfg.site_placement == "lattice":
        tiles = _lattice_tiles(grid, cfg.num_sites)
    else:
        tiles = [grid.tile_of(a) for a in _sample_distinct(rng, grid.num_areas, cfg.num_sites)]

    supported = []
    for _ in range(cfg.num_sites):
        supported.append(tuple(float(rng.random()) >= cfg.p_ns for _ in range(cfg.num_bands)))
    single = [float(rng.random()) < cfg.p_sb for _ in range(cfg.num_sites)]

    sites = tuple(
        CellSite(
            id=s,
            tile=tiles[s],
            band_supported=supported[s],
            single_band=single[s],
            coverage=compute_coverage(tiles[s], grid, cfg.coverage_radius),
        )
        for s in range(cfg.num_sites)
    )
    interference = compute_interference(sites)

    covered = sorted(set().union(*(site.coverage for site in sites)))
    model = cfg.effective_demand_model()
    mult = cfg.demand_multiplier
    requests = []
    for i in range(cfg.num_requests):
        area = covered[int(rng.integers(0, len(covered)))]
        blocks = int(rng.integers(model.min_blocks, model.max_blocks + 1))
        requests.append(Request(id=i, tenant=0, area=area, demand=mult * blocks))

    spectrum = SpectrumPlan(tuple(Band(w, cfg.prbs_per_band) for w in range(cfg.num_bands)))
    return Scenario(
        grid=grid,
        sites=sites,
        spectrum=spectrum,
        interference=interference,
        requests=tuple(requests),
    )


# ---------------------------------------------------------------------------
# JSON serialization (strict: unknown keys rejected, field names normative)

def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{where}: missing key(s) {sorted(missing)}")


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "grid": {"rows": scenario.grid.rows, "cols": scenario.grid.cols},
        "bands": [{"id": b.id, "prb_count": b.prb_count} for b in scenario.spectrum.bands],
        "sites": [
            {
                "id": s.id,
                "tile": [s.tile[0], s.tile[1]],
                "band_supported": list(s.band_supported),
                "single_band": s.single_band,
                "coverage": sorted(s.coverage),
            }
            for s in scenario.sites
        ],
        "interference": [[a, b] for a, b in scenario.interference_pairs()],
        "requests": [
            {
                "id": r.id,
                "tenant": r.tenant,
                "area": r.area,
                "demand": r.demand,
                "weight": r.weight,
                "retry_policy": r.retry_policy.value,
            }
            for r in scenario.requests
        ],
    }


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("scenario: top level must be an object")
    _require_keys(doc, {"grid", "bands", "sites", "interference", "requests"},
                  {"grid", "bands", "sites", "interference", "requests"}, "scenario")

    g = doc["grid"]
    if not isinstance(g, dict):
        raise SchemaError("scenario.grid: expected an object")
    _require_keys(g, {"rows", "cols"}, {"rows", "cols"}, "scenario.grid")
    grid = Grid(_as_int(g["rows"], "grid.rows"), _as_int(g["cols"], "grid.cols"))

    bands = []
    for pos, b in enumerate(doc["bands"]):
        where = f"scenario.bands[{pos}]"
        if not isinstance(b, dict):
            raise SchemaError(f"{where}: expected an object")
        _require_keys(b, {"id", "prb_count"}, {"id", "prb_count"}, where)
        count = _as_int(b["prb_count"], f"{where}.prb_count")
        if count < 1:
            raise SchemaError(f"{where}.prb_count: must be >= 1")
        bands.append(Band(_as_int(b["id"], f"{where}.id"), count))
    spectrum = SpectrumPlan(tuple(bands))

    sites = []
    for pos, s in enumerate(doc["sites"]):
        where = f"scenario.sites[{pos}]"
        if not isinstance(s, dict):
            raise SchemaError(f"{where}: expected an object")
        _require_keys(s, {"id", "tile", "band_supported", "single_band", "coverage"},
                      {"id", "tile", "band_supported", "single_band", "coverage"}, where)
        tile = s["tile"]
        if not (isinstance(tile, list) and len(tile) == 2):
            raise SchemaError(f"{where}.tile: expected [row, col]")
        flags = s["band_supported"]
        if not (isinstance(flags, list) and all(isinstance(v, bool) for v in flags)):
            raise SchemaError(f"{where}.band_supported: expected a list of booleans")
        if not isinstance(s["single_band"], bool):
            raise SchemaError(f"{where}.single_band: expected a boolean")
        sites.append(
            CellSite(
                id=_as_int(s["id"], f"{where}.id"),
                tile=(_as_int(tile[0], f"{where}.tile[0]"), _as_int(tile[1], f"{where}.tile[1]")),
                band_supported=tuple(flags),
                single_band=s["single_band"],
                coverage=frozenset(_as_int(a, f"{where}.coverage") for a in s["coverage"]),
            )
        )

    n = len(sites)
    matrix = [[False] * n for _ in range(n)]
    for pos, pair in enumerate(doc["interference"]):
        where = f"scenario.interference[{pos}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise SchemaError(f"{where}: expected [site, site]")
        a, b = _as_int(pair[0], where), _as_int(pair[1], where)
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise SchemaError(f"{where}: invalid pair [{a}, {b}]")
        matrix[a][b] = matrix[b][a] = True

    requests = []
    for pos, r in enumerate(doc["requests"]):
        where = f"scenario.requests[{pos}]"
        if not isinstance(r, dict):
            raise SchemaError(f"{where}: expected an object")
        _require_keys(r, {"id", "tenant", "area", "demand", "weight", "retry_policy"},
                      {"id", "tenant", "area", "demand"}, where)
        policy_raw = r.get("retry_policy", RetryPolicy.KEEP_IN_BUFFER.value)
        try:
            policy = RetryPolicy(policy_raw)
        except ValueError:
            raise SchemaError(f"{where}.retry_policy: invalid value {policy_raw!r}") from None
        requests.append(
            Request(
                id=_as_int(r["id"], f"{where}.id"),
                tenant=_as_int(r["tenant"], f"{where}.tenant"),
                area=_as_int(r["area"], f"{where}.area"),
                demand=_as_int(r["demand"], f"{where}.demand"),
                weight=_as_number(r.get("weight", 1.0), f"{where}.weight"),
                retry_policy=policy,
            )
        )

    try:
        return Scenario(
            grid=grid,
            sites=tuple(sites),
            spectrum=spectrum,
            interference=tuple(tuple(row) for row in matrix),
            requests=tuple(requests),
        )
    except ValueError as exc:
        raise SchemaError(f"scenario: {exc}") from None


def scenario_from_json(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario: invalid JSON ({exc})") from None
    return scenario_from_dict(doc)


_SIMCONFIG_KEYS = {
    "rows", "cols", "num_sites", "num_bands", "prbs_per_band", "num_requests",
    "p_ns", "p_sb", "group_size", "demand_model", "runs", "seed",
    "site_placement", "coverage_radius",
}
_SIMCONFIG_REQUIRED = {"rows", "cols", "num_sites", "num_bands", "prbs_per_band", "num_requests"}


def simconfig_to_dict(cfg: SimConfig) -> dict:
    doc = {
        "rows": cfg.rows,
        "cols": cfg.cols,
        "num_sites": cfg.num_sites,
        "num_bands": cfg.num_bands,
        "prbs_per_band": cfg.prbs_per_band,
        "num_requests": cfg.num_requests,
        "p_ns": cfg.p_ns,
        "p_sb": cfg.p_sb,
        "group_size": cfg.group_size,
        "runs": cfg.runs,
        "seed": cfg.seed,
        "site_placement": cfg.site_placement,
        "coverage_radius": cfg.coverage_radius,
    }
    if cfg.demand_model is not None:
        doc["demand_model"] = {
            "min_blocks": cfg.demand_model.min_blocks,
            "max_blocks": cfg.demand_model.max_blocks,
        }
    return doc


def simconfig_from_dict(doc: dict) -> SimConfig:
    if not isinstance(doc, dict):
        raise SchemaError("config: top level must be an object")
    _require_keys(doc, _SIMCONFIG_KEYS, _SIMCONFIG_REQUIRED, "config")
    model = None
    if "demand_model" in doc:
        dm = doc["demand_model"]
        if not isinstance(dm, dict):
            raise SchemaError("config.demand_model: expected an object")
        _require_keys(dm, {"min_blocks", "max_blocks"}, {"min_blocks", "max_blocks"},
                      "config.demand_model")
        model = DemandModel(
            _as_int(dm["min_blocks"], "config.demand_model.min_blocks"),
            _as_int(dm["max_blocks"], "config.demand_model.max_blocks"),
        )
    placement = doc.get("site_placement", "random")
    if not isinstance(placement, str):
        raise SchemaError("config.site_placement: expected a string")
    try:
        return SimConfig(
            rows=_as_int(doc["rows"], "config.rows"),
            cols=_as_int(doc["cols"], "config.cols"),
            num_sites=_as_int(doc["num_sites"], "config.num_sites"),
            num_bands=_as_int(doc["num_bands"], "config.num_bands"),
            prbs_per_band=_as_int(doc["prbs_per_band"], "config.prbs_per_band"),
            num_requests=_as_int(doc["num_requests"], "config.num_requests"),
            p_ns=_as_number(doc.get("p_ns", 0.0), "config.p_ns"),
            p_sb=_as_number(doc.get("p_sb", 0.0), "config.p_sb"),
            group_size=_as_int(doc.get("group_size", 0), "config.group_size"),
            demand_model=model,
            runs=_as_int(doc.get("runs", 1), "config.runs"),
            seed=_as_int(doc.get("seed", 0), "config.seed"),
            site_placement=placement,
            coverage_radius=_as_number(doc.get("coverage_radius", DEFAULT_COVERAGE_RADIUS),
                                       "config.coverage_radius"),
        )
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"config: {exc}") from None


def simconfig_from_json(text: str) -> SimConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config: invalid JSON ({exc})") from None
    return simconfig_from_dict(doc)


def with_requests(scenario: Scenario, requests: list[Request] | tuple[Request, ...]) -> Scenario:
    """Same infrastructure, different request set (ids must be 0..n-1)."""
    return replace(scenario, requests=tuple(requests))
