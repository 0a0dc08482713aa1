"""Linearization of the allocation problem into a 0-1 linear program.

Each quadratic product of two binaries becomes an auxiliary variable
bounded by its McCormick envelope, which is exact at binary points. The
single-band product-of-sums constraint is linearized with per-(site,
band) use indicators instead of pairwise products; for non-negative
integer sums both forms have the same (x, y) projection, which the
projection certification below verifies point by point.

Only variables that survive structural reduction are materialized: x on
covering sites and supported bands, y on covering sites. The locality
constraint is therefore vacuous, but a marker row is still emitted so the
exported file lists every constraint family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import feasibility, kernels
from .domain import Scenario


class VarKind(Enum):
    X = "x"
    Y = "y"
    Z_AUX = "z_aux"
    BAND_USE = "band_use"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    ref: tuple[int, ...]  # x/z: (req, site, prb); y: (req, site); u: (site, band)


@dataclass(frozen=True)
class Row:
    terms: tuple[tuple[float, int], ...]  # (coefficient, variable index)
    sense: str                            # 'le' | 'ge' | 'eq'
    rhs: float
    family: str


@dataclass
class LinearModel:
    variables: list[Variable]
    rows: list[Row]
    objective: list[tuple[float, int]]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {v.name: i for i, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            raise ValueError("variable names must be unique")

    def counts(self) -> dict[str, int]:
        by_kind: dict[str, int] = {k.value: 0 for k in VarKind}
        for v in self.variables:
            by_kind[v.kind.value] += 1
        by_family: dict[str, int] = {}
        for r in self.rows:
            by_family[r.family] = by_family.get(r.family, 0) + 1
        return {"variables": len(self.variables), "constraints": len(self.rows),
                **{f"var_{k}": n for k, n in by_kind.items()},
                **{f"rows_{k}": n for k, n in by_family.items()}}


class BudgetExceeded(ValueError):
    pass


def linearize(scenario: Scenario, emit_locality_rows: bool = True) -> LinearModel:
    """Build the linearized 0-1 model whose (x, y) projection equals the
    feasible set of the original problem."""
    plan = scenario.spectrum
    variables: list[Variable] = []
    index: dict[str, int] = {}

    def add(name: str, kind: VarKind, ref: tuple[int, ...]) -> int:
        index[name] = len(variables)
        variables.append(Variable(name, kind, ref))
        return index[name]

    covering = {
        (req.id, site.id)
        for req in scenario.requests for site in scenario.sites
        if req.area in site.coverage
    }
    supported_prbs: dict[int, list[int]] = {}
    for site in scenario.sites:
        prbs: list[int] = []
        for band in plan.bands:
            if site.band_supported[band.id]:
                prbs.extend(plan.band_range(band.id))
        supported_prbs[site.id] = prbs

    for req in scenario.requests:
        for site in scenario.sites:
            if (req.id, site.id) in covering:
                for f in supported_prbs[site.id]:
                    add(f"x_{req.id}_{site.id}_{f}", VarKind.X, (req.id, site.id, f))
    for req in scenario.requests:
        for site in scenario.sites:
            if (req.id, site.id) in covering:
                add(f"y_{req.id}_{site.id}", VarKind.Y, (req.id, site.id))
    for req in scenario.requests:
        if req.demand < 2:
            continue
        for site in scenario.sites:
            if (req.id, site.id) not in covering:
                continue
            for f in supported_prbs[site.id]:
                if (f + 1 < plan.total_prbs
                        and f"x_{req.id}_{site.id}_{f + 1}" in index
                        and plan.adjacent(f, f + 1)):
                    add(f"z_{req.id}_{site.id}_{f}", VarKind.Z_AUX, (req.id, site.id, f))
    for site in scenario.sites:
        if not site.single_band:
            continue
        for band in plan.bands:
            if site.band_supported[band.id] and any(
                (req.id, site.id) in covering for req in scenario.requests
            ):
                add(f"u_{site.id}_{band.id}", VarKind.BAND_USE, (site.id, band.id))

    rows: list[Row] = []

    # one site per request
    for req in scenario.requests:
        terms = [(1.0, index[f"y_{req.id}_{s.id}"]) for s in scenario.sites
                 if (req.id, s.id) in covering]
        if terms:
            rows.append(Row(tuple(terms), "le", 1.0, "one_site"))

    # per-(site, prb) capacity
    for site in scenario.sites:
        for f in supported_prbs[site.id]:
            terms = [(1.0, index[name])
                     for req in scenario.requests
                     if (name := f"x_{req.id}_{site.id}_{f}") in index]
            if terms:
                rows.append(Row(tuple(terms), "le", 1.0, "capacity"))

    # no PRB reuse across interfering pairs
    for a, b in scenario.interference_pairs():
        for f in range(plan.total_prbs):
            terms = []
            for req in scenario.requests:
                for site_id in (a, b):
                    name = f"x_{req.id}_{site_id}_{f}"
                    if name in index:
                        terms.append((1.0, index[name]))
            if terms:
                rows.append(Row(tuple(terms), "le", 1.0, "interference"))

    # demand equality
    for req in scenario.requests:
        for site in scenario.sites:
            if (req.id, site.id) not in covering:
                continue
            terms = [(1.0, index[f"x_{req.id}_{site.id}_{f}"])
                     for f in supported_prbs[site.id]]
            terms.append((-float(req.demand), index[f"y_{req.id}_{site.id}"]))
            rows.append(Row(tuple(terms), "eq", 0.0, "demand"))

    # locality: vacuous after reduction (no variables exist at non-covering
    # sites), emitted as a marker row per request
    if emit_locality_rows:
        for req in scenario.requests:
            rows.append(Row((), "eq", 0.0, "locality"))

    # contiguity: each adjacent-pair product via its McCormick envelope,
    # then the pair-count equality
    for req in scenario.requests:
        if req.demand < 2:
            continue
        for site in scenario.sites:
            if (req.id, site.id) not in covering:
                continue
            z_terms = []
            for f in supported_prbs[site.id]:
                z_name = f"z_{req.id}_{site.id}_{f}"
                if z_name not in index:
                    continue
                z = index[z_name]
                left = index[f"x_{req.id}_{site.id}_{f}"]
                right = index[f"x_{req.id}_{site.id}_{f + 1}"]
                rows.append(Row(((1.0, z), (-1.0, left)), "le", 0.0, "mccormick"))
                rows.append(Row(((1.0, z), (-1.0, right)), "le", 0.0, "mccormick"))
                rows.append(Row(((1.0, left), (1.0, right), (-1.0, z)), "le", 1.0, "mccormick"))
                z_terms.append((1.0, z))
            z_terms.append((-float(req.demand - 1), index[f"y_{req.id}_{site.id}"]))
            rows.append(Row(tuple(z_terms), "eq", 0.0, "contiguity"))

    # single-band sites: band-use indicators capped at one active band
    for site in scenario.sites:
        if not site.single_band:
            continue
        u_terms = []
        for band in plan.bands:
            u_name = f"u_{site.id}_{band.id}"
            if u_name not in index:
                continue
            u = index[u_name]
            cap_terms = []
            for req in scenario.requests:
                for f in plan.band_range(band.id):
                    name = f"x_{req.id}_{site.id}_{f}"
                    if name in index:
                        cap_terms.append((1.0, index[name]))
            cap_terms.append((-float(band.prb_count), u))
            rows.append(Row(tuple(cap_terms), "le", 0.0, "band_cap"))
            u_terms.append((1.0, u))
        if u_terms:
            rows.append(Row(tuple(u_terms), "le", 1.0, "single_band"))

    obj = [(req.weight, index[f"y_{req.id}_{site.id}"])
           for req in scenario.requests for site in scenario.sites
           if (req.id, site.id) in covering]
    return LinearModel(variables=variables, rows=rows, objective=obj, index=index)


def _validate_mccormick(model: LinearModel) -> None:
    """Every z variable must carry its three McCormick rows."""
    seen: dict[int, int] = {}
    for row in model.rows:
        if row.family == "mccormick":
            for _, v in row.terms:
                if model.variables[v].kind == VarKind.Z_AUX:
                    seen[v] = seen.get(v, 0) + 1
    for i, v in enumerate(model.variables):
        if v.kind == VarKind.Z_AUX and seen.get(i, 0) != 3:
            raise ValueError(f"variable {v.name} lacks its McCormick envelope")


# ---------------------------------------------------------------------------
# LP export

_SENSE_TEXT = {"le": "<=", "ge": ">=", "eq": "="}


def _format_terms(terms, variables) -> str:
    parts: list[str] = []
    for coef, var in terms:
        name = variables[var].name
        if not parts:
            if coef == 1.0:
                parts.append(name)
            elif coef == -1.0:
                parts.append(f"- {name}")
            else:
                parts.append(f"{coef:g} {name}")
        else:
            sign = "+" if coef >= 0 else "-"
            mag = abs(coef)
            if mag == 1.0:
                parts.append(f"{sign} {name}")
            else:
                parts.append(f"{sign} {mag:g} {name}")
    return " ".join(parts)


def _wrap(line: str, limit: int = 220) -> list[str]:
    if len(line) <= limit:
        return [line]
    words = line.split(" ")
    lines: list[str] = []
    current = words[0]
    for word in words[1:]:
        if len(current) + 1 + len(word) > limit:
            lines.append(current)
            current = " " + word
        else:
            current += " " + word
    lines.append(current)
    return lines


def export_lp(model: LinearModel, path) -> None:
    """Write the model in the LP exchange format.

    Sections: Maximize / Subject To / Binary / End; rows are named c0..cN
    in model order. A vacuous row (no terms) is anchored on the first
    variable with a zero coefficient so the file stays parseable.
    """
    _validate_mccormick(model)
    lines: list[str] = ["Maximize"]
    obj = _format_terms(model.objective, model.variables)
    lines.extend(_wrap(f" obj: {obj}" if obj else " obj:"))
    lines.append("Subject To")
    for n, row in enumerate(model.rows):
        if row.terms:
            body = _format_terms(row.terms, model.variables)
        elif model.variables:
            body = f"0 {model.variables[0].name}"
        else:
            continue
        lines.extend(_wrap(f" c{n}: {body} {_SENSE_TEXT[row.sense]} {row.rhs:g}"))
    lines.append("Binary")
    for v in model.variables:
        lines.append(f" {v.name}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Certification

@dataclass
class ExhaustiveResult:
    found: bool
    objective: float | None
    assignment: dict[str, int] | None


def _rows_csr(model: LinearModel):
    ptr = [0]
    var: list[int] = []
    coef: list[float] = []
    sense: list[int] = []
    rhs: list[float] = []
    code = {"le": 0, "ge": 1, "eq": 2}
    for row in model.rows:
        for c, v in row.terms:
            coef.append(c)
            var.append(v)
        ptr.append(len(var))
        sense.append(code[row.sense])
        rhs.append(row.rhs)
    return (np.array(ptr, dtype=np.int64),
            np.array(var, dtype=np.int64) if var else np.zeros(0, dtype=np.int64),
            np.array(coef, dtype=np.float64) if coef else np.zeros(0, dtype=np.float64),
            np.array(sense, dtype=np.int8) if sense else np.zeros(0, dtype=np.int8),
            np.array(rhs, dtype=np.float64) if rhs else np.zeros(0, dtype=np.float64))


def solve_exhaustive(model: LinearModel, budget: int = 24) -> ExhaustiveResult:
    """Exact optimum of the model by enumerating all 0-1 assignments.

    Refuses models with more variables than ``budget``. Reports no
    feasible point when the constraints are contradictory.
    """
    n = len(model.variables)
    if n > budget:
        raise BudgetExceeded(f"{n} variables exceed the exhaustive budget of {budget}")
    c_ptr, c_var, c_coef, c_sense, c_rhs = _rows_csr(model)
    obj = np.zeros(max(n, 1), dtype=np.float64)
    for coef, v in model.objective:
        obj[v] += coef
    found, best_val, best_mask = kernels.exhaustive_kernel(
        n, c_ptr, c_var, c_coef, c_sense, c_rhs, obj)
    if not found:
        return ExhaustiveResult(False, None, None)
    assignment = {v.name: int((int(best_mask) >> i) & 1)
                  for i, v in enumerate(model.variables)}
    return ExhaustiveResult(True, float(best_val), assignment)


def certify_projection(model: LinearModel, scenario: Scenario, budget: int = 20) -> bool:
    """Exhaustively verify that the model's (x, y) projection equals the
    validator's feasible set.

    Enumerates every 0-1 assignment of the materialized x and y variables,
    extends it with the canonical auxiliary completion (forced z products,
    indicator band-use), and compares model-row feasibility with the
    literal constraint check. Raises when a counterexample exists.
    """
    _validate_mccormick(model)
    xy = [(i, v) for i, v in enumerate(model.variables) if v.kind in (VarKind.X, VarKind.Y)]
    if len(xy) > budget:
        raise BudgetExceeded(f"{len(xy)} x/y variables exceed the projection budget of {budget}")

    xy_is_x = np.array([1 if v.kind == VarKind.X else 0 for _, v in xy], dtype=np.uint8)
    xy_req = np.array([v.ref[0] for _, v in xy], dtype=np.int32)
    xy_site = np.array([v.ref[1] for _, v in xy], dtype=np.int32)
    xy_prb = np.array([v.ref[2] if v.kind == VarKind.X else -1 for _, v in xy], dtype=np.int32)
    xy_model_idx = np.array([i for i, _ in xy], dtype=np.int64)

    z_idx, z_left, z_right = [], [], []
    for i, v in enumerate(model.variables):
        if v.kind == VarKind.Z_AUX:
            req, site, f = v.ref
            z_idx.append(i)
            z_left.append(model.index[f"x_{req}_{site}_{f}"])
            z_right.append(model.index[f"x_{req}_{site}_{f + 1}"])
    u_idx, u_ptr, u_members = [], [0], []
    for i, v in enumerate(model.variables):
        if v.kind == VarKind.BAND_USE:
            site, band = v.ref
            u_idx.append(i)
            for j, w in enumerate(model.variables):
                if (w.kind == VarKind.X and w.ref[1] == site
                        and scenario.spectrum.band_of(w.ref[2]) == band):
                    u_members.append(j)
            u_ptr.append(len(u_members))

    c_ptr, c_var, c_coef, c_sense, c_rhs = _rows_csr(model)
    tab = feasibility.packed_tables(scenario)
    bad = kernels.projection_kernel(
        xy_is_x, xy_req, xy_site, xy_prb, xy_model_idx, len(model.variables),
        np.array(z_idx, dtype=np.int64) if z_idx else np.zeros(0, dtype=np.int64),
        np.array(z_left, dtype=np.int64) if z_left else np.zeros(0, dtype=np.int64),
        np.array(z_right, dtype=np.int64) if z_right else np.zeros(0, dtype=np.int64),
        np.array(u_idx, dtype=np.int64) if u_idx else np.zeros(0, dtype=np.int64),
        np.array(u_ptr, dtype=np.int64),
        np.array(u_members, dtype=np.int64) if u_members else np.zeros(0, dtype=np.int64),
        c_ptr, c_var, c_coef, c_sense, c_rhs,
        scenario.num_requests, scenario.num_sites,
        tab["beta_bits"], tab["covers"], tab["demand"], tab["alpha_mask"],
        tab["band_masks"], tab["pair_a"], tab["pair_b"], tab["single_band"],
    )
    if bad >= 0:
        names = [v.name for q, (i, v) in enumerate(xy) if (int(bad) >> q) & 1]
        raise AssertionError(
            f"model and validator disagree on assignment {{{', '.join(names)}}}")
    return True
