"""Construction of the per-constraint polynomial systems Sys-i.

Scaled variables: x = M * x_orig, u = M_i * u_orig, lambda = M_i * lambda_orig,
each confined to an integer grid by a product polynomial. A solution of Sys-i
projects (after unscaling) to a Pareto-optimal triplet whose i-th dual
component is positive.

Variable names: x1..xn, u1..uR (one per system row, box rows after A rows),
lam1..lamk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import ceil
from typing import Iterator, Literal, Mapping, Optional, Sequence

from molp_moments.config import Variant
from molp_moments.errors import BadIndexError
from molp_moments.model import ConstraintRows, MolpProblem, system_rows
from molp_moments.polynomial import Polynomial, check_affine, evaluate, grid_polynomial
from molp_moments.scaling import ScalingConstants

logger = logging.getLogger(__name__)

Block = Literal["x", "u", "lambda"]
Kind = Literal["eq", "ineq"]

__all__ = [
    "Constraint",
    "PolySystem",
    "VariableSpec",
    "build_sys_i",
    "build_zero_dual_system",
    "eliminate_last_lambda",
    "enumerate_grid_solutions",
    "evaluate",
    "grid_polynomial",
    "substitute_affine",
]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    block: Block
    upper: int

    @property
    def lower(self) -> int:
        return 0


@dataclass(frozen=True)
class Constraint:
    label: str
    poly: Polynomial
    kind: Kind
    grid: bool = False

    @property
    def half_degree(self) -> int:
        return ceil(self.poly.degree / 2)

    def holds(self, point: Mapping[str, Fraction]) -> bool:
        value = self.poly.evaluate(point)
        return value == 0 if self.kind == "eq" else value >= 0


@dataclass(frozen=True)
class PolySystem:
    """Equalities (= 0) and inequalities (>= 0) over a finite-range catalog.

    ``index`` is the constraint row i (1-based) or 0 for the zero-dual system.
    ``eliminated`` records substituted variables with their affine expressions,
    in substitution order.
    """

    index: int
    variant: str
    constants: ScalingConstants
    rows: ConstraintRows
    catalog: tuple[VariableSpec, ...]
    equalities: tuple[Constraint, ...]
    inequalities: tuple[Constraint, ...]
    eliminated: tuple[tuple[str, Polynomial], ...] = ()
    fixed: dict[str, int] = field(default_factory=dict)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.catalog)

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return self.equalities + self.inequalities

    def spec(self, name: str) -> VariableSpec:
        return next(v for v in self.catalog if v.name == name)

    @property
    def half_degree(self) -> int:
        """The largest half-degree over all constraints (the minimal relaxation order)."""
        return max((c.half_degree for c in self.constraints), default=0)

    @property
    def nongrid_half_degree(self) -> int:
        return max((c.half_degree for c in self.constraints if not c.grid), default=0)

    def complete_point(self, point: Mapping[str, Fraction]) -> dict[str, Fraction]:
        """Extend a catalog point with eliminated and fixed variables."""
        full = {k: Fraction(v) for k, v in point.items()}
        for name, value in self.fixed.items():
            full.setdefault(name, Fraction(value))
        for name, expr in reversed(self.eliminated):
            full[name] = expr.evaluate(full)
        return full

    def violated(self, point: Mapping[str, Fraction]) -> list[str]:
        return [c.label for c in self.constraints if not c.holds(point)]

    def to_text(self) -> str:
        order = self.variables
        lines = [f"# system {self.index} variant={self.variant}"]
        for spec in self.catalog:
            lines.append(f"# {spec.name} in {{0..{spec.upper}}}")
        for name, expr in self.eliminated:
            lines.append(f"# {name} := {expr.to_text(order)}")
        for c in self.equalities:
            lines.append(f"{c.label}: {c.poly.to_text(order)} = 0")
        for c in self.inequalities:
            lines.append(f"{c.label}: {c.poly.to_text(order)} >= 0")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _x(j: int) -> str:
    return f"x{j + 1}"


def _u(s: int) -> str:
    return f"u{s + 1}"


def _lam(l: int) -> str:
    return f"lam{l + 1}"


def _common(problem: MolpProblem, rows: ConstraintRows, M: int, scale: int, duals: dict[int, Polynomial]):
    """Constraints shared by every system given the dual expressions per row."""
    n, k = problem.n, problem.k
    x = [Polynomial.variable(_x(j)) for j in range(n)]
    lam = [Polynomial.variable(_lam(l)) for l in range(k)]

    equalities = [Constraint("h0", sum(lam, Polynomial()) - scale, "eq")]
    if duals:
        h1 = Polynomial()
        for s, u_s in duals.items():
            h1 = h1 + u_s * (M * rows.h[s] - sum((rows.G[s][j] * x[j] for j in range(n)), Polynomial()))
        equalities.append(Constraint("h1", h1, "eq"))

    reduced = []
    for j in range(n):
        expr = sum((problem.C[l][j] * lam[l] for l in range(k)), Polynomial())
        expr = expr - sum((rows.G[s][j] * u_s for s, u_s in duals.items()), Polynomial())
        reduced.append(expr)
    equalities.append(Constraint("h2", sum((reduced[j] * x[j] for j in range(n)), Polynomial()), "eq"))

    inequalities = [
        Constraint(f"g0_{s + 1}", sum((rows.G[s][j] * x[j] for j in range(n)), Polynomial()) - M * rows.h[s], "ineq")
        for s in range(rows.count)
    ]
    inequalities += [Constraint(f"g_{j + 1}", reduced[j], "ineq") for j in range(n)]
    return equalities, inequalities


def _grids_and_boxes(catalog: Sequence[VariableSpec]):
    grids = [
        Constraint(f"grid_{v.name}", grid_polynomial(v.name, v.upper), "eq", grid=True) for v in catalog
    ]
    boxes = [Constraint(f"nonneg_{v.name}", Polynomial.variable(v.name), "ineq") for v in catalog]
    return grids, boxes


def build_sys_i(
    problem: MolpProblem,
    i: int,
    consts: ScalingConstants,
    variant: Variant = "full-u",
    rows: Optional[ConstraintRows] = None,
) -> PolySystem:
    """Sys-i for constraint row i (1-based)."""
    rows = rows or system_rows(problem)
    if not 1 <= i <= rows.count:
        raise BadIndexError(f"system index {i} outside 1..{rows.count}")
    M, Mi = consts.M, consts.for_system(i)
    n, k = problem.n, problem.k

    catalog = [VariableSpec(_x(j), "x", problem.ub_primal[j] * M) for j in range(n)]
    duals: dict[int, Polynomial] = {}
    fixed: dict[str, int] = {}
    for s in range(rows.count):
        if variant == "reduced-u" and s == i - 1:
            duals[s] = Polynomial.constant(Mi)
            fixed[_u(s)] = Mi
            continue
        catalog.append(VariableSpec(_u(s), "u", rows.ub_dual[s] * Mi))
        duals[s] = Polynomial.variable(_u(s))
    catalog += [VariableSpec(_lam(l), "lambda", Mi) for l in range(k)]

    equalities, inequalities = _common(problem, rows, M, Mi, duals)
    if variant == "full-u":
        inequalities.append(Constraint(f"pos_{_u(i - 1)}", Polynomial.variable(_u(i - 1)) - 1, "ineq"))
    grids, boxes = _grids_and_boxes(catalog)

    system = PolySystem(
        index=i,
        variant=variant,
        constants=consts,
        rows=rows,
        catalog=tuple(catalog),
        equalities=tuple(equalities + grids),
        inequalities=tuple(inequalities + boxes),
        fixed=fixed,
    )
    logger.debug(
        "sys_built i=%d variant=%s vars=%d eqs=%d ineqs=%d",
        i, variant, len(catalog), len(system.equalities), len(system.inequalities),
    )
    return system


def build_zero_dual_system(
    problem: MolpProblem,
    consts: ScalingConstants,
    rows: Optional[ConstraintRows] = None,
) -> PolySystem:
    """Valid triplets with u = 0: weights with C^T lambda >= 0 orthogonal to x."""
    rows = rows or system_rows(problem)
    M, M0 = consts.M, consts.M0
    n, k = problem.n, problem.k
    catalog = [VariableSpec(_x(j), "x", problem.ub_primal[j] * M) for j in range(n)]
    catalog += [VariableSpec(_lam(l), "lambda", M0) for l in range(k)]
    equalities, inequalities = _common(problem, rows, M, M0, {})
    grids, boxes = _grids_and_boxes(catalog)
    fixed = {_u(s): 0 for s in range(rows.count)}
    return PolySystem(
        index=0,
        variant="zero-dual",
        constants=consts,
        rows=rows,
        catalog=tuple(catalog),
        equalities=tuple(equalities + grids),
        inequalities=tuple(inequalities + boxes),
        fixed=fixed,
    )


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def substitute_affine(sys: PolySystem, var: str, replacement: Polynomial) -> PolySystem:
    """Replace ``var`` everywhere; drop equalities that become identically zero."""
    check_affine(var, replacement)

    def _sub(constraints):
        out = []
        for c in constraints:
            poly = c.poly.substitute(var, replacement)
            if c.kind == "eq" and poly.is_zero():
                continue
            out.append(replace(c, poly=poly))
        return tuple(out)

    return replace(
        sys,
        catalog=tuple(v for v in sys.catalog if v.name != var),
        equalities=_sub(sys.equalities),
        inequalities=_sub(sys.inequalities),
        eliminated=sys.eliminated + ((var, replacement),),
    )


def eliminate_last_lambda(sys: PolySystem) -> PolySystem:
    """Use h0 to write lam_k = scale - sum of the other weights."""
    lams = [v.name for v in sys.catalog if v.block == "lambda"]
    if not lams:
        return sys
    scale = sys.constants.for_system(sys.index)
    last = lams[-1]
    replacement = Polynomial.constant(scale) - sum(
        (Polynomial.variable(name) for name in lams[:-1]), Polynomial()
    )
    return substitute_affine(sys, last, replacement)


# ---------------------------------------------------------------------------
# Exhaustive grid search
# ---------------------------------------------------------------------------


def enumerate_grid_solutions(sys: PolySystem) -> Iterator[dict[str, int]]:
    """Every integer point of the catalog grid that satisfies the system.

    Depth-first over the catalog order; a constraint is checked as soon as all
    of its variables are assigned.
    """
    names = sys.variables
    position = {name: idx for idx, name in enumerate(names)}
    checks: list[list[Constraint]] = [[] for _ in names]
    for c in sys.constraints:
        used = c.poly.variables() & set(position)
        if not used:
            if not c.holds({}):
                return
            continue
        checks[max(position[v] for v in used)].append(c)

    point: dict[str, int] = {}

    def _walk(depth: int):
        if depth == len(names):
            yield dict(point)
            return
        spec = sys.catalog[depth]
        for value in range(spec.lower, spec.upper + 1):
            point[spec.name] = value
            if all(c.holds(point) for c in checks[depth]):
                yield from _walk(depth + 1)
        point.pop(spec.name, None)

    yield from _walk(0)
