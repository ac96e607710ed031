"""Exact-rational ground truth for the moment pipeline.

Everything here is Fraction arithmetic: vertices by exhaustive n-subset
enumeration of the stacked rows, Pareto tests by the domination LP, weight
certificates by LP feasibility over the complementary-slackness system.

Stacked row order (indices used in active sets):
    0..m-1        A rows             A_s x >= b_s
    m..m+n-1      box rows           -x_j >= -ub_j
    m+n..m+2n-1   nonnegativity      x_j >= 0

Public surface:
    stacked_rows(problem)
    enumerate_vertices(problem, cap=...) -> VertexSet
    is_pareto(problem, x) -> bool
    pareto_extreme_set(problem) -> VertexSet
    pareto_edges(problem, xe) -> list[tuple[int, int]]
    certify_weight(problem, x, basis=None, focus=None, box_rows=None) -> ValidTriplet | None
    certificate_vertices(problem, x, rows) -> list[ValidTriplet]
    required_box_rows(problem) -> tuple[int, ...]
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Optional, Sequence

from molp_moments.config import DEFAULT_ENUMERATION_CAP
from molp_moments.errors import BadIndexError, CombinatorialLimitError, DimensionError, NotFeasibleError
from molp_moments.exact import matrix_rank, solve_square
from molp_moments.model import (
    ConstraintRows,
    MolpProblem,
    Rational,
    ValidTriplet,
    dot,
    system_rows,
)
from molp_moments.simplex import LpInstance, LpStatus, simplex_solve

logger = logging.getLogger(__name__)

Point = tuple[Rational, ...]


@dataclass(frozen=True)
class VertexSet:
    points: tuple[Point, ...]
    active_sets: tuple[frozenset[int], ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def index(self, point: Sequence) -> int:
        return self.points.index(tuple(Fraction(v) for v in point))


# ---------------------------------------------------------------------------
# Vertex enumeration
# ---------------------------------------------------------------------------


def stacked_rows(problem: MolpProblem, include_box: bool = True) -> list[tuple[tuple[int, ...], int]]:
    n = problem.n
    rows = [(tuple(row), rhs) for row, rhs in zip(problem.A, problem.b)]
    if include_box:
        rows += [(tuple(-1 if c == j else 0 for c in range(n)), -problem.ub_primal[j]) for j in range(n)]
    rows += [(tuple(1 if c == j else 0 for c in range(n)), 0) for j in range(n)]
    return rows


def _tight_set(rows, x: Sequence[Fraction]) -> frozenset[int]:
    return frozenset(idx for idx, (row, rhs) in enumerate(rows) if dot(row, x) == rhs)


def _feasible(rows, x: Sequence[Fraction]) -> bool:
    return all(dot(row, x) >= rhs for row, rhs in rows)


def _enumerate(rows, n: int, cap: int, what: str) -> VertexSet:
    count = comb(len(rows), n)
    if count > cap:
        raise CombinatorialLimitError(what, count, cap)
    found: dict[Point, frozenset[int]] = {}
    for subset in combinations(range(len(rows)), n):
        sol = solve_square([rows[i][0] for i in subset], [rows[i][1] for i in subset])
        if sol is None:
            continue
        point = tuple(sol)
        if point in found or not _feasible(rows, point):
            continue
        found[point] = _tight_set(rows, point)
    ordered = sorted(found)
    return VertexSet(points=tuple(ordered), active_sets=tuple(found[p] for p in ordered))


def enumerate_vertices(problem: MolpProblem, cap: int = DEFAULT_ENUMERATION_CAP) -> VertexSet:
    """All vertices of {Ax >= b, 0 <= x <= ub}, sorted lexicographically."""
    vertices = _enumerate(stacked_rows(problem), problem.n, cap, "vertex enumeration")
    logger.debug("vertices_enumerated count=%d", len(vertices))
    return vertices


# ---------------------------------------------------------------------------
# Pareto tests
# ---------------------------------------------------------------------------


def is_feasible(problem: MolpProblem, x: Sequence) -> bool:
    point = [Fraction(v) for v in x]
    if len(point) != problem.n:
        raise DimensionError(f"point has length {len(point)}, expected {problem.n}")
    return _feasible(stacked_rows(problem), point)


def is_pareto(problem: MolpProblem, x: Sequence) -> bool:
    """Domination LP: max sum(e) s.t. Cy + e = Cx, y feasible, e >= 0; zero iff Pareto."""
    if not is_feasible(problem, x):
        raise NotFeasibleError(f"point {[str(v) for v in x]} is not feasible")
    n, k = problem.n, problem.k
    target = [dot(row, x) for row in problem.C]
    lp = LpInstance(
        objective=[0] * n + [-1] * k,
        G=[list(row) + [0] * k for row in problem.A],
        h=list(problem.b),
        upper=list(problem.ub_primal) + [None] * k,
        E=[list(problem.C[l]) + [1 if c == l else 0 for c in range(k)] for l in range(k)],
        e=target,
    )
    result = simplex_solve(lp)
    # y = x, e = 0 is feasible, and sum(e) is bounded by the box.
    return result.status is LpStatus.OPTIMAL and result.objective == 0


def pareto_extreme_set(problem: MolpProblem, cap: int = DEFAULT_ENUMERATION_CAP) -> VertexSet:
    vertices = enumerate_vertices(problem, cap=cap)
    keep = [i for i, p in enumerate(vertices.points) if is_pareto(problem, p)]
    return VertexSet(
        points=tuple(vertices.points[i] for i in keep),
        active_sets=tuple(vertices.active_sets[i] for i in keep),
    )


def pareto_edges(problem: MolpProblem, xe: VertexSet) -> list[tuple[int, int]]:
    """Index pairs of Pareto vertices joined by a Pareto-optimal edge."""
    rows = stacked_rows(problem)
    n = problem.n
    edges = []
    for p, q in combinations(range(len(xe.points)), 2):
        common = xe.active_sets[p] & xe.active_sets[q]
        if len(common) < n - 1:
            continue
        if matrix_rank([rows[i][0] for i in sorted(common)]) < n - 1:
            continue
        midpoint = tuple((a + b) / 2 for a, b in zip(xe.points[p], xe.points[q]))
        if is_pareto(problem, midpoint):
            edges.append((p, q))
    return edges


# ---------------------------------------------------------------------------
# Box rows needed by the certificates
# ---------------------------------------------------------------------------


def required_box_rows(problem: MolpProblem, cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[int, ...]:
    """Box rows -x_j >= -ub_j that some Pareto vertex may need in its certificate.

    When every objective is bounded below on {Ax >= b, x >= 0} and every vertex
    of that set lies in the box, each weighted optimum over the boxed region is
    attained at an unboxed vertex, so A rows alone certify it.
    """
    n = problem.n
    for row in problem.C:
        res = simplex_solve(LpInstance(objective=list(row), G=problem.A, h=problem.b))
        if res.status is LpStatus.UNBOUNDED:
            return tuple(range(n))
        if res.status is LpStatus.INFEASIBLE:
            # Only the box keeps anything; the region check belongs to validate.
            return tuple(range(n))
    unboxed = _enumerate(stacked_rows(problem, include_box=False), n, cap, "unboxed vertices")
    needed = sorted({j for p in unboxed.points for j in range(n) if p[j] > problem.ub_primal[j]})
    return tuple(needed)


# ---------------------------------------------------------------------------
# Weight certificates
# ---------------------------------------------------------------------------


def _certificate_constraints(problem: MolpProblem, x: Sequence[Fraction], rows: ConstraintRows):
    """Constraints on z = (u_1..u_R, lambda_1..lambda_k) for a fixed x.

    Returns (equalities, inequalities) as lists of (coeffs, rhs), meaning
    coeffs.z = rhs and coeffs.z >= rhs.
    """
    R, k, n = rows.count, problem.k, problem.n
    dim = R + k
    eqs, ineqs = [], []

    def unit(i, value=1):
        return [Fraction(value) if c == i else Fraction(0) for c in range(dim)]

    for s in range(R):
        slack = dot(rows.G[s], x) - rows.h[s]
        if slack > 0:
            eqs.append((unit(s), 0))
        else:
            ineqs.append((unit(s), 0))
    for j in range(n):
        coeffs = [Fraction(-rows.G[s][j]) for s in range(R)] + [Fraction(problem.C[l][j]) for l in range(k)]
        (eqs if x[j] > 0 else ineqs).append((coeffs, 0))
    eqs.append(([Fraction(0)] * R + [Fraction(1)] * k, 1))
    for l in range(k):
        ineqs.append((unit(R + l), 0))
    return eqs, ineqs


def _triplet(problem: MolpProblem, x, rows: ConstraintRows, z: Sequence[Fraction]) -> ValidTriplet:
    m, R = problem.m, rows.count
    u_box = [Fraction(0)] * problem.n
    for t, j in enumerate(rows.box_rows):
        u_box[j] = z[m + t]
    return ValidTriplet(
        x=tuple(Fraction(v) for v in x),
        u=tuple(z[:m]),
        lam=tuple(z[R:]),
        u_box=tuple(u_box) if rows.box_rows else (),
    )


def certify_weight(
    problem: MolpProblem,
    x: Sequence,
    basis: Optional[Iterable[int]] = None,
    focus: Optional[int] = None,
    box_rows: Optional[Sequence[int]] = None,
) -> Optional[ValidTriplet]:
    """Weight and dual certificate making (x, u, lambda) a valid triplet.

    ``focus`` (0-based constraint row) asks for the vertex maximizing u_focus
    within u <= ub_dual, which is how a certificate is routed through one
    system. ``basis`` (0-based system rows) restricts the support of u: rows
    outside it get u_s = 0, on top of the complementary slackness that tight
    rows already impose. Returns None when x is not Pareto-optimal or no
    certificate exists over the chosen rows.
    """
    point = tuple(Fraction(v) for v in x)
    if not is_pareto(problem, point):
        return None
    if box_rows is None:
        box_rows = required_box_rows(problem)
    rows = system_rows(problem, box_rows)
    eqs, ineqs = _certificate_constraints(problem, point, rows)
    R, k = rows.count, problem.k
    if basis is not None:
        support = set(basis)
        if not support <= set(range(R)):
            raise BadIndexError(f"basis rows {sorted(support)} outside 0..{R - 1}")
        logger.debug("certify_weight basis=%s", sorted(support))
        for s in range(R):
            if s not in support:
                eqs.append(([Fraction(1) if c == s else Fraction(0) for c in range(R + k)], 0))
    if focus is None:
        objective = [0] * (R + k)
        upper = None
    else:
        objective = [-1 if c == focus else 0 for c in range(R + k)]
        upper = list(rows.ub_dual) + [1] * k
    result = simplex_solve(LpInstance(
        objective=objective,
        G=[c for c, _ in ineqs],
        h=[r for _, r in ineqs],
        upper=upper,
        E=[c for c, _ in eqs],
        e=[r for _, r in eqs],
    ))
    if result.status is not LpStatus.OPTIMAL:
        return None
    return _triplet(problem, point, rows, result.x)


def certificate_vertices(
    problem: MolpProblem,
    x: Sequence,
    rows: ConstraintRows,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[ValidTriplet]:
    """Every vertex of the certificate polytope of x, with u <= ub_dual."""
    point = tuple(Fraction(v) for v in x)
    eqs, ineqs = _certificate_constraints(problem, point, rows)
    R, k = rows.count, problem.k
    dim = R + k
    for s in range(R):
        ineqs.append(([Fraction(-1) if c == s else Fraction(0) for c in range(dim)], -rows.ub_dual[s]))

    basis_eqs: list = []
    for row in eqs:
        if matrix_rank([c for c, _ in basis_eqs] + [row[0]]) > len(basis_eqs):
            basis_eqs.append(row)
    free = dim - len(basis_eqs)
    if comb(len(ineqs), free) > cap:
        raise CombinatorialLimitError("certificate vertices", comb(len(ineqs), free), cap)

    found: dict[tuple, ValidTriplet] = {}
    for subset in combinations(range(len(ineqs)), free):
        system = basis_eqs + [ineqs[i] for i in subset]
        z = solve_square([c for c, _ in system], [r for _, r in system])
        if z is None:
            continue
        if any(dot(c, z) != r for c, r in eqs) or any(dot(c, z) < r for c, r in ineqs):
            continue
        key = tuple(z)
        if key not in found:
            found[key] = _triplet(problem, point, rows, z)
    return [found[key] for key in sorted(found)]
