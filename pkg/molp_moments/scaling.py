"""Integrality scaling constants M, M_i and sound dual bounds.

M makes every vertex x of the region integral after multiplying by M; M_i
does the same for the certificates (u, lambda) routed through system i. Any
common multiple of the exact constants is sound; larger values only raise
the degrees of the grid polynomials.

Modes:
    enumerate     lcm of |det| over the relevant square submatrices (Bareiss)
    override      the caller's value
    conservative  lcm(1..H) with H a Hadamard bound on every minor
    certificate   lcm of the denominators of the actual vertices/certificates
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from math import comb, isqrt, lcm, prod
from typing import Optional, Sequence

from molp_moments.config import DEFAULT_ENUMERATION_CAP, ScalingSettings, Variant
from molp_moments.errors import BadIndexError, CombinatorialLimitError
from molp_moments.exact import solve_square
from molp_moments.model import ConstraintRows, MolpProblem, system_rows

logger = logging.getLogger(__name__)


class Provenance(str, Enum):
    COMPUTED_LCM = "computed-lcm"
    USER_OVERRIDE = "user-override"
    CONSERVATIVE = "conservative-multiple"
    CERTIFICATE = "certificate-lcm"


@dataclass(frozen=True)
class ScalingConstants:
    M: int
    Mi: tuple[int, ...]
    M0: int = 1
    provenance: dict[str, Provenance] = field(default_factory=dict)

    def __post_init__(self):
        if self.M < 1 or self.M0 < 1 or any(v < 1 for v in self.Mi):
            raise ValueError("scaling constants must be positive integers")

    def for_system(self, i: int) -> int:
        """Lambda/u scale of system i (1-based; 0 is the zero-dual system)."""
        if i == 0:
            return self.M0
        return self.Mi[i - 1]

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "Mi": list(self.Mi),
            "M0": self.M0,
            "provenance": {k: v.value for k, v in self.provenance.items()},
        }


# ---------------------------------------------------------------------------
# Determinants
# ---------------------------------------------------------------------------


def integer_determinant(sq: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    size = len(sq)
    if size == 0:
        return 1
    a = [[int(v) for v in row] for row in sq]
    sign = 1
    prev = 1
    for k in range(size - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, size) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, size):
            for j in range(k + 1, size):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[size - 1][size - 1]


def _minor_lcm(matrix: Sequence[Sequence[int]], sizes: Sequence[int], cap: int, what: str) -> int:
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    total = sum(comb(rows, s) * comb(cols, s) for s in sizes)
    if total > cap:
        raise CombinatorialLimitError(what, total, cap)
    result = 1
    for s in sizes:
        for rsel in combinations(range(rows), s):
            for csel in combinations(range(cols), s):
                det = integer_determinant([[matrix[r][c] for c in csel] for r in rsel])
                if det:
                    result = lcm(result, abs(det))
    return result


def _hadamard_bound(matrix: Sequence[Sequence[int]]) -> int:
    """Integer upper bound on |det| of every square submatrix."""
    if not matrix:
        return 1
    cols = list(zip(*matrix))
    size = min(len(matrix), len(cols))
    squared = sorted((sum(v * v for v in col) for col in cols), reverse=True)[:size]
    value = prod(max(1, s) for s in squared)
    return isqrt(value - 1) + 1 if value > 1 else 1


def _lcm_upto(limit: int) -> int:
    return lcm(*range(1, limit + 1)) if limit >= 1 else 1


# ---------------------------------------------------------------------------
# M
# ---------------------------------------------------------------------------


def compute_M(
    problem: MolpProblem,
    override: Optional[int] = None,
    include_identity: bool = True,
    rows: Optional[ConstraintRows] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> int:
    """lcm of |det| over nonsingular n x n submatrices of [A; I_n]."""
    if override is not None:
        return int(override)
    G = list(rows.G) if rows is not None else [list(r) for r in problem.A]
    if include_identity:
        G += [[1 if c == j else 0 for c in range(problem.n)] for j in range(problem.n)]
    if len(G) < problem.n:
        return 1
    value = _minor_lcm(G, [problem.n], cap, "primal bases")
    logger.debug("scaling_M value=%d identity=%s", value, include_identity)
    return value


def certificate_M(problem: MolpProblem, cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    from molp_moments.oracle import enumerate_vertices

    denominators = [v.denominator for p in enumerate_vertices(problem, cap=cap).points for v in p]
    return lcm(1, *denominators)


# ---------------------------------------------------------------------------
# M_i
# ---------------------------------------------------------------------------


def dual_core_matrix(problem: MolpProblem, rows: ConstraintRows, with_u: bool = True) -> list[list[int]]:
    """[[G^T, -C^T], [0, 1^T]]: dual feasibility rows plus the simplex row."""
    k, n = problem.k, problem.n
    R = rows.count if with_u else 0
    core = []
    for j in range(n):
        u_part = [rows.G[s][j] for s in range(R)]
        core.append(u_part + [-problem.C[l][j] for l in range(k)])
    core.append([0] * R + [1] * k)
    return core


def _adjugate(square: Sequence[Sequence[int]]) -> Optional[tuple[int, list[list[int]]]]:
    size = len(square)
    det = integer_determinant(square)
    if det == 0:
        return None
    columns = []
    for c in range(size):
        e = [1 if r == c else 0 for r in range(size)]
        col = solve_square(square, e)
        columns.append([int(v * det) for v in col])
    adj = [[columns[c][r] for c in range(size)] for r in range(size)]
    return det, adj


def reduced_u_matrices(problem: MolpProblem, i: int, rows: ConstraintRows, cap: int):
    """Coefficient matrices of U-Sys-B-i for every nonsingular primal basis B."""
    n, k = problem.n, problem.k
    R = rows.count
    stacked = [list(r) for r in rows.G] + [[1 if c == j else 0 for c in range(n)] for j in range(n)]
    if comb(len(stacked), n) > cap:
        raise CombinatorialLimitError("primal bases", comb(len(stacked), n), cap)
    others = [s for s in range(R) if s != i]
    dual_rows = [
        [-rows.G[s][j] for s in others] + [problem.C[l][j] for l in range(k)] for j in range(n)
    ]
    simplex_row = [0] * len(others) + [1] * k
    for subset in combinations(range(len(stacked)), n):
        square = [stacked[r] for r in subset]
        adj = _adjugate(square)
        if adj is None:
            continue
        _, adjugate = adj
        # lambda^T C adj(A_B): one reduced-cost row per basic row.
        weights = [
            [sum(problem.C[l][j] * adjugate[j][r] for j in range(n)) for l in range(k)]
            for r in range(n)
        ]
        reduced = [[0] * len(others) + weights[r] for r in range(n)]
        yield dual_rows + reduced + [simplex_row]


def compute_Mi(
    problem: MolpProblem,
    i: int,
    mode: str = "enumerate",
    value: Optional[int] = None,
    variant: Variant = "full-u",
    rows: Optional[ConstraintRows] = None,
    factor_limit: Optional[int] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> int:
    """Scale for system i (1-based)."""
    if rows is None:
        rows = system_rows(problem)
    if not 1 <= i <= rows.count:
        raise BadIndexError(f"system index {i} outside 1..{rows.count}")
    if mode == "override":
        if value is None:
            raise ValueError("override mode needs a value")
        return int(value)
    core = dual_core_matrix(problem, rows)
    if mode == "conservative":
        limit = factor_limit if factor_limit is not None else _hadamard_bound(core)
        return _lcm_upto(limit)
    if mode == "certificate":
        return _certificate_scale(problem, rows, focus=i - 1, cap=cap)
    if mode != "enumerate":
        raise ValueError(f"unknown scaling mode {mode!r}")
    if variant == "full-u":
        sizes = range(1, min(len(core), len(core[0])) + 1)
        return _minor_lcm(core, sizes, cap, "dual core minors")
    result = 1
    for matrix in reduced_u_matrices(problem, i - 1, rows, cap):
        sizes = range(1, min(len(matrix), len(matrix[0])) + 1)
        result = lcm(result, _minor_lcm(matrix, sizes, cap, "U-Sys-B minors"))
    return result


def compute_M0(
    problem: MolpProblem,
    mode: str = "enumerate",
    value: Optional[int] = None,
    rows: Optional[ConstraintRows] = None,
    factor_limit: Optional[int] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> int:
    """Lambda scale of the zero-dual system (certificates with u = 0)."""
    if mode == "override":
        return int(value)
    if rows is None:
        rows = system_rows(problem)
    core = dual_core_matrix(problem, rows, with_u=False)
    if mode == "conservative":
        return _lcm_upto(factor_limit if factor_limit is not None else _hadamard_bound(core))
    if mode == "certificate":
        return _certificate_scale(problem, rows, focus=None, cap=cap, zero_dual=True)
    sizes = range(1, min(len(core), len(core[0])) + 1)
    return _minor_lcm(core, sizes, cap, "zero-dual minors")


def _certificate_scale(
    problem: MolpProblem,
    rows: ConstraintRows,
    focus: Optional[int],
    cap: int,
    zero_dual: bool = False,
) -> int:
    from molp_moments.oracle import certificate_vertices, pareto_extreme_set

    result = 1
    for x in pareto_extreme_set(problem, cap=cap).points:
        for cert in certificate_vertices(problem, x, rows, cap=cap):
            duals = list(cert.u) + [cert.u_box[j] for j in rows.box_rows] if cert.u_box else list(cert.u)
            if zero_dual and any(duals):
                continue
            if focus is not None and duals[focus] == 0:
                continue
            for v in duals + list(cert.lam):
                result = lcm(result, Fraction(v).denominator)
    return result


# ---------------------------------------------------------------------------
# Dual bounds
# ---------------------------------------------------------------------------


def suggest_dual_bounds(problem: MolpProblem, rows: Optional[ConstraintRows] = None) -> tuple[int, ...]:
    """Cramer/Hadamard bound on every extreme dual value over all weights.

    An extreme dual solution solves a nonsingular integer subsystem, so its
    denominator is at least 1 and its numerator is a determinant in which one
    column is the weighted objective, whose entries are at most max |C|.
    """
    if rows is None:
        rows = system_rows(problem)
    n = problem.n
    cmax = max((abs(v) for row in problem.C for v in row), default=0)
    squared_norms = [sum(v * v for v in row) for row in rows.G]
    size = min(rows.count, n)
    bounds = []
    for s in range(rows.count):
        others = sorted((squared_norms[r] for r in range(rows.count) if r != s), reverse=True)
        value = cmax * cmax * n * prod(max(1, v) for v in others[: size - 1])
        bounds.append(max(1, isqrt(value - 1) + 1 if value > 0 else 1))
    return tuple(bounds)


def tight_dual_bounds(problem: MolpProblem, rows: Optional[ConstraintRows] = None,
                      cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[int, ...]:
    """Ceiling of the largest dual value over every certificate vertex (at least 1)."""
    from molp_moments.oracle import certificate_vertices, pareto_extreme_set

    if rows is None:
        rows = system_rows(problem)
    loose = suggest_dual_bounds(problem, rows)
    loose_rows = ConstraintRows(G=rows.G, h=rows.h, ub_dual=loose, box_rows=rows.box_rows, labels=rows.labels)
    best = [Fraction(1)] * rows.count
    for x in pareto_extreme_set(problem, cap=cap).points:
        for cert in certificate_vertices(problem, x, loose_rows, cap=cap):
            duals = list(cert.u) + ([cert.u_box[j] for j in rows.box_rows] if cert.u_box else [])
            best = [max(b, v) for b, v in zip(best, duals)]
    return tuple(-(-v.numerator // v.denominator) for v in best)


# ---------------------------------------------------------------------------
# All constants at once
# ---------------------------------------------------------------------------


def compute_constants(
    problem: MolpProblem,
    settings: Optional[ScalingSettings] = None,
    variant: Variant = "full-u",
    rows: Optional[ConstraintRows] = None,
) -> ScalingConstants:
    settings = settings or ScalingSettings()
    rows = rows or system_rows(problem)
    mode = settings.mode
    provenance: dict[str, Provenance] = {}
    auto = {
        "enumerate": Provenance.COMPUTED_LCM,
        "conservative": Provenance.CONSERVATIVE,
        "certificate": Provenance.CERTIFICATE,
    }[mode]

    if settings.M is not None:
        M = int(settings.M)
        provenance["M"] = Provenance.USER_OVERRIDE
    elif mode == "certificate":
        M = certificate_M(problem, cap=settings.cap)
        provenance["M"] = auto
    elif mode == "conservative":
        M = _lcm_upto(settings.factor_limit or _hadamard_bound(list(rows.G) + [[1] * problem.n]))
        provenance["M"] = auto
    else:
        M = compute_M(problem, rows=rows, cap=settings.cap)
        provenance["M"] = auto

    Mi = []
    overrides = settings.Mi
    if overrides is not None and len(overrides) < rows.count:
        # One value for every system, or A-row values with box rows taking the largest.
        fill = overrides[0] if len(overrides) == 1 else max(overrides)
        overrides = tuple(overrides) + (fill,) * (rows.count - len(overrides))
    for i in range(1, rows.count + 1):
        key = f"M{i}"
        if overrides is not None:
            Mi.append(int(overrides[i - 1]))
            provenance[key] = Provenance.USER_OVERRIDE
        else:
            Mi.append(compute_Mi(
                problem, i, mode=mode, variant=variant, rows=rows,
                factor_limit=settings.factor_limit, cap=settings.cap,
            ))
            provenance[key] = auto

    if settings.M0 is not None:
        M0 = int(settings.M0)
        provenance["M0"] = Provenance.USER_OVERRIDE
    else:
        M0 = compute_M0(problem, mode=mode, rows=rows, factor_limit=settings.factor_limit, cap=settings.cap)
        provenance["M0"] = auto

    constants = ScalingConstants(M=M, Mi=tuple(Mi), M0=M0, provenance=provenance)
    logger.info("scaling_constants M=%d Mi=%s M0=%d mode=%s", M, list(Mi), M0, mode)
    return constants
