"""Exact two-phase simplex over Fractions with least-index (Bland) pivoting.

Solves

    min  c^T y   s.t.  G y >= h,  E y = e,  0 <= y <= upper

and returns the optimal basis together with a dual vector that certifies the
optimum: ``result.objective == result.dual_objective`` on OPTIMAL status.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from molp_moments.errors import DimensionError
from molp_moments.exact import solve_square

logger = logging.getLogger(__name__)


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LpInstance:
    """LP in inequality form over nonnegative variables.

    ``upper`` is either None or one entry per variable, None meaning no bound.
    """

    objective: Sequence
    G: Sequence[Sequence] = ()
    h: Sequence = ()
    upper: Optional[Sequence] = None
    E: Sequence[Sequence] = ()
    e: Sequence = ()

    def __post_init__(self):
        size = len(self.objective)
        if len(self.G) != len(self.h) or len(self.E) != len(self.e):
            raise DimensionError("constraint rows and right-hand sides differ in length")
        for row in list(self.G) + list(self.E):
            if len(row) != size:
                raise DimensionError(f"row of length {len(row)} for {size} variables")
        if self.upper is not None and len(self.upper) != size:
            raise DimensionError("upper must have one entry per variable")


@dataclass
class LpResult:
    status: LpStatus
    x: tuple[Fraction, ...] = ()
    objective: Optional[Fraction] = None
    basis: tuple[int, ...] = ()
    duals: tuple[Fraction, ...] = ()
    upper_duals: dict[int, Fraction] = field(default_factory=dict)
    eq_duals: tuple[Fraction, ...] = ()
    dual_objective: Optional[Fraction] = None
    pivots: int = 0


class _Tableau:
    """Dense tableau; the last entry of every row is the right-hand side."""

    def __init__(self, rows: list[list[Fraction]], basis: list[int]):
        self.rows = rows
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, c: int) -> None:
        inv = 1 / self.rows[r][c]
        pivot_row = [v * inv for v in self.rows[r]]
        self.rows[r] = pivot_row
        for i, row in enumerate(self.rows):
            if i != r and row[c] != 0:
                factor = row[c]
                self.rows[i] = [a - factor * p for a, p in zip(row, pivot_row)]
        self.basis[r] = c
        self.pivots += 1

    def reduced_costs(self, cost: list[Fraction], allowed: int) -> list[Fraction]:
        cb = [cost[b] for b in self.basis]
        return [
            cost[j] - sum((cb[i] * self.rows[i][j] for i in range(len(self.rows)) if cb[i]), Fraction(0))
            for j in range(allowed)
        ]

    def optimize(self, cost: list[Fraction], allowed: int) -> bool:
        """Run Bland's rule on columns ``< allowed``. False means unbounded."""
        while True:
            reduced = self.reduced_costs(cost, allowed)
            entering = next((j for j in range(allowed) if reduced[j] < 0), None)
            if entering is None:
                return True
            leaving = None
            best = None
            for i, row in enumerate(self.rows):
                if row[entering] > 0:
                    ratio = row[-1] / row[entering]
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leaving]):
                        best, leaving = ratio, i
            if leaving is None:
                return False
            self.pivot(leaving, entering)


def simplex_solve(lp: LpInstance) -> LpResult:
    N = len(lp.objective)
    G = [[Fraction(v) for v in row] for row in lp.G]
    E = [[Fraction(v) for v in row] for row in lp.E]
    upper_idx = [] if lp.upper is None else [j for j, u in enumerate(lp.upper) if u is not None]
    nG, nU, nE = len(G), len(upper_idx), len(E)
    ncols = N + nG + nU
    nrows = nG + nU + nE

    # Standard form: G y - s = h, y_j + t_j = ub_j, E y = e.
    std: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for i, row in enumerate(G):
        std.append(row + [Fraction(-1) if c == i else Fraction(0) for c in range(nG)] + [Fraction(0)] * nU)
        rhs.append(Fraction(lp.h[i]))
    for t, j in enumerate(upper_idx):
        std.append(
            [Fraction(1) if c == j else Fraction(0) for c in range(N)]
            + [Fraction(0)] * nG
            + [Fraction(1) if c == t else Fraction(0) for c in range(nU)]
        )
        rhs.append(Fraction(lp.upper[j]))
    for i, row in enumerate(E):
        std.append(row + [Fraction(0)] * (nG + nU))
        rhs.append(Fraction(lp.e[i]))

    signs = [(-1 if r < 0 else 1) for r in rhs]
    std = [[s * v for v in row] for s, row in zip(signs, std)]
    rhs = [s * r for s, r in zip(signs, rhs)]

    art = ncols
    rows = [
        row + [Fraction(1) if c == r else Fraction(0) for c in range(nrows)] + [rhs[r]]
        for r, row in enumerate(std)
    ]
    tab = _Tableau(rows, [art + r for r in range(nrows)])

    phase1 = [Fraction(0)] * ncols + [Fraction(1)] * nrows
    tab.optimize(phase1, ncols + nrows)
    infeasibility = sum((row[-1] for row, b in zip(tab.rows, tab.basis) if b >= art), Fraction(0))
    if infeasibility > 0:
        logger.debug("simplex_infeasible residual=%s", infeasibility)
        return LpResult(status=LpStatus.INFEASIBLE, pivots=tab.pivots)

    # Drive remaining artificials out of the basis; rows that cannot be are redundant.
    live_rows = list(range(nrows))
    r = 0
    while r < len(tab.rows):
        if tab.basis[r] >= art:
            col = next((j for j in range(ncols) if tab.rows[r][j] != 0), None)
            if col is None:
                del tab.rows[r]
                del tab.basis[r]
                del live_rows[r]
                continue
            tab.pivot(r, col)
        r += 1

    cost = [Fraction(v) for v in lp.objective] + [Fraction(0)] * (nG + nU + nrows)
    if not tab.optimize(cost, ncols):
        return LpResult(status=LpStatus.UNBOUNDED, pivots=tab.pivots)

    values = [Fraction(0)] * ncols
    for row, b in zip(tab.rows, tab.basis):
        values[b] = row[-1]
    y = tuple(values[:N])
    objective = sum((Fraction(c) * v for c, v in zip(lp.objective, y)), Fraction(0))

    # Duals from B^T pi = c_B on the surviving rows.
    basis_matrix_t = [[std[r][b] for r in live_rows] for b in tab.basis]
    pi_live = solve_square(basis_matrix_t, [cost[b] for b in tab.basis]) if tab.basis else []
    pi = [Fraction(0)] * nrows
    for r, val in zip(live_rows, pi_live or []):
        pi[r] = val * signs[r]

    duals = tuple(pi[:nG])
    upper_duals = {j: -pi[nG + t] for t, j in enumerate(upper_idx)}
    eq_duals = tuple(pi[nG + nU:])
    dual_objective = (
        sum((Fraction(lp.h[i]) * duals[i] for i in range(nG)), Fraction(0))
        - sum((Fraction(lp.upper[j]) * w for j, w in upper_duals.items()), Fraction(0))
        + sum((Fraction(lp.e[i]) * eq_duals[i] for i in range(nE)), Fraction(0))
    )
    return LpResult(
        status=LpStatus.OPTIMAL,
        x=y,
        objective=objective,
        basis=tuple(sorted(tab.basis)),
        duals=duals,
        upper_duals=upper_duals,
        eq_duals=eq_duals,
        dual_objective=dual_objective,
        pivots=tab.pivots,
    )
