"""Small exact linear algebra over Fractions (Gaussian elimination)."""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence


def _as_rows(matrix: Sequence[Sequence]) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in matrix]


def solve_square(matrix: Sequence[Sequence], rhs: Sequence) -> Optional[list[Fraction]]:
    """Solve ``matrix @ z = rhs`` exactly; None when the matrix is singular."""
    size = len(matrix)
    aug = [row + [Fraction(r)] for row, r in zip(_as_rows(matrix), rhs)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        pivot_row = [v * inv for v in aug[col]]
        aug[col] = pivot_row
        for r in range(size):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * p for a, p in zip(aug[r], pivot_row)]
    return [aug[r][size] for r in range(size)]


def matrix_rank(matrix: Sequence[Sequence]) -> int:
    rows = _as_rows(matrix)
    if not rows:
        return 0
    width = len(rows[0])
    rank = 0
    for col in range(width):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                factor = rows[r][col] / rows[rank][col]
                rows[r] = [a - factor * p for a, p in zip(rows[r], rows[rank])]
        rank += 1
        if rank == len(rows):
            break
    return rank
