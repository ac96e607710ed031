"""SDPA sparse exchange format for moment relaxations.

The file describes the SDPA dual form

    max  sum_i c_i x_i   s.t.   X = sum_i F_i x_i - F_0 >= 0

with one variable x_i per moment y_i (all of them, y_0 included). Every PSD
block of the relaxation becomes an SDPA block with F_0 = 0. The linear
equalities E y = f become a final diagonal (LP) block of size 2 * rows: the
entry pair (E_r y - f_r, f_r - E_r y), both >= 0. The objective c is zero.
See docs/sdpa_format.md.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Union

import numpy as np

from molp_moments.errors import DimensionError, SdpaFormatError
from molp_moments.moment import MomentRelaxation

logger = logging.getLogger(__name__)

Destination = Union[str, Path, IO[str]]


@dataclass
class SdpaProblem:
    """Parsed SDPA data. ``entries[(mat, blk)]`` holds 1-based (i, j, value) upper entries."""

    m: int
    block_struct: list[int]
    c: np.ndarray
    entries: dict[tuple[int, int], list[tuple[int, int, float]]] = field(default_factory=dict)

    @property
    def n_blocks(self) -> int:
        return len(self.block_struct)

    def _matrix(self, mat: int, blk: int) -> np.ndarray:
        size = abs(self.block_struct[blk - 1])
        out = np.zeros((size, size))
        for i, j, v in self.entries.get((mat, blk), []):
            out[i - 1, j - 1] += v
            if i != j:
                out[j - 1, i - 1] += v
        return out

    def evaluate(self, x: np.ndarray) -> list[np.ndarray]:
        """Block values of sum_i F_i x_i - F_0; LP blocks come back as diagonal vectors."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise DimensionError(f"expected {self.m} variables, got shape {x.shape}")
        values = []
        for blk in range(1, self.n_blocks + 1):
            total = -self._matrix(0, blk)
            for mat in range(1, self.m + 1):
                if (mat, blk) in self.entries:
                    total += x[mat - 1] * self._matrix(mat, blk)
            values.append(np.diag(total).copy() if self.block_struct[blk - 1] < 0 else total)
        return values


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write(rel: MomentRelaxation, out: IO[str]) -> int:
    blocks = [b for b in rel.blocks if b.size]
    n_eq = int(rel.E.shape[0])
    struct = [b.size for b in blocks] + ([-2 * n_eq] if n_eq else [])
    if not struct:
        raise DimensionError("relaxation has neither PSD blocks nor equalities")

    out.write(f'"moment relaxation order={rel.order} variables={",".join(rel.variables)}\n')
    out.write('"equalities are the final LP block as (E_r y - f_r, f_r - E_r y) pairs\n')
    out.write(f"{rel.n_moments}\n")
    out.write(f"{len(struct)}\n")
    out.write(" ".join(str(s) for s in struct) + "\n")
    out.write(" ".join("0" for _ in range(rel.n_moments)) + "\n")

    lines = 0
    lp_blk = len(blocks) + 1
    if n_eq:
        for r, value in enumerate(rel.f):
            if value:
                out.write(f"0 {lp_blk} {2 * r + 1} {2 * r + 1} {_fmt(value)}\n")
                out.write(f"0 {lp_blk} {2 * r + 2} {2 * r + 2} {_fmt(-value)}\n")
                lines += 2

    by_moment: dict[int, list[str]] = {}
    for blk, block in enumerate(blocks, start=1):
        coo = block.P.tocoo()
        for flat, mat, value in zip(coo.row, coo.col, coo.data):
            r, c = divmod(int(flat), block.size)
            if r > c or not value:
                continue
            by_moment.setdefault(int(mat), []).append(f"{mat + 1} {blk} {r + 1} {c + 1} {_fmt(value)}")
    if n_eq:
        coo = rel.E.tocoo()
        for row, mat, value in zip(coo.row, coo.col, coo.data):
            if value:
                by_moment.setdefault(int(mat), []).extend([
                    f"{mat + 1} {lp_blk} {2 * row + 1} {2 * row + 1} {_fmt(value)}",
                    f"{mat + 1} {lp_blk} {2 * row + 2} {2 * row + 2} {_fmt(-value)}",
                ])
    for mat in sorted(by_moment):
        for line in by_moment[mat]:
            out.write(line + "\n")
            lines += 1
    return lines


def export_sdpa(rel: MomentRelaxation, destination: Destination) -> int:
    """Write ``rel`` in SDPA sparse format; returns the number of entry lines."""
    if isinstance(destination, (str, Path)):
        path = Path(destination)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            lines = _write(rel, fh)
        logger.info("sdpa_exported path=%s moments=%d entries=%d", path, rel.n_moments, lines)
        return lines
    return _write(rel, destination)


def _numbers(line: str) -> list[str]:
    for ch in "{}(),":
        line = line.replace(ch, " ")
    return line.split()


def read_sdpa(source: Union[str, Path, IO[str]]) -> SdpaProblem:
    """Parse an SDPA sparse file (``.dat-s``)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and ln[0] not in '"*']
    if len(lines) < 4:
        raise SdpaFormatError("file ends before the header is complete")
    try:
        m = int(_numbers(lines[0])[0])
        n_blocks = int(_numbers(lines[1])[0])
        struct = [int(v) for v in _numbers(lines[2])[:n_blocks]]
        c = np.array([float(v) for v in _numbers(lines[3])[:m]])
    except (ValueError, IndexError) as exc:
        raise SdpaFormatError(f"malformed header: {exc}") from exc
    if len(struct) != n_blocks or c.shape != (m,):
        raise SdpaFormatError("header sizes disagree with the declared counts")

    problem = SdpaProblem(m=m, block_struct=struct, c=c)
    for lineno, line in enumerate(lines[4:], start=5):
        parts = _numbers(line)
        if len(parts) != 5:
            raise SdpaFormatError(f"entry line {lineno} has {len(parts)} fields")
        try:
            mat, blk, i, j = (int(v) for v in parts[:4])
            value = float(parts[4])
        except ValueError as exc:
            raise SdpaFormatError(f"entry line {lineno}: {exc}") from exc
        if not (0 <= mat <= m and 1 <= blk <= n_blocks):
            raise SdpaFormatError(f"entry line {lineno} references matrix {mat} block {blk}")
        size = abs(struct[blk - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise SdpaFormatError(f"entry line {lineno} index ({i}, {j}) outside block of size {size}")
        if i > j:
            i, j = j, i
        problem.entries.setdefault((mat, blk), []).append((i, j, value))
    return problem
