"""Moment-matrix SDP relaxation of a PolySystem.

For order N the unknown is the moment vector y indexed by the monomials of
degree <= 2N. The relaxation asks for

    M_N(y) >= 0,   M_{N - s_g}(g y) >= 0 for every inequality g,
    L_y(m * h) = 0 for every equality h and monomial m with deg(m * h) <= 2N,
    y_0 = 1

with a constant objective. Every block is stored as a sparse linear map from
y to the row-major vectorised block, so the solver only sees matrices.

Rescaling: each variable v with range {0..K} is written as v = K v' and each
constraint is divided by its largest coefficient. Moments therefore live in
[0, 1]; ``MomentRelaxation.scales`` maps extracted points back.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, comb
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from molp_moments.errors import DimensionError, OrderTooSmallError
from molp_moments.polynomial import Monomial, Polynomial
from molp_moments.polysys import PolySystem

logger = logging.getLogger(__name__)

Exponent = tuple[int, ...]


# ---------------------------------------------------------------------------
# Monomial bases
# ---------------------------------------------------------------------------


def _compositions(total: int, parts: int) -> Iterable[Exponent]:
    """Exponent tuples of a fixed degree in descending lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class MonomialBasis:
    """Graded-lex ordered monomials of degree <= ``degree``; index 0 is 1."""

    variables: tuple[str, ...]
    degree: int
    exponents: tuple[Exponent, ...]
    index: dict[Exponent, int] = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.exponents)

    def prefix(self, d: int) -> "MonomialBasis":
        """The basis of degree <= d (a prefix, since the order is graded)."""
        if d > self.degree:
            raise ValueError(f"degree {d} exceeds basis degree {self.degree}")
        size = comb(len(self.variables) + d, d)
        exps = self.exponents[:size]
        return MonomialBasis(self.variables, d, exps, {e: i for i, e in enumerate(exps)})

    def label(self, idx: int) -> str:
        parts = [
            v if e == 1 else f"{v}^{e}" for v, e in zip(self.variables, self.exponents[idx]) if e
        ]
        return "*".join(parts) or "1"

    def as_monomial(self, idx: int) -> Monomial:
        return tuple((v, e) for v, e in zip(self.variables, self.exponents[idx]) if e)

    def degree_of(self, idx: int) -> int:
        return sum(self.exponents[idx])


def enumerate_monomials(v: int, d: int, variables: Optional[Sequence[str]] = None) -> MonomialBasis:
    """All monomials of degree <= d in v variables; size C(v+d, d)."""
    if variables is None:
        variables = tuple(f"x{j + 1}" for j in range(v))
    variables = tuple(variables)
    if len(variables) != v:
        raise DimensionError(f"{len(variables)} names for {v} variables")
    if v == 0:
        exps: list[Exponent] = [()]
    else:
        exps = [e for deg in range(d + 1) for e in _compositions(deg, v)]
    return MonomialBasis(variables, d, tuple(exps), {e: i for i, e in enumerate(exps)})


def _add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def to_exponents(poly: Polynomial, variables: Sequence[str]) -> dict[Exponent, Fraction]:
    position = {v: i for i, v in enumerate(variables)}
    out: dict[Exponent, Fraction] = {}
    for mono, coef in poly.items():
        exp = [0] * len(variables)
        for var, e in mono:
            if var not in position:
                raise DimensionError(f"variable {var} is not in the catalog")
            exp[position[var]] = e
        out[tuple(exp)] = coef
    return out


# ---------------------------------------------------------------------------
# Block maps
# ---------------------------------------------------------------------------


@dataclass
class AffineBlock:
    """Symmetric matrix-valued linear map y -> mat(P @ y), row-major."""

    label: str
    order: int
    size: int
    P: sp.csr_matrix

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        mat = np.asarray(self.P @ y).reshape(self.size, self.size)
        return 0.5 * (mat + mat.T)


def moment_matrix_map(basis: MonomialBasis, moments: MonomialBasis) -> np.ndarray:
    """Integer matrix whose (r, c) entry is the moment index of basis_r * basis_c."""
    size = len(basis)
    out = np.empty((size, size), dtype=np.int64)
    for r, er in enumerate(basis.exponents):
        for c in range(r, size):
            idx = moments.index[_add(er, basis.exponents[c])]
            out[r, c] = idx
            out[c, r] = idx
    return out


def localizing_matrix_map(
    g: Polynomial | Mapping[Exponent, float],
    basis: MonomialBasis,
    moments: MonomialBasis,
    label: str = "",
) -> AffineBlock:
    """Entry (r, c) = sum_delta g_delta y_{delta + basis_r + basis_c}."""
    terms = to_exponents(g, moments.variables) if isinstance(g, Polynomial) else dict(g)
    top = max((sum(e) for e in terms), default=0)
    if 2 * basis.degree + top > moments.degree:
        raise OrderTooSmallError(label or "g", ceil(top / 2) + basis.degree, moments.degree // 2)
    size = len(basis)
    rows, cols, vals = [], [], []
    for r, er in enumerate(basis.exponents):
        for c in range(r, size):
            shift = _add(er, basis.exponents[c])
            for delta, coef in terms.items():
                idx = moments.index[_add(shift, delta)]
                rows.append(r * size + c)
                cols.append(idx)
                vals.append(float(coef))
                if c != r:
                    rows.append(c * size + r)
                    cols.append(idx)
                    vals.append(float(coef))
    P = sp.csr_matrix((vals, (rows, cols)), shape=(size * size, len(moments)))
    P.sum_duplicates()
    return AffineBlock(label=label, order=basis.degree, size=size, P=P)


# ---------------------------------------------------------------------------
# Relaxation
# ---------------------------------------------------------------------------


@dataclass
class MomentRelaxation:
    order: int
    variables: tuple[str, ...]
    scales: np.ndarray
    moments: MonomialBasis
    blocks: list[AffineBlock]
    E: sp.csr_matrix
    f: np.ndarray
    eq_labels: list[str]
    system: Optional[PolySystem] = None

    @property
    def n_moments(self) -> int:
        return len(self.moments)

    def moment_basis(self, t: int) -> MonomialBasis:
        return self.moments.prefix(t)

    def moment_matrix(self, y: np.ndarray, t: int) -> np.ndarray:
        """M_t(y) read from the moment vector."""
        if len(y) != self.n_moments:
            raise DimensionError(f"moment vector has length {len(y)}, expected {self.n_moments}")
        index = moment_matrix_map(self.moments.prefix(t), self.moments)
        return np.asarray(y)[index]

    def summary(self) -> dict:
        return {
            "order": self.order,
            "variables": len(self.variables),
            "moments": self.n_moments,
            "blocks": [b.size for b in self.blocks],
            "equalities": int(self.E.shape[0]),
        }


def _prepared(poly: Polynomial, scales: Mapping[str, int], rescale: bool) -> Polynomial:
    if not rescale:
        return poly
    scaled = poly.scaled_variables(scales)
    top = scaled.max_abs_coefficient()
    return scaled * (1 / top) if top else scaled


def _equality_rows(h: dict[Exponent, Fraction], shifts: MonomialBasis, moments: MonomialBasis):
    for gamma in shifts.exponents:
        row: dict[int, Fraction] = {}
        for delta, coef in h.items():
            idx = moments.index[_add(gamma, delta)]
            row[idx] = row.get(idx, Fraction(0)) + coef
        items = sorted((i, c) for i, c in row.items() if c)
        if items:
            yield items


def assemble_relaxation(sys: PolySystem, N: int, rescale: bool = True) -> MomentRelaxation:
    """Build the order-N relaxation of ``sys``."""
    for c in sys.constraints:
        if c.half_degree > N:
            raise OrderTooSmallError(c.label, c.half_degree, N)

    variables = sys.variables
    scale_map = {v.name: (v.upper if rescale and v.upper > 0 else 1) for v in sys.catalog}
    moments = enumerate_monomials(len(variables), 2 * N, variables)

    blocks = [localizing_matrix_map({(0,) * len(variables): 1.0}, moments.prefix(N), moments, "moment")]
    for c in sys.inequalities:
        g = _prepared(c.poly, scale_map, rescale)
        basis = moments.prefix(N - c.half_degree)
        blocks.append(localizing_matrix_map(g, basis, moments, c.label))

    seen: dict[tuple, str] = {}
    eq_rows: list[list[tuple[int, Fraction]]] = []
    rhs: list[float] = []
    labels: list[str] = []

    def _add_row(items, value: Fraction, label: str):
        lead = items[0][1]
        key = (tuple((i, c / lead) for i, c in items), value / lead)
        if key in seen:
            return
        seen[key] = label
        eq_rows.append(items)
        rhs.append(float(value))
        labels.append(label)

    _add_row([(0, Fraction(1))], Fraction(1), "normalization")
    for c in sys.equalities:
        h = to_exponents(_prepared(c.poly, scale_map, rescale), variables)
        shifts = moments.prefix(2 * (N - c.half_degree))
        for items in _equality_rows(h, shifts, moments):
            _add_row(items, Fraction(0), c.label)

    data, row_idx, col_idx = [], [], []
    for r, items in enumerate(eq_rows):
        for i, coef in items:
            row_idx.append(r)
            col_idx.append(i)
            data.append(float(coef))
    E = sp.csr_matrix((data, (row_idx, col_idx)), shape=(len(eq_rows), len(moments)))

    rel = MomentRelaxation(
        order=N,
        variables=variables,
        scales=np.array([float(scale_map[v]) for v in variables]),
        moments=moments,
        blocks=blocks,
        E=E,
        f=np.array(rhs),
        eq_labels=labels,
        system=sys,
    )
    logger.info(
        "relaxation_assembled system=%d order=%d moments=%d blocks=%s equalities=%d",
        sys.index, N, rel.n_moments, [b.size for b in blocks], E.shape[0],
    )
    return rel


def dirac_moments(rel: MomentRelaxation, point: Mapping[str, float]) -> np.ndarray:
    """Moment vector of the point mass at ``point`` (catalog coordinates, unscaled)."""
    z = np.array([float(point[v]) for v in rel.variables]) / rel.scales
    exps = np.array(rel.moments.exponents, dtype=float).reshape(rel.n_moments, len(rel.variables))
    return np.prod(np.power(z, exps), axis=1) if len(rel.variables) else np.ones(rel.n_moments)
