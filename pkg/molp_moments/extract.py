"""Reading the solutions of a polynomial system off a flat moment vector.

Steps: numeric rank with a gap test, a flat-extension search over the
orders t, a greedy pivot basis of the column space of M_t, one
multiplication matrix per variable, common triangularisation through the
real Schur form of a random combination, then exact rounding and
verification against the system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.linalg as la

from molp_moments.config import ExtractionSettings, FlatGap
from molp_moments.errors import (
    AmbiguousRankError,
    ComplexEigenvalueError,
    DimensionError,
    IllConditionedBasisError,
    OracleContradictionError,
)
from molp_moments.exact import matrix_rank
from molp_moments.model import MolpProblem, ValidTriplet, dot, verify_sys1
from molp_moments.moment import MonomialBasis, moment_matrix_map
from molp_moments.oracle import is_pareto, stacked_rows
from molp_moments.polysys import PolySystem

logger = logging.getLogger(__name__)


@dataclass
class FlatExtension:
    """Outcome of the flat-extension search. ``flat`` False means NotFlat."""

    flat: bool
    t: Optional[int]
    rank: Optional[int]
    d: int
    ranks: dict[int, int] = field(default_factory=dict)
    spectra: dict[int, list[float]] = field(default_factory=dict)
    reason: str = ""


@dataclass
class Rejection:
    point: dict[str, int]
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class ParetoCandidate:
    x: tuple[Fraction, ...]
    triplet: ValidTriplet
    system: int


@dataclass
class ExtractionResult:
    t: int
    rank: int
    pivots: list[str]
    numeric_points: list[dict[str, float]]
    verified: list[dict[str, int]]
    rejected: list[Rejection]


# ---------------------------------------------------------------------------
# Rank
# ---------------------------------------------------------------------------


def singular_values(mat: np.ndarray) -> np.ndarray:
    return la.svdvals(np.asarray(mat, dtype=float))


def numeric_rank(mat: np.ndarray, tol_rank: float = 1e-6, gap_factor: float = 1e3) -> int:
    """Count of sigma_j >= tol_rank * sigma_1, demanding sigma_r / sigma_{r+1} >= gap_factor."""
    sv = singular_values(mat)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    r = int(np.sum(sv >= tol_rank * sv[0]))
    if r < sv.size and sv[r] > 0 and sv[r - 1] / sv[r] < gap_factor:
        raise AmbiguousRankError(
            f"no clear gap after sigma_{r}: {sv[r - 1]:.3e} vs {sv[r]:.3e}", singular_values=sv
        )
    return r


def moment_matrix(y: np.ndarray, moments: MonomialBasis, t: int) -> np.ndarray:
    return np.asarray(y, dtype=float)[moment_matrix_map(moments.prefix(t), moments)]


def flat_gap(sys: PolySystem, mode: FlatGap = "practical") -> int:
    """The order drop d compared by the flat-extension test.

    Grid constraints fix each variable to a finite set and are confirmed
    exactly during verification, so the practical gap only counts the
    remaining constraints.
    """
    if mode == "strict":
        return max(1, sys.half_degree)
    return max(1, sys.nongrid_half_degree)


def flat_extension_check(
    y: np.ndarray,
    moments: MonomialBasis,
    order: int,
    d: int,
    settings: Optional[ExtractionSettings] = None,
) -> FlatExtension:
    """Smallest t in [d, order] with rank M_t = rank M_{t-d}.

    For a solver moment vector of an order-N relaxation, a grid equality of
    half-degree e is only imposed on moments up to degree 2(N - e) + deg h.
    The moments above that are free, and the analytic center gives them
    generic values, so the full M_N nearly always has more rank than the
    grid allows. Flatness is then found at some t < N, so the pipeline's
    order search goes past the minimal order. t = N is still accepted when
    its rank does match, as for exact atomic moments.
    """
    settings = settings or ExtractionSettings()
    ranks: dict[int, int] = {}
    spectra: dict[int, list[float]] = {}
    ambiguous: Optional[AmbiguousRankError] = None

    def rank_of(t: int) -> int:
        if t not in ranks:
            mat = moment_matrix(y, moments, t)
            spectra[t] = [float(s) for s in singular_values(mat)]
            ranks[t] = numeric_rank(mat, settings.tol_rank, settings.gap_factor)
        return ranks[t]

    for t in range(d, order + 1):
        try:
            high, low = rank_of(t), rank_of(t - d)
        except AmbiguousRankError as exc:
            logger.debug("flat_ambiguous t=%d message=%s", t, exc)
            ambiguous = exc
            continue
        if high == low:
            logger.info("flat_extension t=%d rank=%d d=%d", t, high, d)
            return FlatExtension(True, t, high, d, ranks, spectra)
    if ambiguous is not None:
        raise ambiguous
    return FlatExtension(False, None, None, d, ranks, spectra, reason=f"no flat t in [{d}, {order}]")


# ---------------------------------------------------------------------------
# Pivots and multiplication matrices
# ---------------------------------------------------------------------------


def extraction_basis(
    mat: np.ndarray,
    r: int,
    basis: MonomialBasis,
    settings: Optional[ExtractionSettings] = None,
    max_degree: Optional[int] = None,
) -> list[int]:
    """Indices of r monomials whose columns span the column space of ``mat``.

    Greedy Gram-Schmidt: each step takes the lowest-degree column whose
    residual is within ``pivot_ratio`` of the best remaining residual.
    """
    settings = settings or ExtractionSettings()
    mat = np.asarray(mat, dtype=float)
    if max_degree is None:
        max_degree = basis.degree
    candidates = [i for i in range(len(basis)) if basis.degree_of(i) <= max_degree]
    if r > len(candidates):
        raise IllConditionedBasisError(f"rank {r} exceeds {len(candidates)} candidate monomials")

    residual = mat.copy()
    pivots: list[int] = []
    for _ in range(r):
        norms = np.linalg.norm(residual[:, candidates], axis=0)
        best = float(norms.max()) if norms.size else 0.0
        if best <= 0.0:
            raise IllConditionedBasisError("column space exhausted before reaching the rank")
        pick = next(c for c, nrm in zip(candidates, norms) if nrm >= settings.pivot_ratio * best)
        q = residual[:, pick] / np.linalg.norm(residual[:, pick])
        residual = residual - np.outer(q, q @ residual)
        pivots.append(pick)
        candidates.remove(pick)

    cond = np.linalg.cond(mat[:, pivots])
    if not np.isfinite(cond) or cond > settings.cond_max:
        raise IllConditionedBasisError(f"pivot columns have condition number {cond:.3e}")
    return pivots


def _times_variable(exp: tuple[int, ...], var: int) -> tuple[int, ...]:
    return tuple(e + 1 if j == var else e for j, e in enumerate(exp))


def multiplication_matrices(
    mat: np.ndarray,
    pivots: Sequence[int],
    basis: MonomialBasis,
    settings: Optional[ExtractionSettings] = None,
) -> dict[str, np.ndarray]:
    """Column j of N_v expresses the column of v * pivot_j in the pivot columns."""
    settings = settings or ExtractionSettings()
    mat = np.asarray(mat, dtype=float)
    P = mat[:, list(pivots)]
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > settings.cond_max:
        raise IllConditionedBasisError(f"pivot columns have condition number {cond:.3e}")
    out = {}
    for var, name in enumerate(basis.variables):
        try:
            shifted = [basis.index[_times_variable(basis.exponents[p], var)] for p in pivots]
        except KeyError as exc:
            raise IllConditionedBasisError(
                f"{name} * pivot leaves the degree-{basis.degree} basis"
            ) from exc
        out[name] = la.lstsq(P, mat[:, shifted])[0]
    return out


def common_eigen_extract(mats: Mapping[str, np.ndarray], seed: int) -> list[dict[str, float]]:
    """One point per eigenvector of a seeded random convex combination."""
    names = list(mats)
    if not names:
        return []
    sizes = {m.shape for m in mats.values()}
    if len(sizes) != 1 or next(iter(sizes))[0] != next(iter(sizes))[1]:
        raise DimensionError(f"multiplication matrices must share one square shape, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = rng.random(len(names)) + 0.1
    weights /= weights.sum()
    combo = sum(w * mats[name] for w, name in zip(weights, names))

    T, Q = la.schur(combo, output="real")
    scale = 1.0 + float(np.max(np.abs(T)))
    sub = np.abs(np.diag(T, -1)) if T.shape[0] > 1 else np.array([])
    if sub.size and float(sub.max()) > 1e-8 * scale:
        raise ComplexEigenvalueError("random combination has a complex eigenvalue pair")

    points = []
    for j in range(Q.shape[1]):
        q = Q[:, j]
        points.append({name: float(q @ mats[name] @ q) for name in names})
    points.sort(key=lambda p: tuple(p[n] for n in names))
    return points


# ---------------------------------------------------------------------------
# Rounding, verification and projection
# ---------------------------------------------------------------------------


def round_and_verify(
    points: Sequence[Mapping[str, float]],
    sys: PolySystem,
    tol_round: float = 1e-4,
) -> tuple[list[dict[str, int]], list[Rejection]]:
    """Round to integers and check every constraint with exact arithmetic."""
    verified: list[dict[str, int]] = []
    rejected: list[Rejection] = []
    for point in points:
        missing = [v for v in sys.variables if v not in point]
        if missing:
            raise DimensionError(f"point lacks catalog variables {missing}")
        rounded = {v: int(round(point[v])) for v in sys.variables}
        off = [v for v in sys.variables if abs(point[v] - rounded[v]) > tol_round]
        if off:
            rejected.append(Rejection(rounded, "NonIntegral", ",".join(f"{v}={point[v]:.6g}" for v in off)))
            continue
        outside = [v for v in sys.variables if not 0 <= rounded[v] <= sys.spec(v).upper]
        if outside:
            rejected.append(Rejection(rounded, "OutOfRange", ",".join(outside)))
            continue
        violated = sys.violated({v: Fraction(val) for v, val in rounded.items()})
        if violated:
            rejected.append(Rejection(rounded, "ConstraintViolation", ",".join(violated)))
            continue
        if rounded not in verified:
            verified.append(rounded)
    return verified, rejected


def _triplet_of(full: Mapping[str, Fraction], sys: PolySystem, problem: MolpProblem) -> ValidTriplet:
    n, k = problem.n, problem.k
    M = sys.constants.M
    scale = sys.constants.for_system(sys.index)
    rows = sys.rows
    x = tuple(full[f"x{j + 1}"] / M for j in range(n))
    u_all = [full.get(f"u{s + 1}", Fraction(0)) / scale for s in range(rows.count)]
    u_box = [Fraction(0)] * n
    for offset, j in enumerate(rows.box_rows):
        u_box[j] = u_all[problem.m + offset]
    lam = tuple(full[f"lam{l + 1}"] / scale for l in range(k))
    return ValidTriplet(
        x=x, u=tuple(u_all[: problem.m]), lam=lam, u_box=tuple(u_box) if rows.box_rows else ()
    )


def _is_extreme(problem: MolpProblem, x: Sequence[Fraction]) -> bool:
    tight = [row for row, rhs in stacked_rows(problem) if dot(row, x) == rhs]
    return len(tight) >= problem.n and matrix_rank(tight) == problem.n


def unscale_and_project(
    points: Sequence[Mapping[str, int]],
    sys: PolySystem,
    problem: MolpProblem,
) -> tuple[list[ParetoCandidate], list[Rejection]]:
    """Undo the scaling and keep the x-projections that are Pareto extreme points."""
    candidates: list[ParetoCandidate] = []
    rejected: list[Rejection] = []
    for point in points:
        full = sys.complete_point({v: Fraction(val) for v, val in point.items()})
        triplet = _triplet_of(full, sys, problem)
        if not verify_sys1(problem, triplet):
            raise OracleContradictionError(
                f"verified point {dict(point)} does not give a valid triplet", system=sys.index
            )
        if not _is_extreme(problem, triplet.x):
            rejected.append(Rejection(dict(point), "NotExtreme", str([str(v) for v in triplet.x])))
            continue
        if not is_pareto(problem, triplet.x):
            if min(triplet.lam) == 0:
                rejected.append(Rejection(dict(point), "WeaklyEfficient", str([str(v) for v in triplet.x])))
                continue
            raise OracleContradictionError(
                f"x={[str(v) for v in triplet.x]} has positive weights but is dominated",
                system=sys.index,
            )
        if all(c.x != triplet.x for c in candidates):
            candidates.append(ParetoCandidate(triplet.x, triplet, sys.index))
    return candidates, rejected


def unscale_points(points: Sequence[Mapping[str, float]], variables: Sequence[str], scales) -> list[dict[str, float]]:
    """Map points from rescaled moment coordinates back to the catalog ranges."""
    return [{v: float(p[v]) * float(s) for v, s in zip(variables, scales)} for p in points]


def extract_solutions(
    y: np.ndarray,
    moments: MonomialBasis,
    flat: FlatExtension,
    sys: PolySystem,
    scales: Sequence[float],
    settings: Optional[ExtractionSettings] = None,
) -> ExtractionResult:
    """Pivots, multiplication matrices, eigen read-off and verification at the flat order."""
    settings = settings or ExtractionSettings()
    if not flat.flat:
        raise ValueError("extraction needs a flat moment vector")
    t, r = flat.t, flat.rank
    basis = moments.prefix(t)
    mat = moment_matrix(y, moments, t)
    pivots = extraction_basis(mat, r, basis, settings, max_degree=t - 1)
    mults = multiplication_matrices(mat, pivots, basis, settings)
    numeric = common_eigen_extract(mults, settings.seed)
    numeric = unscale_points(numeric, basis.variables, scales)
    verified, rejected = round_and_verify(numeric, sys, settings.tol_round)
    logger.info(
        "extraction system=%d t=%d rank=%d verified=%d rejected=%d",
        sys.index, t, r, len(verified), len(rejected),
    )
    return ExtractionResult(
        t=t,
        rank=r,
        pivots=[basis.label(p) for p in pivots],
        numeric_points=numeric,
        verified=verified,
        rejected=rejected,
    )
