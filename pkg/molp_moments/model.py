"""Exact problem representation, ingestion and validation for MOLP instances.

The problem is

    min  (c^1 x, ..., c^k x)   s.t.  Ax >= b,  0 <= x <= ub_primal

with integer data. Rational input is cleared to integers row by row at
ingestion; the objective rows may be rescaled by positive constants without
changing the Pareto set.

Design contract:
    - MolpProblem and ValidTriplet are frozen; share them freely.
    - ``validate`` never raises on a well-formed problem; it returns
      Diagnostic records, severity "error" only for an empty region.
    - ``verify_sys1`` is a pure exact check returning a boolean.

Public surface:
    parse_problem(text) -> MolpProblem
    load_problem(path) -> MolpProblem
    serialize_problem(problem) -> str
    validate(problem) -> list[Diagnostic]
    weighted_objective(C, lam) -> tuple[Rational, ...]
    verify_sys1(problem, triplet) -> bool
    system_rows(problem, box_rows) -> ConstraintRows
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm
from pathlib import Path
from typing import Literal, Optional, Sequence

import jsonschema
import yaml

from molp_moments.errors import DimensionError, InvalidWeightError, SchemaError

logger = logging.getLogger(__name__)

Rational = Fraction
Severity = Literal["error", "warning", "info"]

_SCHEMA_PATH = Path(__file__).parent / "schemas" / "molp_problem.json"


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MolpProblem:
    """Integer MOLP instance. Rows of ``C`` are the objectives c^1..c^k."""

    C: tuple[tuple[int, ...], ...]
    A: tuple[tuple[int, ...], ...]
    b: tuple[int, ...]
    ub_primal: tuple[int, ...]
    ub_dual: tuple[int, ...]
    names: Optional[tuple[str, ...]] = None
    name: str = ""

    def __post_init__(self):
        if not self.C:
            raise DimensionError("C needs at least one objective row")
        n = len(self.C[0])
        if n < 1:
            raise DimensionError("C rows must have at least one column")
        for label, rows in (("C", self.C), ("A", self.A)):
            for idx, row in enumerate(rows):
                if len(row) != n:
                    raise DimensionError(f"{label} row {idx + 1} has {len(row)} columns, expected {n}")
        if len(self.b) != len(self.A):
            raise DimensionError(f"b has length {len(self.b)}, A has {len(self.A)} rows")
        if len(self.ub_primal) != n:
            raise DimensionError(f"ub_primal has length {len(self.ub_primal)}, expected {n}")
        if len(self.ub_dual) != len(self.A):
            raise DimensionError(f"ub_dual has length {len(self.ub_dual)}, expected {len(self.A)}")
        if any(v < 1 for v in self.ub_primal) or any(v < 1 for v in self.ub_dual):
            raise DimensionError("ub_primal and ub_dual must be positive integers")
        if self.names is not None and len(self.names) != n:
            raise DimensionError(f"names has length {len(self.names)}, expected {n}")

    @property
    def k(self) -> int:
        return len(self.C)

    @property
    def m(self) -> int:
        return len(self.A)

    @property
    def n(self) -> int:
        return len(self.C[0])

    def with_dual_bounds(self, ub_dual: Sequence[int]) -> "MolpProblem":
        return MolpProblem(
            C=self.C, A=self.A, b=self.b, ub_primal=self.ub_primal,
            ub_dual=tuple(int(v) for v in ub_dual), names=self.names, name=self.name,
        )

    def to_dict(self) -> dict:
        data = {
            "k": self.k,
            "m": self.m,
            "n": self.n,
            "C": [list(r) for r in self.C],
            "A": [list(r) for r in self.A],
            "b": list(self.b),
            "ub_primal": list(self.ub_primal),
            "ub_dual": list(self.ub_dual),
        }
        if self.name:
            data = {"name": self.name, **data}
        if self.names is not None:
            data["names"] = list(self.names)
        return data


@dataclass(frozen=True)
class ValidTriplet:
    """A solution (x, u, lambda) of Sys1.

    ``u_box`` holds multipliers of the rows -x_j >= -ub_j when the system
    carries them; empty means all zero.
    """

    x: tuple[Rational, ...]
    u: tuple[Rational, ...]
    lam: tuple[Rational, ...]
    u_box: tuple[Rational, ...] = ()


@dataclass
class Diagnostic:
    code: str
    severity: Severity
    message: str
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConstraintRows:
    """Rows G x >= h used by a polynomial system.

    The first ``m`` rows are A; the rest are box rows -x_j >= -ub_j for the
    indices in ``box_rows``.
    """

    G: tuple[tuple[int, ...], ...]
    h: tuple[int, ...]
    ub_dual: tuple[int, ...]
    box_rows: tuple[int, ...]
    labels: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.G)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def _schema() -> dict:
    return json.loads(_SCHEMA_PATH.read_text())


def _to_fraction(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value.replace(" ", ""))
    return Fraction(value)


def _clear_row(row: Sequence, rhs=None) -> tuple[list[int], Optional[int]]:
    entries = [_to_fraction(v) for v in row]
    if rhs is not None:
        entries.append(_to_fraction(rhs))
    scale = lcm(*(f.denominator for f in entries)) if entries else 1
    cleared = [int(f * scale) for f in entries]
    if rhs is None:
        return cleared, None
    return cleared[:-1], cleared[-1]


def problem_from_dict(doc: dict) -> MolpProblem:
    """Build a problem from an already-parsed document."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.path) or "<root>"
        raise SchemaError(f"{where}: {first.message}")

    k, m, n = doc["k"], doc["m"], doc["n"]
    if len(doc["C"]) != k:
        raise DimensionError(f"k={k} but C has {len(doc['C'])} rows")
    if len(doc["A"]) != m or len(doc["b"]) != m:
        raise DimensionError(f"m={m} but A has {len(doc['A'])} rows and b has {len(doc['b'])}")
    for label in ("C", "A"):
        for idx, row in enumerate(doc[label]):
            if len(row) != n:
                raise DimensionError(f"n={n} but {label} row {idx + 1} has {len(row)} columns")

    C = tuple(tuple(_clear_row(r)[0]) for r in doc["C"])
    A_rows, b = [], []
    for row, rhs in zip(doc["A"], doc["b"]):
        cleared, cleared_rhs = _clear_row(row, rhs)
        A_rows.append(tuple(cleared))
        b.append(cleared_rhs)
    names = tuple(doc["names"]) if doc.get("names") is not None else None
    return MolpProblem(
        C=C,
        A=tuple(A_rows),
        b=tuple(b),
        ub_primal=tuple(doc["ub_primal"]),
        ub_dual=tuple(doc["ub_dual"]),
        names=names,
        name=doc.get("name", ""),
    )


def parse_problem(text: str) -> MolpProblem:
    """Parse a YAML (or JSON) problem document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"not a valid YAML/JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("problem document must be a mapping")
    return problem_from_dict(doc)


def load_problem(path: str | Path) -> MolpProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    problem = parse_problem(text)
    logger.debug("problem_loaded path=%s k=%d m=%d n=%d", path, problem.k, problem.m, problem.n)
    return problem


def serialize_problem(problem: MolpProblem) -> str:
    return yaml.safe_dump(problem.to_dict(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# Arithmetic helpers
# ---------------------------------------------------------------------------


def dot(row: Sequence, vec: Sequence) -> Fraction:
    return sum((Fraction(a) * b for a, b in zip(row, vec)), Fraction(0))


def weighted_objective(C: Sequence[Sequence[int]], lam: Sequence) -> tuple[Rational, ...]:
    """Return sum_l lam_l * c^l exactly."""
    if len(lam) != len(C):
        raise DimensionError(f"lambda has length {len(lam)}, C has {len(C)} rows")
    weights = [Fraction(v) for v in lam]
    if any(w < 0 for w in weights) or all(w == 0 for w in weights):
        raise InvalidWeightError("lambda must be nonnegative and not all zero")
    n = len(C[0])
    return tuple(sum((w * row[j] for w, row in zip(weights, C)), Fraction(0)) for j in range(n))


def system_rows(
    problem: MolpProblem,
    box_rows: Sequence[int] = (),
    box_dual_bounds: Optional[Sequence[int]] = None,
) -> ConstraintRows:
    """Stack A with the selected box rows -x_j >= -ub_j."""
    box = tuple(sorted(box_rows))
    G = list(problem.A)
    h = list(problem.b)
    labels = [f"a{s + 1}" for s in range(problem.m)]
    for j in box:
        G.append(tuple(-1 if c == j else 0 for c in range(problem.n)))
        h.append(-problem.ub_primal[j])
        labels.append(f"box{j + 1}")
    if box_dual_bounds is None:
        box_dual_bounds = [max(problem.ub_dual, default=1)] * len(box)
    if len(box_dual_bounds) != len(box):
        raise DimensionError("one dual bound per box row is required")
    return ConstraintRows(
        G=tuple(G),
        h=tuple(h),
        ub_dual=tuple(problem.ub_dual) + tuple(int(v) for v in box_dual_bounds),
        box_rows=box,
        labels=tuple(labels),
    )


def verify_sys1(problem: MolpProblem, t: ValidTriplet) -> bool:
    """Exact check of Sys1 (primal/dual feasibility plus complementary slackness)."""
    n, m, k = problem.n, problem.m, problem.k
    if len(t.x) != n or len(t.u) != m or len(t.lam) != k:
        return False
    u_box = tuple(t.u_box) if t.u_box else (Fraction(0),) * n
    if len(u_box) != n:
        return False

    x = [Fraction(v) for v in t.x]
    u = [Fraction(v) for v in t.u]
    lam = [Fraction(v) for v in t.lam]
    w_box = [Fraction(v) for v in u_box]

    if any(v < 0 for v in x) or any(x[j] > problem.ub_primal[j] for j in range(n)):
        return False
    slacks = [dot(problem.A[s], x) - problem.b[s] for s in range(m)]
    if any(s < 0 for s in slacks):
        return False
    if any(v < 0 for v in u) or any(v < 0 for v in w_box) or any(v < 0 for v in lam):
        return False
    if sum(lam) != 1:
        return False

    weighted = weighted_objective(problem.C, lam)
    reduced = [
        weighted[j] - sum((u[s] * problem.A[s][j] for s in range(m)), Fraction(0)) + w_box[j]
        for j in range(n)
    ]
    if any(r < 0 for r in reduced):
        return False

    box_slacks = [problem.ub_primal[j] - x[j] for j in range(n)]
    primal_cs = sum((u[s] * slacks[s] for s in range(m)), Fraction(0)) + sum(
        (w_box[j] * box_slacks[j] for j in range(n)), Fraction(0)
    )
    if primal_cs != 0:
        return False
    return sum((reduced[j] * x[j] for j in range(n)), Fraction(0)) == 0


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(problem: MolpProblem) -> list[Diagnostic]:
    """Check the modelling assumptions; never raises."""
    from molp_moments.simplex import LpInstance, LpStatus, simplex_solve

    out: list[Diagnostic] = []
    n = problem.n

    if all(v == 0 for row in problem.C for v in row):
        out.append(Diagnostic(
            "zero_objective", "warning",
            "C = 0: the origin is in the objective cone and the whole region is Pareto-optimal",
        ))
    if problem.m == 0:
        out.append(Diagnostic(
            "no_constraint_rows", "info",
            "no rows in A; only the zero-dual system applies",
        ))

    def _lp(objective, rows, rhs, upper):
        return simplex_solve(LpInstance(objective=objective, G=rows, h=rhs, upper=upper))

    zero = [0] * n
    feasible = _lp(zero, problem.A, problem.b, problem.ub_primal)
    if feasible.status is LpStatus.INFEASIBLE:
        out.append(Diagnostic("infeasible", "error", "the region {Ax >= b, 0 <= x <= ub} is empty"))
        return out

    unbounded = []
    maxima: dict[int, Fraction] = {}
    for j in range(n):
        objective = [-1 if c == j else 0 for c in range(n)]
        res = _lp(objective, problem.A, problem.b, None)
        if res.status is LpStatus.UNBOUNDED:
            unbounded.append(j)
        elif res.status is LpStatus.OPTIMAL:
            maxima[j] = -res.objective
    if unbounded:
        out.append(Diagnostic(
            "unbounded_without_box", "info",
            "region is unbounded without the box; box rows close it",
            {"variables": [j + 1 for j in unbounded]},
        ))
    else:
        binding = {j + 1: str(v) for j, v in maxima.items() if v > problem.ub_primal[j]}
        if binding:
            out.append(Diagnostic(
                "box_not_redundant", "warning",
                "ub_primal cuts the region; box rows join the systems where needed",
                {"maxima": binding},
            ))

    for s in range(problem.m):
        others = [problem.A[r] for r in range(problem.m) if r != s]
        rhs = [problem.b[r] for r in range(problem.m) if r != s]
        res = _lp(list(problem.A[s]), others, rhs, problem.ub_primal)
        if res.status is LpStatus.OPTIMAL and res.objective >= problem.b[s]:
            out.append(Diagnostic(
                "redundant_row", "warning",
                f"row {s + 1} is implied by the other constraints",
                {"row": s + 1},
            ))
    return out


def has_errors(diagnostics: Sequence[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)
