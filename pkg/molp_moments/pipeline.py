"""End-to-end solve: one moment hierarchy per polynomial system, merged exactly.

For each system the relaxation order starts at the system's half-degree and
grows until the solver output is flat and every extracted atom verifies, or
the order/moment limits are reached.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Optional, Sequence

from molp_moments.config import PipelineSettings
from molp_moments.errors import (
    AmbiguousRankError,
    ComplexEigenvalueError,
    IllConditionedBasisError,
    MolpError,
    NotFeasibleError,
)
from molp_moments.extract import (
    ParetoCandidate,
    Rejection,
    extract_solutions,
    flat_extension_check,
    flat_gap,
    unscale_and_project,
)
from molp_moments.ipm import SolveStatus, solve
from molp_moments.model import ConstraintRows, Diagnostic, MolpProblem, has_errors, system_rows, validate
from molp_moments.moment import assemble_relaxation
from molp_moments.oracle import required_box_rows
from molp_moments.polysys import PolySystem, build_sys_i, build_zero_dual_system, eliminate_last_lambda
from molp_moments.scaling import ScalingConstants, compute_constants

logger = logging.getLogger(__name__)

Point = tuple[Fraction, ...]

# Rejections that mean the relaxation was not tight enough yet.
RETRY_REASONS = frozenset({"NonIntegral", "OutOfRange", "ConstraintViolation"})


@dataclass
class OrderAttempt:
    order: int
    moments: int
    status: str
    iterations: int = 0
    eq_residual: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    ranks: dict[int, int] = field(default_factory=dict)
    flat_t: Optional[int] = None
    rank: Optional[int] = None
    verified: int = 0
    note: str = ""


@dataclass
class SystemOutcome:
    """Result for one system. ``status`` is ok, empty or failed."""

    index: int
    variant: str
    status: str
    order: Optional[int] = None
    rank: Optional[int] = None
    attempts: list[OrderAttempt] = field(default_factory=list)
    candidates: list[ParetoCandidate] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)
    error: str = ""
    numerical: bool = False
    seconds: float = 0.0


@dataclass
class PipelineResult:
    problem: MolpProblem
    settings: PipelineSettings
    constants: ScalingConstants
    rows: ConstraintRows
    diagnostics: list[Diagnostic]
    outcomes: list[SystemOutcome]
    pareto: list[Point]
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> list[SystemOutcome]:
        return [o for o in self.outcomes if o.status == "failed"]


def build_system(
    problem: MolpProblem,
    i: int,
    constants: ScalingConstants,
    rows: ConstraintRows,
    settings: PipelineSettings,
) -> PolySystem:
    if i == 0:
        sys = build_zero_dual_system(problem, constants, rows)
    else:
        sys = build_sys_i(problem, i, constants, settings.variant, rows)
    if settings.eliminate_lambda:
        sys = eliminate_last_lambda(sys)
    return sys


def _orders(sys: PolySystem, settings: PipelineSettings) -> range:
    if settings.order is not None:
        return range(settings.order, settings.order + 1)
    start = max(1, sys.half_degree)
    return range(start, start + settings.order_slack + 1)


def run_system(
    problem: MolpProblem,
    i: int,
    constants: ScalingConstants,
    rows: ConstraintRows,
    settings: PipelineSettings,
) -> SystemOutcome:
    """Order search for one system; module errors are recorded, not raised."""
    started = time.perf_counter()
    outcome = SystemOutcome(index=i, variant="zero-dual" if i == 0 else settings.variant, status="failed")
    try:
        _search(problem, i, constants, rows, settings, outcome)
    except MolpError as exc:
        exc.with_system(i)
        outcome.status = "failed"
        outcome.error = f"{type(exc).__name__}: {exc}"
        outcome.numerical = not isinstance(exc, NotFeasibleError)
        logger.warning("system_failed system=%d error=%s", i, outcome.error)
    outcome.seconds = time.perf_counter() - started
    return outcome


def _search(problem, i, constants, rows, settings, outcome: SystemOutcome) -> None:
    sys = build_system(problem, i, constants, rows, settings)
    d = flat_gap(sys, settings.extraction.flat_gap)
    v = len(sys.variables)

    for N in _orders(sys, settings):
        n_moments = comb(v + 2 * N, 2 * N)
        attempt = OrderAttempt(order=N, moments=n_moments, status="")
        outcome.attempts.append(attempt)
        if n_moments > settings.max_moments:
            attempt.status = "Skipped"
            attempt.note = f"{n_moments} moments exceed the cap {settings.max_moments}"
            break

        rel = assemble_relaxation(sys, N, rescale=settings.rescale)
        sol = solve(rel, settings.solver)
        attempt.status = sol.status.value
        attempt.iterations = sol.iterations
        attempt.eq_residual = sol.eq_residual
        attempt.min_eigenvalue = sol.min_eigenvalue
        if sol.status is SolveStatus.INFEASIBLE:
            outcome.status = "empty"
            outcome.order = N
            attempt.note = sol.message
            logger.info("system_empty system=%d order=%d", i, N)
            return
        if not sol.solved:
            attempt.note = sol.message
            outcome.numerical = True
            continue

        try:
            flat = flat_extension_check(sol.y, rel.moments, N, d, settings.extraction)
        except AmbiguousRankError as exc:
            attempt.note = str(exc)
            continue
        attempt.ranks = dict(flat.ranks)
        if not flat.flat:
            attempt.note = flat.reason
            continue
        attempt.flat_t, attempt.rank = flat.t, flat.rank

        try:
            extraction = extract_solutions(sol.y, rel.moments, flat, sys, rel.scales, settings.extraction)
        except (IllConditionedBasisError, ComplexEigenvalueError) as exc:
            attempt.note = f"{type(exc).__name__}: {exc}"
            continue
        attempt.verified = len(extraction.verified)
        retry = [r for r in extraction.rejected if r.reason in RETRY_REASONS]
        if retry:
            attempt.note = "; ".join(f"{r.reason} {r.detail}" for r in retry)
            continue

        candidates, projected = unscale_and_project(extraction.verified, sys, problem)
        outcome.status = "ok"
        outcome.order = N
        outcome.rank = flat.rank
        outcome.candidates = candidates
        outcome.rejections = projected
        outcome.numerical = False
        return

    outcome.status = "failed"
    outcome.numerical = True
    outcome.error = outcome.error or "NotFlat within the order limit"


def _run_one(args) -> SystemOutcome:
    return run_system(*args)


def run_pipeline(problem: MolpProblem, settings: Optional[PipelineSettings] = None) -> PipelineResult:
    settings = settings or PipelineSettings()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    diagnostics = validate(problem)
    if has_errors(diagnostics):
        raise NotFeasibleError("; ".join(d.message for d in diagnostics if d.severity == "error"))
    if settings.scaling.ub_dual is not None:
        bounds = tuple(settings.scaling.ub_dual)
        if len(bounds) == 1:
            bounds = bounds * problem.m
        problem = problem.with_dual_bounds(bounds)

    box = required_box_rows(problem, cap=settings.scaling.cap)
    rows = system_rows(problem, box)
    constants = compute_constants(problem, settings.scaling, settings.variant, rows)
    timings["scaling"] = time.perf_counter() - t0

    indices: Sequence[int]
    if settings.systems is not None:
        indices = list(settings.systems)
    else:
        indices = ([0] if settings.include_zero_dual else []) + list(range(1, rows.count + 1))

    t1 = time.perf_counter()
    jobs = [(problem, i, constants, rows, settings) for i in indices]
    if settings.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=settings.jobs) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(job) for job in jobs]
    timings["systems"] = time.perf_counter() - t1
    for o in outcomes:
        timings[f"system_{o.index}"] = o.seconds

    pareto = merge_candidates(outcomes)
    timings["total"] = time.perf_counter() - t0
    logger.info(
        "pipeline_finished systems=%d pareto=%d failed=%d seconds=%.1f",
        len(outcomes), len(pareto), sum(o.status == "failed" for o in outcomes), timings["total"],
    )
    return PipelineResult(
        problem=problem,
        settings=settings,
        constants=constants,
        rows=rows,
        diagnostics=diagnostics,
        outcomes=outcomes,
        pareto=pareto,
        timings=timings,
    )


def merge_candidates(outcomes: Sequence[SystemOutcome]) -> list[Point]:
    """Sorted exact union of the x-projections."""
    return sorted({c.x for o in outcomes for c in o.candidates})
