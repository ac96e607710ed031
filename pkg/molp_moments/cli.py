"""
Command-line entry point.

Usage:
    molp-moments solve instances/example1.yaml --M 1 --Mi 6 --ubdual 1
    molp-moments oracle instances/example1.yaml
    molp-moments compare instances/example1.yaml --jobs 4
    molp-moments bounds instances/example1.yaml
    molp-moments export-sdpa instances/example1.yaml --system 1 --order 4 --output sys1.dat-s
    molp-moments plot instances/example1.yaml --out-dir plots/

Exit codes: 0 success or agreement, 1 mismatch, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from molp_moments.config import PipelineSettings
from molp_moments.errors import (
    INPUT_ERRORS,
    CombinatorialLimitError,
    MissingDependencyError,
    MolpError,
    NonAffineReplacementError,
    OrderTooSmallError,
    UnassignedVariableError,
)
from molp_moments.model import has_errors, load_problem, system_rows, validate
from molp_moments.moment import assemble_relaxation
from molp_moments.oracle import pareto_edges, pareto_extreme_set, required_box_rows
from molp_moments.pipeline import build_system, run_pipeline
from molp_moments.report import (
    ParetoReport,
    fmt_point,
    report_from_oracle,
    report_from_pipeline,
    write_plot_data,
)
from molp_moments.scaling import compute_constants, suggest_dual_bounds, tight_dual_bounds
from molp_moments.sdpa import export_sdpa

logger = logging.getLogger("molp_moments")

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

USER_ERRORS = INPUT_ERRORS + (
    CombinatorialLimitError,
    MissingDependencyError,
    OrderTooSmallError,
    NonAffineReplacementError,
    UnassignedVariableError,
)

console = Console()


def _int_list(raw: Optional[str]) -> Optional[tuple[int, ...]]:
    """Parse '1,2,3' into a tuple; None and '' stay None."""
    if not raw:
        return None
    return tuple(int(tok) for tok in raw.split(",") if tok.strip())


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


# -------------------------------------------------------------------
# Settings from flags
# -------------------------------------------------------------------

def settings_from_args(args: argparse.Namespace) -> PipelineSettings:
    settings = PipelineSettings.from_env()
    settings.variant = args.variant
    settings.systems = _int_list(getattr(args, "systems", None))
    settings.order = args.order
    settings.order_slack = args.order_slack
    settings.include_zero_dual = not args.no_zero_dual
    settings.eliminate_lambda = not args.keep_lambda
    settings.rescale = not args.no_rescale
    if args.jobs is not None:
        settings.jobs = args.jobs
    if args.max_moments is not None:
        settings.max_moments = args.max_moments
    if args.tol_sdp is not None:
        settings.solver.tol_eq = args.tol_sdp
        settings.solver.tol_psd = args.tol_sdp
    if args.max_iters is not None:
        settings.solver.max_iters = args.max_iters
    if args.seed is not None:
        settings.extraction.seed = args.seed
    if args.tol_rank is not None:
        settings.extraction.tol_rank = args.tol_rank
    if args.tol_round is not None:
        settings.extraction.tol_round = args.tol_round
    settings.extraction.flat_gap = args.flat_gap
    settings.scaling.mode = args.scaling
    settings.scaling.M = args.M
    settings.scaling.Mi = _int_list(args.Mi)
    settings.scaling.M0 = args.M0
    settings.scaling.ub_dual = _int_list(args.ubdual)
    return settings


def _add_problem(p: argparse.ArgumentParser) -> None:
    p.add_argument("problem", type=Path, help="Problem file (YAML or JSON)")


def _add_scaling_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scaling", default="enumerate", choices=["enumerate", "conservative", "certificate"],
                   help="How M and M_i are computed when not overridden")
    p.add_argument("--M", type=int, default=None, help="Override the primal scaling constant")
    p.add_argument("--Mi", default=None, help="Override M_i: one value or a comma list per row")
    p.add_argument("--M0", type=int, default=None, help="Override the zero-dual system constant")
    p.add_argument("--ubdual", default=None, help="Dual bounds: one value or a comma list per row")
    p.add_argument("--variant", default="full-u", choices=["full-u", "reduced-u"])


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    _add_scaling_flags(p)
    p.add_argument("--systems", default=None, help="Comma list of system indices (0 = zero-dual)")
    p.add_argument("--order", type=int, default=None, help="Fix the relaxation order N")
    p.add_argument("--order-slack", type=int, default=3, help="Orders tried above the minimum")
    p.add_argument("--max-moments", type=int, default=None, help="Skip orders with more moments")
    p.add_argument("--tol-sdp", type=float, default=None, help="Equality and PSD tolerance")
    p.add_argument("--max-iters", type=int, default=None, help="Interior-point iteration limit")
    p.add_argument("--tol-rank", type=float, default=None)
    p.add_argument("--tol-round", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="Seed of the eigenvector combination")
    p.add_argument("--flat-gap", default="practical", choices=["practical", "strict"],
                   help="Order drop d of the flatness test. practical: d = max(1, largest "
                        "half-degree of the non-grid constraints); strict: d = max(1, largest "
                        "half-degree over all constraints, grid polynomials included)")
    p.add_argument("--no-zero-dual", action="store_true", help="Skip the u = 0 system")
    p.add_argument("--keep-lambda", action="store_true", help="Do not eliminate the last weight")
    p.add_argument("--no-rescale", action="store_true", help="Keep unscaled moment coordinates")
    p.add_argument("--jobs", type=int, default=None, help="Systems solved in parallel")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", type=Path, default=None, help="Write the report here")
    p.add_argument("--format", default="yaml", choices=["yaml", "json", "markdown"])
    p.add_argument("--timings", action="store_true", help="Include wall-clock timings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molp-moments",
        description="Pareto-optimal extreme points of MOLPs via moment relaxations",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subparsers = parser.add_subparsers(dest="command", help="Commands")

    solve_parser = subparsers.add_parser("solve", help="Run the moment pipeline")
    _add_problem(solve_parser)
    _add_pipeline_flags(solve_parser)
    _add_output(solve_parser)

    oracle_parser = subparsers.add_parser("oracle", help="Exact vertex enumeration")
    _add_problem(oracle_parser)
    _add_output(oracle_parser)

    compare_parser = subparsers.add_parser("compare", help="Pipeline against the oracle")
    _add_problem(compare_parser)
    _add_pipeline_flags(compare_parser)
    _add_output(compare_parser)

    bounds_parser = subparsers.add_parser("bounds", help="Scaling constants and dual bounds")
    _add_problem(bounds_parser)
    _add_scaling_flags(bounds_parser)
    bounds_parser.add_argument("--tight", action="store_true", help="Also compute certificate bounds")

    export_parser = subparsers.add_parser("export-sdpa", help="Write one relaxation in SDPA format")
    _add_problem(export_parser)
    _add_scaling_flags(export_parser)
    export_parser.add_argument("--system", type=int, required=True)
    export_parser.add_argument("--order", type=int, default=None)
    export_parser.add_argument("--keep-lambda", action="store_true")
    export_parser.add_argument("--no-rescale", action="store_true")
    export_parser.add_argument("--output", type=Path, required=True)
    export_parser.add_argument("--dump-system", type=Path, default=None,
                               help="Also write the polynomial system as text")

    plot_parser = subparsers.add_parser("plot", help="CSV (and SVG for n=2) of the Pareto set")
    _add_problem(plot_parser)
    plot_parser.add_argument("--out-dir", type=Path, default=Path("plots"))
    plot_parser.add_argument("--stem", default="pareto")
    return parser


# -------------------------------------------------------------------
# Commands
# -------------------------------------------------------------------

def _emit(report: ParetoReport, args: argparse.Namespace) -> None:
    if args.format == "json":
        text = report.model_dump_json(indent=2)
    elif args.format == "markdown":
        text = report.to_markdown()
    else:
        text = report.to_yaml(include_timings=args.timings)
    if args.output:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(text, encoding="utf-8")
        console.print(f"Report saved to: {args.output}")
    else:
        console.print(text, markup=False, highlight=False)


def _points_table(title: str, points) -> Table:
    table = Table(title=title)
    table.add_column("#", justify="right")
    table.add_column("x")
    for idx, p in enumerate(points):
        table.add_row(str(idx), "(" + ", ".join(p) + ")")
    return table


def cmd_solve(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    result = run_pipeline(problem, settings_from_args(args))
    report = report_from_pipeline(result, command="solve")
    if args.output:
        console.print(_points_table("Pareto extreme points", report.pareto_set))
    _emit(report, args)
    return EXIT_NUMERICAL if any(o.numerical for o in result.failed) else EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    diagnostics = validate(problem)
    if has_errors(diagnostics):
        for d in diagnostics:
            console.print(f"[red]{d.severity}[/red] {d.code}: {d.message}")
        return EXIT_INPUT
    xe = pareto_extreme_set(problem)
    report = report_from_oracle(problem, xe, pareto_edges(problem, xe), diagnostics)
    _emit(report, args)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    result = run_pipeline(problem, settings_from_args(args))
    report = report_from_pipeline(result, command="compare")
    xe = pareto_extreme_set(result.problem)
    report.oracle_set = [fmt_point(p) for p in xe.points]
    report.edges = [[a, b] for a, b in pareto_edges(result.problem, xe)]
    report.compare()
    _emit(report, args)
    if not report.agreement:
        for p in report.missing:
            console.print(f"[red]missing[/red] ({', '.join(p)})")
        for p in report.extra:
            console.print(f"[red]extra[/red] ({', '.join(p)})")
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    settings = settings_from_args_scaling(args)
    if settings.scaling.ub_dual is not None:
        bounds = settings.scaling.ub_dual
        problem = problem.with_dual_bounds(bounds * problem.m if len(bounds) == 1 else bounds)
    rows = system_rows(problem, required_box_rows(problem))
    constants = compute_constants(problem, settings.scaling, settings.variant, rows)
    table = Table(title="Scaling constants")
    table.add_column("constant")
    table.add_column("value", justify="right")
    table.add_column("provenance")
    table.add_row("M", str(constants.M), constants.provenance["M"].value)
    for i, value in enumerate(constants.Mi, start=1):
        table.add_row(f"M{i} ({rows.labels[i - 1]})", str(value), constants.provenance[f"M{i}"].value)
    table.add_row("M0", str(constants.M0), constants.provenance["M0"].value)
    console.print(table)
    console.print(f"suggested ub_dual (Hadamard): {list(suggest_dual_bounds(problem, rows))}")
    if args.tight:
        console.print(f"tight ub_dual (certificates): {list(tight_dual_bounds(problem, rows))}")
    return EXIT_OK


def settings_from_args_scaling(args: argparse.Namespace) -> PipelineSettings:
    settings = PipelineSettings.from_env()
    settings.variant = args.variant
    settings.scaling.mode = args.scaling
    settings.scaling.M = args.M
    settings.scaling.Mi = _int_list(args.Mi)
    settings.scaling.M0 = args.M0
    settings.scaling.ub_dual = _int_list(args.ubdual)
    return settings


def cmd_export_sdpa(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    settings = settings_from_args_scaling(args)
    settings.eliminate_lambda = not args.keep_lambda
    if settings.scaling.ub_dual is not None:
        bounds = settings.scaling.ub_dual
        problem = problem.with_dual_bounds(bounds * problem.m if len(bounds) == 1 else bounds)
    rows = system_rows(problem, required_box_rows(problem))
    constants = compute_constants(problem, settings.scaling, settings.variant, rows)
    sys_ = build_system(problem, args.system, constants, rows, settings)
    order = args.order if args.order is not None else max(1, sys_.half_degree)
    rel = assemble_relaxation(sys_, order, rescale=not args.no_rescale)
    lines = export_sdpa(rel, args.output)
    if args.dump_system:
        args.dump_system.write_text(sys_.to_text(), encoding="utf-8")
    console.print(
        f"Wrote {args.output}: {rel.n_moments} moments, blocks {[b.size for b in rel.blocks]}, "
        f"{rel.E.shape[0]} equalities, {lines} entries"
    )
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    problem = load_problem(args.problem)
    if has_errors(validate(problem)):
        console.print("[red]error[/red] the feasible region is empty")
        return EXIT_INPUT
    xe = pareto_extreme_set(problem)
    written = write_plot_data(problem, xe, pareto_edges(problem, xe), args.out_dir, args.stem)
    for path in written:
        console.print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "bounds": cmd_bounds,
    "export-sdpa": cmd_export_sdpa,
    "plot": cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point."""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except USER_ERRORS as exc:
        console.print(f"[red]input error[/red] {type(exc).__name__}: {exc}")
        return EXIT_INPUT
    except OSError as exc:
        console.print(f"[red]input error[/red] {exc}")
        return EXIT_INPUT
    except MolpError as exc:
        console.print(f"[red]numerical failure[/red] {type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
