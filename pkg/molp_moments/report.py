"""Report models and renderers.

Rationals are written as "p/q" strings (integers without a slash) so the
canonical YAML/JSON is exact and byte-stable. Wall-clock timings live in
``ParetoReport.timings`` and are excluded from the canonical dump.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
import yaml
from pydantic import BaseModel, Field

from molp_moments import __version__
from molp_moments.errors import MissingDependencyError
from molp_moments.model import MolpProblem, ValidTriplet
from molp_moments.oracle import VertexSet
from molp_moments.pipeline import PipelineResult, SystemOutcome


def fmt(value) -> str:
    return str(Fraction(value))


def fmt_point(point: Sequence) -> list[str]:
    return [fmt(v) for v in point]


# -------------------------------------------------------------------
# Component models
# -------------------------------------------------------------------

class ScalingReport(BaseModel):
    M: int
    Mi: list[int]
    M0: int
    provenance: dict[str, str] = Field(default_factory=dict)


class AttemptReport(BaseModel):
    order: int
    moments: int
    status: str
    iterations: int = 0
    eq_residual: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    ranks: dict[int, int] = Field(default_factory=dict)
    flat_t: Optional[int] = None
    rank: Optional[int] = None
    verified: int = 0
    note: str = ""


class TripletReport(BaseModel):
    x: list[str]
    u: list[str]
    lam: list[str]
    u_box: list[str] = Field(default_factory=list)

    @classmethod
    def of(cls, t: ValidTriplet) -> "TripletReport":
        return cls(x=fmt_point(t.x), u=fmt_point(t.u), lam=fmt_point(t.lam), u_box=fmt_point(t.u_box))


class RejectionReport(BaseModel):
    point: dict[str, int]
    reason: str
    detail: str = ""


class SystemReport(BaseModel):
    system: int
    variant: str
    status: str
    order: Optional[int] = None
    rank: Optional[int] = None
    attempts: list[AttemptReport] = Field(default_factory=list)
    points: list[TripletReport] = Field(default_factory=list)
    rejections: list[RejectionReport] = Field(default_factory=list)
    error: str = ""

    @classmethod
    def of(cls, o: SystemOutcome) -> "SystemReport":
        return cls(
            system=o.index,
            variant=o.variant,
            status=o.status,
            order=o.order,
            rank=o.rank,
            attempts=[AttemptReport(**vars(a)) for a in o.attempts],
            points=[TripletReport.of(c.triplet) for c in o.candidates],
            rejections=[RejectionReport(point=r.point, reason=r.reason, detail=r.detail) for r in o.rejections],
            error=o.error,
        )


class DiagnosticReport(BaseModel):
    code: str
    severity: str
    message: str
    detail: dict = Field(default_factory=dict)


# -------------------------------------------------------------------
# Complete report
# -------------------------------------------------------------------

class ParetoReport(BaseModel):
    """Everything needed to reproduce and audit one run."""

    version: str = __version__
    command: str
    problem: dict
    settings: dict = Field(default_factory=dict)
    diagnostics: list[DiagnosticReport] = Field(default_factory=list)
    scaling: Optional[ScalingReport] = None
    box_rows: list[int] = Field(default_factory=list)
    systems: list[SystemReport] = Field(default_factory=list)
    pareto_set: Optional[list[list[str]]] = None
    oracle_set: Optional[list[list[str]]] = None
    edges: Optional[list[list[int]]] = None
    agreement: Optional[bool] = None
    missing: list[list[str]] = Field(default_factory=list)
    extra: list[list[str]] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict, exclude=True)

    def compare(self) -> None:
        """Fill agreement and the symmetric difference from the two sets."""
        if self.pareto_set is None or self.oracle_set is None:
            return
        ours = {tuple(p) for p in self.pareto_set}
        truth = {tuple(p) for p in self.oracle_set}
        self.missing = [list(p) for p in sorted(truth - ours, key=_point_key)]
        self.extra = [list(p) for p in sorted(ours - truth, key=_point_key)]
        self.agreement = not self.missing and not self.extra

    def canonical(self) -> dict:
        return self.model_dump(mode="json")

    def to_yaml(self, include_timings: bool = False) -> str:
        data = self.canonical()
        if include_timings:
            data["timings"] = {k: round(v, 3) for k, v in self.timings.items()}
        return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)

    def to_markdown(self) -> str:
        name = self.problem.get("name") or "MOLP instance"
        lines = [f"# Pareto extreme points: {name}", ""]
        lines.append(
            f"**k** = {self.problem['k']} | **m** = {self.problem['m']} | **n** = {self.problem['n']}"
        )
        lines.append("")
        if self.scaling is not None:
            lines.extend([
                "## Scaling",
                "",
                f"M = {self.scaling.M}, M_i = {self.scaling.Mi}, M_0 = {self.scaling.M0}",
                "",
            ])
        if self.systems:
            lines.extend([
                "## Systems",
                "",
                "| System | Status | Order | Rank | Points | Rejected |",
                "|--------|--------|-------|------|--------|----------|",
            ])
            for s in self.systems:
                pts = ", ".join("(" + ", ".join(p.x) + ")" for p in s.points)
                lines.append(
                    f"| {s.system} | {s.status} | {s.order if s.order is not None else ''} "
                    f"| {s.rank if s.rank is not None else ''} | {pts} | {len(s.rejections)} |"
                )
            lines.append("")
        for title, pts in (("Pareto extreme points", self.pareto_set), ("Oracle", self.oracle_set)):
            if pts is None:
                continue
            lines.extend([f"## {title}", ""])
            lines.extend(f"- ({', '.join(p)})" for p in pts)
            lines.append("")
        if self.agreement is not None:
            lines.append(f"**Agreement:** {'yes' if self.agreement else 'no'}")
            for label, diff in (("missing", self.missing), ("extra", self.extra)):
                for p in diff:
                    lines.append(f"- {label}: ({', '.join(p)})")
            lines.append("")
        return "\n".join(lines)


def _point_key(p: Sequence[str]) -> tuple:
    return tuple(Fraction(v) for v in p)


# -------------------------------------------------------------------
# Builders
# -------------------------------------------------------------------

def report_from_pipeline(result: PipelineResult, command: str = "solve") -> ParetoReport:
    c = result.constants
    return ParetoReport(
        command=command,
        problem=result.problem.to_dict(),
        settings=result.settings.to_dict(),
        diagnostics=[DiagnosticReport(**vars(d)) for d in result.diagnostics],
        scaling=ScalingReport(
            M=c.M, Mi=list(c.Mi), M0=c.M0, provenance={k: v.value for k, v in c.provenance.items()}
        ),
        box_rows=[j + 1 for j in result.rows.box_rows],
        systems=[SystemReport.of(o) for o in result.outcomes],
        pareto_set=[fmt_point(p) for p in result.pareto],
        timings=dict(result.timings),
    )


def report_from_oracle(
    problem: MolpProblem,
    xe: VertexSet,
    edges: Sequence[tuple[int, int]],
    diagnostics=(),
) -> ParetoReport:
    return ParetoReport(
        command="oracle",
        problem=problem.to_dict(),
        diagnostics=[DiagnosticReport(**vars(d)) for d in diagnostics],
        oracle_set=[fmt_point(p) for p in xe.points],
        edges=[[a, b] for a, b in edges],
    )


# -------------------------------------------------------------------
# Plot data
# -------------------------------------------------------------------

def plot_frames(problem: MolpProblem, xe: VertexSet, edges: Sequence[tuple[int, int]]):
    """(points, segments) DataFrames with exact string coordinates."""
    n = problem.n
    cols = [f"x{j + 1}" for j in range(n)]
    points = pd.DataFrame([fmt_point(p) for p in xe.points], columns=cols)
    points.insert(0, "vertex", range(len(xe.points)))
    seg_rows = []
    for a, b in edges:
        seg_rows.append([a, b] + fmt_point(xe.points[a]) + fmt_point(xe.points[b]))
    segments = pd.DataFrame(
        seg_rows, columns=["from", "to"] + [f"{c}_from" for c in cols] + [f"{c}_to" for c in cols]
    )
    return points, segments


def write_plot_data(
    problem: MolpProblem,
    xe: VertexSet,
    edges: Sequence[tuple[int, int]],
    out_dir: str | Path,
    stem: str = "pareto",
) -> list[Path]:
    """CSV files always; an SVG when n = 2."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points, segments = plot_frames(problem, xe, edges)
    written = [out / f"{stem}_points.csv", out / f"{stem}_edges.csv"]
    points.to_csv(written[0], index=False)
    segments.to_csv(written[1], index=False)
    if problem.n == 2:
        written.append(write_svg(problem, xe, edges, out / f"{stem}.svg"))
    return written


def write_svg(problem: MolpProblem, xe: VertexSet, edges, path: Path) -> Path:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise MissingDependencyError("SVG output needs matplotlib: pip install 'molp-moments[plot]'") from exc

    plt.rcParams["svg.hashsalt"] = "molp-moments"
    fig, ax = plt.subplots(figsize=(4, 4))
    for a, b in edges:
        pa, pb = xe.points[a], xe.points[b]
        ax.plot([float(pa[0]), float(pb[0])], [float(pa[1]), float(pb[1])], color="black", lw=1.5)
    ax.scatter([float(p[0]) for p in xe.points], [float(p[1]) for p in xe.points], color="black", zorder=3)
    ax.set_xlim(0, problem.ub_primal[0])
    ax.set_ylim(0, problem.ub_primal[1])
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(problem.name or "Pareto extreme points")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
