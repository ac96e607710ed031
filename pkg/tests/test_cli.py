"""Tests for the command line and the report renderers.

Commands that run the pipeline use the ``exact`` fixture so no
interior-point solve happens here.
"""

import json
import sys
from fractions import Fraction as F

import numpy as np
import pytest
import yaml

from molp_moments import pipeline
from molp_moments.cli import EXIT_INPUT, EXIT_MISMATCH, EXIT_NUMERICAL, EXIT_OK, build_parser, main
from molp_moments.config import PipelineSettings, ScalingSettings
from molp_moments.ipm import ConicSolution, SolveStatus
from molp_moments.oracle import pareto_edges, pareto_extreme_set
from molp_moments.report import ParetoReport, plot_frames, report_from_oracle, report_from_pipeline
from molp_moments.sdpa import read_sdpa

SCALING = ["--M", "1", "--Mi", "6", "--M0", "1"]
EXAMPLE1_ORACLE = [["0", "4"], ["1", "2"], ["2", "1"], ["4", "0"]]


def write_problem(path, **fields):
    data = {"name": "custom", "k": 1, "m": 1, "n": 1, "C": [[1]], "A": [[1]], "b": [1],
            "ub_primal": [2], "ub_dual": [1]}
    data.update(fields)
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.fixture
def infeasible_path(tmp_path):
    return write_problem(
        tmp_path / "infeasible.yaml", k=2, m=3, n=2, C=[[1, 0], [0, 1]],
        A=[[2, 1], [1, 1], [1, 2]], b=[10, 3, 4], ub_primal=[1, 1], ub_dual=[1, 1, 1],
    )


# --------------------------------------------------------------------------
# oracle / plot / bounds
# --------------------------------------------------------------------------


class TestOracleCommand:
    def test_yaml_report(self, example1_path, tmp_path):
        out = tmp_path / "oracle.yaml"
        assert main(["oracle", str(example1_path), "--output", str(out)]) == EXIT_OK
        data = yaml.safe_load(out.read_text())
        assert data["command"] == "oracle"
        assert data["oracle_set"] == EXAMPLE1_ORACLE
        assert data["edges"] == [[0, 1], [1, 2], [2, 3]]
        assert "timings" not in data

    def test_json_report(self, example1_path, tmp_path):
        out = tmp_path / "oracle.json"
        assert main(["oracle", str(example1_path), "--format", "json", "--output", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["oracle_set"] == EXAMPLE1_ORACLE

    def test_markdown_report(self, example1_path, tmp_path):
        out = tmp_path / "sub" / "oracle.md"
        assert main(["oracle", str(example1_path), "--format", "markdown", "--output", str(out)]) == EXIT_OK
        text = out.read_text()
        assert text.startswith("# Pareto extreme points: example1")
        assert "- (1, 2)" in text

    def test_empty_region(self, infeasible_path):
        assert main(["oracle", str(infeasible_path)]) == EXIT_INPUT


class TestPlotCommand:
    def test_csv_files(self, tmp_path):
        path = write_problem(tmp_path / "line.yaml", C=[[-1]], ub_primal=[3])
        assert main(["plot", str(path), "--out-dir", str(tmp_path / "plots"), "--stem", "line"]) == EXIT_OK
        points = (tmp_path / "plots" / "line_points.csv").read_text().splitlines()
        assert points == ["vertex,x1", "0,3"]
        assert (tmp_path / "plots" / "line_edges.csv").exists()
        assert not (tmp_path / "plots" / "line.svg").exists()

    def test_svg_for_two_variables(self, example1_path, tmp_path):
        pytest.importorskip("matplotlib")
        assert main(["plot", str(example1_path), "--out-dir", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "pareto.svg").read_text().lstrip().startswith("<?xml")
        edges = (tmp_path / "pareto_edges.csv").read_text().splitlines()
        assert edges[0] == "from,to,x1_from,x2_from,x1_to,x2_to"
        assert len(edges) == 4

    def test_svg_without_matplotlib_is_an_input_error(self, example1_path, tmp_path, monkeypatch):
        monkeypatch.setitem(sys.modules, "matplotlib", None)
        assert main(["plot", str(example1_path), "--out-dir", str(tmp_path)]) == EXIT_INPUT

    def test_empty_region(self, infeasible_path, tmp_path):
        assert main(["plot", str(infeasible_path), "--out-dir", str(tmp_path)]) == EXIT_INPUT


def test_bounds_prints_constants(example1_path, capsys):
    assert main(["bounds", str(example1_path), "--tight"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Scaling constants" in out
    assert "suggested ub_dual (Hadamard): [4, 4, 4]" in out
    assert "tight ub_dual (certificates): [1, 1, 1]" in out


# --------------------------------------------------------------------------
# export-sdpa
# --------------------------------------------------------------------------


class TestExportCommand:
    def test_writes_relaxation_and_system(self, tmp_path):
        path = write_problem(tmp_path / "line.yaml")
        target = tmp_path / "out" / "sys1.dat-s"
        dump = tmp_path / "sys1.txt"
        code = main(["export-sdpa", str(path), "--system", "1", "--M", "1", "--Mi", "1",
                     "--output", str(target), "--dump-system", str(dump)])
        assert code == EXIT_OK
        problem = read_sdpa(target)
        assert problem.m > 0
        assert dump.read_text().startswith("# system 1 variant=full-u")

    def test_bad_system_index(self, tmp_path):
        path = write_problem(tmp_path / "line.yaml")
        code = main(["export-sdpa", str(path), "--system", "5", "--output", str(tmp_path / "x.dat-s")])
        assert code == EXIT_INPUT


# --------------------------------------------------------------------------
# solve / compare
# --------------------------------------------------------------------------


class TestPipelineCommands:
    def test_compare_agrees(self, example1_path, tmp_path, exact):
        out = tmp_path / "compare.yaml"
        code = main(["compare", str(example1_path), *SCALING, "--output", str(out)])
        assert code == EXIT_OK
        data = yaml.safe_load(out.read_text())
        assert data["agreement"] is True
        assert data["pareto_set"] == data["oracle_set"] == EXAMPLE1_ORACLE
        assert [s["system"] for s in data["systems"]] == [0, 1, 2, 3]

    def test_compare_mismatch(self, example1_path, tmp_path, exact, capsys):
        out = tmp_path / "compare.yaml"
        code = main(["compare", str(example1_path), *SCALING, "--systems", "1", "--output", str(out)])
        assert code == EXIT_MISMATCH
        data = yaml.safe_load(out.read_text())
        assert data["missing"] == [["2", "1"], ["4", "0"]]
        assert data["extra"] == []
        assert "missing" in capsys.readouterr().out

    def test_solve_with_timings(self, example1_path, tmp_path, exact):
        out = tmp_path / "solve.yaml"
        code = main(["solve", str(example1_path), *SCALING, "--timings", "--output", str(out)])
        assert code == EXIT_OK
        data = yaml.safe_load(out.read_text())
        assert data["scaling"]["M"] == 1
        assert data["scaling"]["provenance"]["M"] == "user-override"
        assert "total" in data["timings"]

    def test_solver_failure_is_numerical(self, example1_path, tmp_path, monkeypatch):
        def failing(rel, settings=None):
            return ConicSolution(
                y=np.zeros(rel.n_moments), blocks=[], eq_residual=1.0, min_eigenvalue=-1.0,
                iterations=1, status=SolveStatus.NUMERICAL_FAILURE, message="stalled",
            )

        monkeypatch.setattr(pipeline, "solve", failing)
        code = main(["solve", str(example1_path), *SCALING, "--systems", "1", "--order", "4",
                     "--output", str(tmp_path / "s.yaml")])
        assert code == EXIT_NUMERICAL


class TestInputErrors:
    def test_missing_file(self, tmp_path):
        assert main(["oracle", str(tmp_path / "nope.yaml")]) == EXIT_INPUT

    def test_schema_error(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("k: 2\nm: 1\n", encoding="utf-8")
        assert main(["oracle", str(path)]) == EXIT_INPUT

    def test_pipeline_on_empty_region(self, infeasible_path, exact):
        assert main(["solve", str(infeasible_path), *SCALING]) == EXIT_INPUT

    def test_no_command(self):
        assert main([]) == EXIT_INPUT

    def test_flat_gap_modes_are_described(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["solve", "--help"])
        # Wrapping may split at spaces or hyphens, so compare with whitespace removed.
        text = "".join(capsys.readouterr().out.split())
        assert "practical:d=max(1,largesthalf-degreeofthenon-grid" in text
        assert "strict:d=max(1,largesthalf-degreeoverallconstraints" in text


# --------------------------------------------------------------------------
# Report models
# --------------------------------------------------------------------------


class TestParetoReport:
    def test_compare_fills_differences(self):
        report = ParetoReport(
            command="compare", problem={},
            pareto_set=[["0", "4"], ["5/2", "1"]], oracle_set=[["0", "4"], ["1", "2"]],
        )
        report.compare()
        assert report.agreement is False
        assert report.missing == [["1", "2"]]
        assert report.extra == [["5/2", "1"]]

    def test_compare_without_oracle_is_noop(self):
        report = ParetoReport(command="solve", problem={}, pareto_set=[["1"]])
        report.compare()
        assert report.agreement is None

    def test_timings_only_on_request(self):
        report = ParetoReport(command="solve", problem={}, timings={"total": 1.23456})
        assert "timings" not in report.canonical()
        assert "timings" not in yaml.safe_load(report.to_yaml())
        assert yaml.safe_load(report.to_yaml(include_timings=True))["timings"] == {"total": 1.235}

    def test_markdown_agreement(self, example1):
        xe = pareto_extreme_set(example1)
        report = report_from_oracle(example1, xe, pareto_edges(example1, xe))
        report.pareto_set = report.oracle_set[:2]
        report.compare()
        text = report.to_markdown()
        assert "**k** = 2 | **m** = 3 | **n** = 2" in text
        assert "**Agreement:** no" in text
        assert "- missing: (2, 1)" in text

    def test_from_pipeline(self, example1, exact):
        settings = PipelineSettings(scaling=ScalingSettings(M=1, Mi=(6,), M0=1), systems=(2,))
        report = report_from_pipeline(pipeline.run_pipeline(example1, settings))
        assert report.pareto_set == [["1", "2"], ["2", "1"]]
        (system,) = report.systems
        assert system.status == "ok"
        assert [p.u for p in system.points] == [["0", "1/2", "0"]] * 2

    def test_plot_frames(self, example1):
        xe = pareto_extreme_set(example1)
        points, segments = plot_frames(example1, xe, pareto_edges(example1, xe))
        assert list(points.columns) == ["vertex", "x1", "x2"]
        assert points["x1"].tolist() == ["0", "1", "2", "4"]
        assert segments[["from", "to"]].values.tolist() == [[0, 1], [1, 2], [2, 3]]
        assert xe.points[1] == (F(1), F(2))
