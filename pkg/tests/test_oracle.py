"""Tests for the exact oracle: vertices, Pareto tests, edges and weight certificates."""

from fractions import Fraction as F

import pytest

from molp_moments.errors import BadIndexError, NotFeasibleError
from molp_moments.model import MolpProblem, system_rows, verify_sys1
from molp_moments.oracle import (
    certificate_vertices,
    certify_weight,
    enumerate_vertices,
    is_pareto,
    pareto_edges,
    pareto_extreme_set,
    required_box_rows,
)
from molp_moments.simplex import LpInstance, simplex_solve


def pts(*pairs):
    return [tuple(F(v) for v in p) for p in pairs]


# --------------------------------------------------------------------------
# Vertex enumeration
# --------------------------------------------------------------------------


class TestEnumerateVertices:
    def test_example1(self, example1):
        vertices = enumerate_vertices(example1)
        assert list(vertices.points) == pts((0, 4), (0, 5), (1, 2), (2, 1), (4, 0), (5, 0), (5, 5))

    def test_every_vertex_has_n_independent_tight_rows(self, example1):
        vertices = enumerate_vertices(example1)
        for active in vertices.active_sets:
            assert len(active) >= example1.n

    def test_unit_box(self):
        problem = MolpProblem(C=((1, 0), (0, 1)), A=(), b=(), ub_primal=(1, 1), ub_dual=())
        assert list(enumerate_vertices(problem).points) == pts((0, 0), (0, 1), (1, 0), (1, 1))

    def test_single_row_in_unit_box(self):
        problem = MolpProblem(C=((1, 0), (0, 1)), A=((1, 1),), b=(1,), ub_primal=(1, 1), ub_dual=(1,))
        assert list(enumerate_vertices(problem).points) == pts((0, 1), (1, 0), (1, 1))


# --------------------------------------------------------------------------
# Pareto tests
# --------------------------------------------------------------------------


class TestIsPareto:
    @pytest.mark.parametrize("x, expected", [
        ((1, 2), True),
        ((0, 4), True),
        ((5, 0), False),
        ((5, 5), False),
        ((F(1, 2), 3), True),
        ((3, 3), False),
    ])
    def test_example1(self, example1, x, expected):
        assert is_pareto(example1, x) is expected

    def test_infeasible_point_raises(self, example1):
        with pytest.raises(NotFeasibleError):
            is_pareto(example1, (0, 0))

    def test_domination_is_monotone(self, example1):
        # C is the identity: (2, 2) is dominated by (1, 2), which is feasible.
        assert is_pareto(example1, (2, 2)) is False


class TestParetoExtremeSet:
    def test_example1(self, example1):
        assert list(pareto_extreme_set(example1).points) == pts((0, 4), (1, 2), (2, 1), (4, 0))

    def test_single_objective_is_optimal_face(self, single_objective):
        xe = pareto_extreme_set(single_objective)
        assert list(xe.points) == pts((1, 2), (2, 1))
        optimum = simplex_solve(LpInstance(objective=[1, 1], G=single_objective.A, h=single_objective.b,
                                           upper=single_objective.ub_primal)).objective
        assert all(p[0] + p[1] == optimum for p in xe.points)

    def test_box_only_identity(self):
        problem = MolpProblem(C=((1, 0), (0, 1)), A=(), b=(), ub_primal=(3, 3), ub_dual=())
        assert list(pareto_extreme_set(problem).points) == pts((0, 0))

    def test_subset_of_vertices(self, example1):
        assert set(pareto_extreme_set(example1).points) <= set(enumerate_vertices(example1).points)


class TestParetoEdges:
    def test_example1_segments(self, example1):
        xe = pareto_extreme_set(example1)
        edges = {(xe.points[a], xe.points[b]) for a, b in pareto_edges(example1, xe)}
        assert edges == {
            tuple(pts((0, 4), (1, 2))),
            tuple(pts((1, 2), (2, 1))),
            tuple(pts((2, 1), (4, 0))),
        }

    def test_single_vertex_has_no_edges(self):
        problem = MolpProblem(C=((1, 0), (0, 1)), A=(), b=(), ub_primal=(3, 3), ub_dual=())
        xe = pareto_extreme_set(problem)
        assert pareto_edges(problem, xe) == []

    def test_optimal_edge_for_single_objective(self, single_objective):
        xe = pareto_extreme_set(single_objective)
        assert pareto_edges(single_objective, xe) == [(0, 1)]


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------


class TestCertifyWeight:
    def test_focus_on_first_row(self, example1):
        t = certify_weight(example1, (1, 2), focus=0)
        assert t.lam == (F(2, 3), F(1, 3))
        assert t.u == (F(1, 3), F(0), F(0))
        assert verify_sys1(example1, t)

    def test_focus_on_third_row(self, example1):
        t = certify_weight(example1, (4, 0), focus=2)
        assert t.lam == (F(1, 3), F(2, 3))
        assert t.u == (F(0), F(0), F(1, 3))
        assert verify_sys1(example1, t)

    def test_basis_restricts_support(self, example1):
        # (1,2) is tight on rows 1 and 2; row 2 alone gives lambda = (1/2, 1/2).
        t = certify_weight(example1, (1, 2), basis={1})
        assert t.u == (F(0), F(1, 2), F(0))
        assert t.lam == (F(1, 2), F(1, 2))
        assert verify_sys1(example1, t)

    def test_basis_of_slack_rows_has_no_certificate(self, example1):
        assert certify_weight(example1, (1, 2), basis={2}) is None

    def test_basis_out_of_range(self, example1):
        with pytest.raises(BadIndexError):
            certify_weight(example1, (1, 2), basis={7})

    def test_dominated_point_has_no_certificate(self, example1):
        assert certify_weight(example1, (5, 5)) is None

    def test_every_pareto_vertex_is_certified(self, example1):
        for x in pareto_extreme_set(example1).points:
            t = certify_weight(example1, x)
            assert t is not None
            assert verify_sys1(example1, t)

    def test_certificate_vertices_are_valid(self, example1):
        rows = system_rows(example1)
        certs = certificate_vertices(example1, (1, 2), rows)
        assert certs
        assert all(verify_sys1(example1, t) for t in certs)
        assert any(t.u == (F(1, 3), F(0), F(0)) for t in certs)


class TestRequiredBoxRows:
    def test_example1_needs_none(self, example1):
        assert required_box_rows(example1) == ()

    def test_unbounded_objective_needs_box(self):
        # Minimizing -x1 is unbounded without the box.
        problem = MolpProblem(C=((-1, 0), (0, 1)), A=((1, 1),), b=(1,), ub_primal=(3, 3), ub_dual=(1,))
        assert required_box_rows(problem) == (0, 1)
