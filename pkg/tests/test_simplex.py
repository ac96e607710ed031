"""Tests for the exact two-phase simplex in ``molp_moments.simplex``."""

from fractions import Fraction as F

import pytest

from molp_moments.errors import DimensionError
from molp_moments.simplex import LpInstance, LpStatus, simplex_solve


def _example1_lp(objective):
    return LpInstance(
        objective=objective,
        G=[[2, 1], [1, 1], [1, 2]],
        h=[4, 3, 4],
        upper=[5, 5],
    )


class TestSimplexSolve:
    def test_weighted_objective_on_example1(self):
        result = simplex_solve(_example1_lp([F(2, 3), F(1, 3)]))
        assert result.status is LpStatus.OPTIMAL
        assert result.objective == F(4, 3)
        assert F(2, 3) * result.x[0] + F(1, 3) * result.x[1] == F(4, 3)

    def test_first_objective_minimum_is_zero(self):
        result = simplex_solve(_example1_lp([1, 0]))
        assert result.status is LpStatus.OPTIMAL
        assert result.objective == 0
        assert result.x[0] == 0
        assert 4 <= result.x[1] <= 5

    def test_strong_duality(self):
        for objective in ([F(2, 3), F(1, 3)], [1, 1], [0, 1], [3, -1]):
            result = simplex_solve(_example1_lp(objective))
            assert result.status is LpStatus.OPTIMAL
            assert result.dual_objective == result.objective
            assert all(u >= 0 for u in result.duals)
            assert all(w >= 0 for w in result.upper_duals.values())

    def test_infeasible_bounds(self):
        lp = LpInstance(objective=[1], G=[[1]], h=[1], upper=[0])
        assert simplex_solve(lp).status is LpStatus.INFEASIBLE

    def test_unbounded(self):
        lp = LpInstance(objective=[-1, 0], G=[[1, 1]], h=[1])
        assert simplex_solve(lp).status is LpStatus.UNBOUNDED

    def test_equalities_and_redundant_rows(self):
        # y1 + y2 = 2 stated twice; minimize y1.
        lp = LpInstance(objective=[1, 0], E=[[1, 1], [2, 2]], e=[2, 4])
        result = simplex_solve(lp)
        assert result.status is LpStatus.OPTIMAL
        assert result.x == (F(0), F(2))
        assert result.dual_objective == result.objective

    def test_degenerate_problem_terminates(self):
        # Three constraints pass through the optimum (1, 1).
        lp = LpInstance(
            objective=[-1, -1],
            G=[[-1, -1], [-2, -1], [-1, -2]],
            h=[-2, -3, -3],
        )
        result = simplex_solve(lp)
        assert result.status is LpStatus.OPTIMAL
        assert result.objective == -2

    def test_row_length_mismatch(self):
        with pytest.raises(DimensionError):
            LpInstance(objective=[1, 1], G=[[1]], h=[1])
