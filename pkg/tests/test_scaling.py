"""Tests for ``molp_moments.scaling``."""

import pytest

from molp_moments.config import ScalingSettings
from molp_moments.errors import BadIndexError, CombinatorialLimitError
from molp_moments.model import MolpProblem, system_rows
from molp_moments.oracle import (
    certificate_vertices,
    certify_weight,
    enumerate_vertices,
    pareto_extreme_set,
    required_box_rows,
)
from molp_moments.polysys import build_sys_i, build_zero_dual_system, eliminate_last_lambda
from molp_moments.scaling import (
    Provenance,
    ScalingConstants,
    compute_constants,
    compute_M,
    compute_M0,
    compute_Mi,
    integer_determinant,
    suggest_dual_bounds,
    tight_dual_bounds,
)

# --------------------------------------------------------------------------
# Determinants
# --------------------------------------------------------------------------


class TestIntegerDeterminant:
    @pytest.mark.parametrize("matrix, expected", [
        ([[2, 1], [1, 1]], 1),
        ([[2, 1], [1, 2]], 3),
        ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], 1),
        ([[0, 1], [1, 0]], -1),
        ([[1, 2], [2, 4]], 0),
        ([[2, -1, 0], [-1, 2, -1], [0, -1, 2]], 4),
    ])
    def test_values(self, matrix, expected):
        assert integer_determinant(matrix) == expected

    def test_large_entries_are_exact(self):
        big = 10**30
        assert integer_determinant([[big, 1], [1, big]]) == big * big - 1


# --------------------------------------------------------------------------
# M
# --------------------------------------------------------------------------


class TestComputeM:
    def test_example1_stacked_with_identity(self, example1):
        assert compute_M(example1) == 6

    def test_example1_rows_only(self, example1):
        assert compute_M(example1, include_identity=False) == 3

    def test_override(self, example1):
        assert compute_M(example1, override=1) == 1

    def test_scaled_vertices_are_integral(self, example1):
        M = compute_M(example1)
        for p in enumerate_vertices(example1).points:
            assert all((M * v).denominator == 1 for v in p)

    def test_cap(self, example1):
        with pytest.raises(CombinatorialLimitError):
            compute_M(example1, cap=3)


# --------------------------------------------------------------------------
# M_i and M_0
# --------------------------------------------------------------------------


class TestComputeMi:
    def test_override(self, example1):
        assert [compute_Mi(example1, i, mode="override", value=6) for i in (1, 2, 3)] == [6, 6, 6]

    def test_conservative_with_factor_limit(self, example1):
        assert compute_Mi(example1, 1, mode="conservative", factor_limit=6) == 60

    def test_unimodular_single_objective(self):
        problem = MolpProblem(C=((1,),), A=((1,),), b=(1,), ub_primal=(2,), ub_dual=(1,))
        assert compute_Mi(problem, 1) == 1

    def test_bad_index(self, example1):
        with pytest.raises(BadIndexError):
            compute_Mi(example1, 4)

    @pytest.mark.parametrize("mode", ["enumerate", "certificate"])
    def test_certificates_are_integral_after_scaling(self, example1, mode):
        rows = system_rows(example1)
        for i in range(1, rows.count + 1):
            Mi = compute_Mi(example1, i, mode=mode, rows=rows)
            for x in pareto_extreme_set(example1).points:
                for cert in certificate_vertices(example1, x, rows):
                    if cert.u[i - 1] == 0:
                        continue
                    assert all((Mi * v).denominator == 1 for v in cert.u + cert.lam)

    def test_reduced_variant_is_a_positive_integer(self, example1):
        value = compute_Mi(example1, 1, variant="reduced-u")
        assert isinstance(value, int) and value >= 1

    def test_zero_dual_scale(self, example1):
        assert compute_M0(example1) >= 1
        assert compute_M0(example1, mode="override", value=4) == 4


class TestComputeConstants:
    def test_overrides(self, example1):
        consts = compute_constants(example1, ScalingSettings(M=1, Mi=(6,), M0=2))
        assert consts.M == 1
        assert consts.Mi == (6, 6, 6)
        assert consts.M0 == 2
        assert consts.provenance["M"] is Provenance.USER_OVERRIDE
        assert consts.provenance["M3"] is Provenance.USER_OVERRIDE

    def test_computed(self, example1):
        consts = compute_constants(example1)
        assert consts.M == 6
        assert consts.provenance["M1"] is Provenance.COMPUTED_LCM
        assert consts.for_system(0) == consts.M0
        assert consts.for_system(2) == consts.Mi[1]

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ScalingConstants(M=0, Mi=(1,))

    def test_to_dict(self, example1):
        data = compute_constants(example1, ScalingSettings(M=1, Mi=(6, 6, 6), M0=1)).to_dict()
        assert data["Mi"] == [6, 6, 6]
        assert data["provenance"]["M"] == "user-override"


# --------------------------------------------------------------------------
# Dual bounds
# --------------------------------------------------------------------------


class TestDualBounds:
    def test_example1_bounds_dominate_certificates(self, example1):
        bounds = suggest_dual_bounds(example1)
        assert len(bounds) == 3 and all(b >= 1 for b in bounds)
        for x in pareto_extreme_set(example1).points:
            t = certify_weight(example1, x)
            assert all(u <= b for u, b in zip(t.u, bounds))

    def test_identity_rows(self):
        problem = MolpProblem(C=((1, 0), (0, 1)), A=((1, 0), (0, 1)), b=(1, 1), ub_primal=(3, 3), ub_dual=(1, 1))
        assert all(b >= 1 for b in suggest_dual_bounds(problem))

    def test_tight_bounds_for_example1(self, example1):
        # Every extreme dual value on Example 1 is at most 1/2.
        assert tight_dual_bounds(example1) == (1, 1, 1)


# --------------------------------------------------------------------------
# Soundness on a seeded random batch
# --------------------------------------------------------------------------


def _scaled_certificate(triplet, rows, M, scale):
    duals = list(triplet.u) + [triplet.u_box[j] if triplet.u_box else 0 for j in rows.box_rows]
    point = {f"x{j + 1}": M * v for j, v in enumerate(triplet.x)}
    point.update({f"u{s + 1}": scale * v for s, v in enumerate(duals)})
    point.update({f"lam{l + 1}": scale * v for l, v in enumerate(triplet.lam)})
    return duals, point


def _is_grid_solution(sys, point) -> bool:
    values = sys.complete_point({name: point[name] for name in sys.variables})
    for spec in sys.catalog:
        v = values[spec.name]
        if v.denominator != 1 or not spec.lower <= v <= spec.upper:
            return False
    return not sys.violated(values)


@pytest.mark.parametrize("mode", ["enumerate", "certificate"])
class TestRandomBatchSoundness:
    def test_vertices_scale_to_integers(self, random_batch, mode):
        for problem in random_batch:
            rows = system_rows(problem, required_box_rows(problem))
            consts = compute_constants(problem, ScalingSettings(mode=mode), rows=rows)
            for x in enumerate_vertices(problem).points:
                assert all((consts.M * v).denominator == 1 for v in x), (problem, x)

    def test_pareto_vertices_are_grid_solutions(self, random_batch, mode):
        for problem in random_batch:
            rows = system_rows(problem, required_box_rows(problem))
            consts = compute_constants(problem, ScalingSettings(mode=mode), rows=rows)
            systems = {0: eliminate_last_lambda(build_zero_dual_system(problem, consts, rows))}
            for i in range(1, rows.count + 1):
                systems[i] = eliminate_last_lambda(build_sys_i(problem, i, consts, "full-u", rows))

            xe = pareto_extreme_set(problem).points
            covered = set()
            for x in xe:
                for s in range(rows.count):
                    t = certify_weight(problem, x, focus=s, box_rows=rows.box_rows)
                    if t is None:
                        continue
                    duals, point = _scaled_certificate(t, rows, consts.M, consts.for_system(s + 1))
                    if duals[s] == 0:
                        continue
                    assert _is_grid_solution(systems[s + 1], point), (problem, x, s + 1)
                    covered.add(x)
                t = certify_weight(problem, x, basis=(), box_rows=rows.box_rows)
                if t is not None:
                    _, point = _scaled_certificate(t, rows, consts.M, consts.M0)
                    assert _is_grid_solution(systems[0], point), (problem, x, 0)
                    covered.add(x)
            assert covered == set(xe), problem
