"""Shared fixtures and the ``slow`` marker (enable with ``--runslow``)."""

from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from molp_moments import pipeline
from molp_moments.ipm import ConicSolution, SolveStatus
from molp_moments.model import MolpProblem, has_errors, load_problem, system_rows, validate
from molp_moments.moment import dirac_moments
from molp_moments.polynomial import Polynomial, grid_polynomial
from molp_moments.polysys import Constraint, PolySystem, VariableSpec, enumerate_grid_solutions
from molp_moments.scaling import ScalingConstants, tight_dual_bounds

INSTANCES = Path(__file__).resolve().parent.parent / "instances"


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False,
        help="run end-to-end moment relaxations and the random oracle batch",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end solves that take minutes")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def example1() -> MolpProblem:
    return load_problem(INSTANCES / "example1.yaml")


@pytest.fixture
def example1_path() -> Path:
    return INSTANCES / "example1.yaml"


@pytest.fixture
def single_objective() -> MolpProblem:
    return load_problem(INSTANCES / "single_objective.yaml")


@pytest.fixture
def toy_system() -> PolySystem:
    """{x (x - 1) = 0, x >= 0} over the grid {0, 1}."""
    host = MolpProblem(C=((1,),), A=((1,),), b=(0,), ub_primal=(1,), ub_dual=(1,))
    return PolySystem(
        index=1,
        variant="full-u",
        constants=ScalingConstants(M=1, Mi=(1,)),
        rows=system_rows(host),
        catalog=(VariableSpec("x", "x", 1),),
        equalities=(Constraint("grid_x", grid_polynomial("x", 1), "eq", grid=True),),
        inequalities=(Constraint("nonneg_x", Polynomial.variable("x"), "ineq"),),
    )


@pytest.fixture
def three_point_system() -> PolySystem:
    """{x (x - 1) (x - 2) = 0, x >= 0} over the grid {0, 1, 2}."""
    host = MolpProblem(C=((1,),), A=((1,),), b=(0,), ub_primal=(2,), ub_dual=(1,))
    return PolySystem(
        index=1,
        variant="full-u",
        constants=ScalingConstants(M=1, Mi=(1,)),
        rows=system_rows(host),
        catalog=(VariableSpec("x", "x", 2),),
        equalities=(Constraint("grid_x", grid_polynomial("x", 2), "eq", grid=True),),
        inequalities=(Constraint("nonneg_x", Polynomial.variable("x"), "ineq"),),
    )


def random_problem(rng: np.random.Generator) -> Optional[MolpProblem]:
    """n = k = 2, m in {2, 3}, integer entries in [-3, 3], box bounds in [1, 4].

    Returns None for an empty region or an all-zero objective. Dual bounds are
    the certificate bounds of the drawn instance.
    """
    m = int(rng.choice([2, 3]))
    C = rng.integers(-3, 4, size=(2, 2))
    if not C.any():
        return None
    problem = MolpProblem(
        C=tuple(map(tuple, C.tolist())),
        A=tuple(map(tuple, rng.integers(-3, 4, size=(m, 2)).tolist())),
        b=tuple(int(v) for v in rng.integers(-3, 4, size=m)),
        ub_primal=tuple(int(v) for v in rng.integers(1, 5, size=2)),
        ub_dual=(1,) * m,
    )
    if has_errors(validate(problem)):
        return None
    return problem.with_dual_bounds(tight_dual_bounds(problem))


@pytest.fixture(scope="session")
def random_batch() -> list[MolpProblem]:
    """Twenty seeded random instances."""
    rng = np.random.default_rng(20240101)
    batch: list[MolpProblem] = []
    while len(batch) < 20:
        problem = random_problem(rng)
        if problem is not None:
            batch.append(problem)
    return batch


def exact_solve(rel, settings=None) -> ConicSolution:
    """Moment vector of the uniform measure on every grid solution of the system."""
    atoms = list(enumerate_grid_solutions(rel.system))
    if not atoms:
        return ConicSolution(
            y=np.zeros(rel.n_moments), blocks=[], eq_residual=0.0, min_eigenvalue=0.0,
            iterations=1, status=SolveStatus.INFEASIBLE, message="no grid solution",
        )
    y = np.mean([dirac_moments(rel, atom) for atom in atoms], axis=0)
    return ConicSolution(
        y=y, blocks=[b.evaluate(y) for b in rel.blocks], eq_residual=0.0,
        min_eigenvalue=0.0, iterations=1, status=SolveStatus.SOLVED,
    )


@pytest.fixture
def exact(monkeypatch):
    """Replace the interior-point solve inside the pipeline with ``exact_solve``."""
    monkeypatch.setattr(pipeline, "solve", exact_solve)
