import numpy as np
import pytest
import scipy.sparse as sp

from phturnpike.core.errors import InfeasibleProblemError, ShapeError, SolverError
from phturnpike.models.ocp import SolverTolerances
from phturnpike.services.qp import QpProblem, kkt_residuals, solve_qp


def test_equality_qp_goes_through_kkt():
    problem = QpProblem(P=sp.eye(2), q=np.zeros(2), A=sp.csc_matrix([[1.0, 1.0]]), l=[1.0], u=[1.0])
    solution = solve_qp(problem)

    assert problem.equality_only
    assert np.allclose(solution.x, [0.5, 0.5], atol=1e-10)
    assert solution.y[0] == pytest.approx(-0.5, abs=1e-10)
    assert solution.objective == pytest.approx(0.25, abs=1e-10)
    assert solution.kkt_residual <= 1e-10


def test_active_upper_bound_has_positive_multiplier():
    problem = QpProblem(
        P=sp.csc_matrix([[1.0]]), q=[-2.0], A=sp.csc_matrix([[1.0]]), l=[-np.inf], u=[1.0], constant=2.0
    )
    solution = solve_qp(problem)

    assert solution.x[0] == pytest.approx(1.0, abs=1e-6)
    assert solution.y[0] == pytest.approx(1.0, abs=1e-5)
    assert solution.objective == pytest.approx(0.5, abs=1e-5)


def test_inactive_bound_leaves_unconstrained_minimiser():
    problem = QpProblem(P=sp.eye(2), q=[-1.0, 1.0], A=sp.eye(2), l=[-5.0, -5.0], u=[5.0, 5.0])
    solution = solve_qp(problem)

    assert np.allclose(solution.x, [1.0, -1.0], atol=1e-6)
    assert np.allclose(solution.y, 0.0, atol=1e-6)


def test_inactive_rows_are_settled_by_the_relaxation():
    problem = QpProblem(P=sp.eye(2), q=[-1.0, 1.0], A=sp.eye(2), l=[-5.0, -5.0], u=[5.0, 5.0])
    relaxed = problem.equality_part()
    solution = solve_qp(problem)

    assert relaxed.rows == 0 and relaxed.n == 2
    assert solution.status == "optimal"
    assert solution.iterations == 1


def test_unconverged_solver_run_is_reported():
    problem = QpProblem(
        P=sp.csc_matrix([[1.0]]), q=[-2.0], A=sp.csc_matrix([[1.0]]), l=[-np.inf], u=[1.0], constant=2.0
    )
    with pytest.raises(SolverError) as info:
        solve_qp(problem, SolverTolerances(max_iter=1))
    assert info.value.details["status"] == "maximum iterations reached"


def test_infeasible_qp():
    problem = QpProblem(
        P=sp.csc_matrix([[1.0]]), q=[0.0], A=sp.csc_matrix([[1.0], [1.0]]), l=[1.0, -np.inf], u=[np.inf, 0.0]
    )
    with pytest.raises(InfeasibleProblemError):
        solve_qp(problem)


def test_residuals_flag_a_wrong_point():
    problem = QpProblem(P=sp.eye(2), q=np.zeros(2), A=sp.csc_matrix([[1.0, 1.0]]), l=[1.0], u=[1.0])
    exact = kkt_residuals(problem, np.array([0.5, 0.5]), np.array([-0.5]))
    wrong = kkt_residuals(problem, np.array([1.0, 1.0]), np.array([0.0]))

    assert max(exact.values()) <= 1e-14
    assert wrong["primal"] > 0.1
    assert wrong["stationarity"] > 0.1


@pytest.mark.parametrize(
    "kwargs",
    [
        {"P": sp.eye(2), "q": np.zeros(2), "A": sp.eye(3), "l": np.zeros(3), "u": np.zeros(3)},
        {"P": sp.eye(2), "q": np.zeros(3), "A": sp.eye(2), "l": np.zeros(2), "u": np.zeros(2)},
        {"P": sp.eye(2), "q": np.zeros(2), "A": sp.eye(2), "l": np.ones(2), "u": np.zeros(2)},
    ],
)
def test_inconsistent_problem_is_rejected(kwargs):
    with pytest.raises(ShapeError):
        QpProblem(**kwargs)
