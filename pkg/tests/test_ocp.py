import numpy as np
import pytest

from phturnpike.core.errors import DegenerateProblemError, InfeasibleProblemError, ShapeError
from phturnpike.models.ocp import OcpSpec
from phturnpike.models.sets import ControlSet, TargetSet
from phturnpike.models.system import PhOdeSystem
from phturnpike.services.benchmarks import ROBOT_CONTROL_BOUND, msd_spec, robot_spec
from phturnpike.services.ocp import (
    adjoint_trajectory,
    energy_audit,
    minimal_terminal_distance,
    simulate_ode,
    solve_ocp,
    transcribe,
)
from phturnpike.services.pencil import solve_dae_ivp


@pytest.fixture(scope="module")
def msd_solution():
    return solve_ocp(msd_spec(10.0, 100))


class TestEnergyBalance:
    @pytest.mark.parametrize("seed", range(4))
    def test_ode_balance_on_random_controls(self, make_ph_ode, seed):
        rng = np.random.default_rng(seed)
        system = make_ph_ode(rng, n=4, m=2, r_rank=2)
        N = 400
        controls = rng.uniform(-1.0, 1.0, (N, 2))
        trajectory = simulate_ode(system, rng.standard_normal(4), controls, 1.0 / N)
        audit = energy_audit(trajectory, system)

        assert audit.residual <= 1e-6 * (1.0 + abs(audit.supplied))
        assert audit.dissipated >= 0.0

    def test_descriptor_balance_on_random_controls(self, make_index1_dae, rng):
        system = make_index1_dae(rng, m=2)
        N = 400
        controls = rng.uniform(-1.0, 1.0, (N, 2))
        w0 = system.E @ rng.standard_normal(system.n)
        trajectory = solve_dae_ivp(system, controls, w0, 1.0)
        audit = energy_audit(trajectory, system)

        assert audit.residual <= 1e-6 * (1.0 + abs(audit.supplied))

    def test_conservative_system_supplies_its_energy_change(self):
        system = PhOdeSystem([[0.0, 1.0], [-1.0, 0.0]], np.zeros((2, 2)), np.eye(2), [[1.0], [0.0]])
        N = 400
        trajectory = simulate_ode(system, [1.0, 0.0], np.ones((N, 1)), 2.0 / N)
        audit = energy_audit(trajectory, system)

        assert audit.dissipated == pytest.approx(0.0, abs=1e-14)
        assert audit.hamiltonian_change == pytest.approx(audit.supplied, abs=1e-9)


class TestTranscription:
    def test_variable_layout(self):
        problem = transcribe(msd_spec(10.0, 100))
        layout = problem.layout

        assert problem.n == 100 * 1 + 101 * 3
        assert layout["x_offset"] == 100
        assert layout["target_row"] == 3 + 100 * 3
        assert layout["control_row"] == layout["target_row"] + 3
        assert problem.rows == layout["control_row"] + 100

    def test_descriptor_spec_is_refused(self):
        with pytest.raises(ShapeError):
            transcribe(robot_spec(5.0, 100))

    def test_unknown_objective(self):
        with pytest.raises(ShapeError):
            transcribe(msd_spec(10.0, 100), objective="time")

    def test_box_target_uses_rows_of_G(self):
        spec = msd_spec(10.0, 100)
        target = TargetSet.affine_box(np.eye(3)[:2], [-1.0, -1.0], [1.0, 1.0])
        problem = transcribe(spec.with_system(spec.system, spec.initial, target))
        assert problem.layout["control_row"] - problem.layout["target_row"] == 2


class TestMsd:
    def test_reaches_the_target(self, msd_solution):
        spec = msd_spec(10.0, 100)
        assert msd_solution.terminal_error <= 1e-6
        assert msd_solution.trajectory.admissible(spec.control_set)
        assert msd_solution.control_set_default
        assert msd_solution.status.startswith("optimal")

    def test_cost_matches_supplied_energy(self, msd_solution):
        assert msd_solution.energy_balance_residual <= 1e-3 * (1.0 + abs(msd_solution.supplied_energy))
        assert msd_solution.dissipated_energy >= 0.0

    def test_adjoint_has_one_row_per_grid_point(self, msd_solution):
        assert msd_solution.adjoint.shape == (101, 3)
        samples = adjoint_trajectory(msd_solution, control_set=msd_spec(10.0, 100).control_set)
        assert samples.values.shape == (101, 3)
        assert np.allclose(samples.values[-1], msd_solution.adjoint[-1])
        assert np.all(np.isfinite(samples.norms))

    def test_short_horizon_is_infeasible(self):
        with pytest.raises(InfeasibleProblemError):
            solve_ocp(msd_spec(0.1, 10))

    def test_minimal_distance_is_zero_when_reachable(self):
        result = minimal_terminal_distance(msd_spec(10.0, 100))
        assert result.feasible
        assert result.distance <= result.tolerance
        assert bool(result)


def test_lossless_problem_is_degenerate():
    system = PhOdeSystem([[0.0, 1.0], [-1.0, 0.0]], np.zeros((2, 2)), np.eye(2), [[1.0], [0.0]])
    spec = OcpSpec(system, 1.0, 10, [1.0, 0.0], None, ControlSet.box([-1.0], [1.0]))
    with pytest.raises(DegenerateProblemError):
        solve_ocp(spec)


def test_ball_controls_stay_close_to_the_ball(msd):
    spec = OcpSpec(msd, 10.0, 100, [1.0, 1.0, 1.0], None, ControlSet.ball(0.5, 1))
    solution = solve_ocp(spec)
    assert solution.ball_excess <= 1e-6
    assert solution.terminal_error == 0.0


@pytest.mark.slow
def test_robot_reaches_the_descriptor_target():
    spec = robot_spec(5.0, 1000)
    solution = solve_ocp(spec)

    terminal = spec.system.E @ solution.trajectory.states[-1]
    assert np.allclose(terminal, [1.0, 1.0, 0.0, 2.0, 0.0], atol=1e-6)
    assert solution.reduction.method == "constraint_elimination"
    assert solution.reduced_trajectory.states.shape == (1001, 3)
    peak = np.max(np.abs(solution.trajectory.controls))
    assert 100.0 < peak < ROBOT_CONTROL_BOUND
