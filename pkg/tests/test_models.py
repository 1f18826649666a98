import numpy as np
import pytest
from pydantic import ValidationError

from phturnpike.core.errors import ShapeError, StructureError
from phturnpike.models.ocp import OcpSpec, Trajectory
from phturnpike.models.sets import ControlSet, TargetSet
from phturnpike.models.system import (
    PhDaeSystem,
    dissipation_rate,
    hamiltonian,
    output_of,
    validate_ph_dae,
    validate_ph_ode,
)
from phturnpike.schemas.ocp import OcpFile
from phturnpike.schemas.system import SystemFile


class TestSystems:
    def test_msd_is_valid(self, msd):
        result = validate_ph_ode(msd.J, msd.R, msd.Q, msd.B)
        assert result.valid
        assert result.system.n == 3 and result.system.m == 1

    def test_violations_are_reported_as_data(self, msd):
        J = msd.J.copy()
        J[0, 1] = 1.0
        R = -msd.R
        result = validate_ph_ode(J, R, msd.Q, msd.B)
        assert not result.valid
        assert result.system is None
        names = {v.condition for v in result.violations}
        assert "J not skew-symmetric" in names
        assert "R not PSD" in names

    def test_shape_mismatch_raises(self, msd):
        with pytest.raises(ShapeError):
            validate_ph_ode(msd.J, msd.R, np.eye(2), msd.B)

    def test_robot_is_a_valid_descriptor_system(self, robot):
        result = validate_ph_dae(robot.E, robot.J, robot.R, robot.Q, robot.B)
        assert result.valid

    def test_descriptor_energy_weight_must_be_psd(self, robot):
        Q = robot.Q.copy()
        Q[1, 1] = -1.0
        result = validate_ph_dae(robot.E, robot.J, robot.R, Q, robot.B)
        assert "Q^T E not PSD" in {v.condition for v in result.violations}

    def test_feed_through_makes_w_indefinite(self, msd):
        result = validate_ph_ode(msd.J, msd.R, msd.Q, msd.B, P=[[5.0], [0.0], [0.0]], D=[[0.1]])
        assert "W not PSD" in {v.condition for v in result.violations}

    def test_w_matrix_of_msd(self, msd):
        W = msd.W
        assert W.shape == (4, 4)
        assert np.allclose(W[:3, :3], msd.R)
        assert np.allclose(W[3:, :], 0.0)

    def test_energy_functions(self, msd):
        x, u = np.array([1.0, -1.0, 2.0]), np.array([0.5])
        assert hamiltonian(msd, x) == pytest.approx(3.0)
        assert output_of(msd, x, u) == pytest.approx([1.0])
        assert dissipation_rate(msd, x, u) == pytest.approx(0.0)
        assert dissipation_rate(msd, [1.0, 1.0, 0.0], u) == pytest.approx(4.0)

    def test_as_dae_round_trip(self, msd):
        dae = msd.as_dae()
        assert isinstance(dae, PhDaeSystem)
        assert np.array_equal(dae.E, np.eye(3))


class TestSets:
    def test_box_must_contain_zero(self):
        with pytest.raises(ShapeError):
            ControlSet.box([1.0], [2.0])

    def test_box_queries(self):
        box = ControlSet.box([-1.0, -2.0], [1.0, 2.0])
        assert box.contains([1.0, -2.0])
        assert not box.is_interior([1.0, 0.0], 1e-6)
        assert box.boundary_distance([1.0, 1.0]) == pytest.approx(1.0)
        assert box.excess([1.5, 0.0]) == pytest.approx(0.5)
        assert box.u_max == pytest.approx(np.sqrt(5.0))

    def test_ball_facets_are_outer(self):
        ball = ControlSet.ball(2.0, 2)
        G, lo, hi = ball.polyhedral_rows(16)
        assert G.shape == (32, 2)
        assert np.all(np.isneginf(lo))
        assert np.allclose(np.linalg.norm(G, axis=1), 1.0)
        assert np.all(hi == 2.0)

    def test_scalar_ball_is_an_interval(self):
        G, lo, hi = ControlSet.ball(3.0, 1).polyhedral_rows()
        assert G.shape == (2, 1)

    def test_default_box_is_flagged(self):
        assert ControlSet.default_box(2, 10.0).is_default
        assert not ControlSet.box([-1.0], [1.0]).is_default

    def test_affine_box_target(self):
        target = TargetSet.affine_box([[1.0, 1.0]], [0.0], [1.0])
        assert target.contains([0.2, 0.3])
        assert not target.contains([1.0, 1.0])

    def test_target_bounds_must_be_ordered(self):
        with pytest.raises(ShapeError):
            TargetSet.affine_box([[1.0]], [1.0], [0.0])


class TestOcpSpec:
    def test_descriptor_datum_must_lie_in_image_of_e(self, robot):
        box = ControlSet.default_box(1, 10.0)
        with pytest.raises(StructureError):
            OcpSpec(robot, 1.0, 10, [1.0, 1.0, 1.0, 0.0, 0.0], None, box)

    def test_grid_and_horizon(self, msd):
        spec = OcpSpec(msd, 2.0, 4, np.zeros(3), None, ControlSet.default_box(1, 10.0))
        assert spec.h == pytest.approx(0.5)
        assert spec.times.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
        longer = spec.with_horizon(4.0, 8)
        assert longer.h == pytest.approx(0.5) and spec.horizon == 2.0

    def test_control_dimension_must_match(self, msd):
        with pytest.raises(ShapeError):
            OcpSpec(msd, 1.0, 10, np.zeros(3), None, ControlSet.default_box(2, 1.0))

    def test_trajectory_holds_last_control(self):
        trajectory = Trajectory([0.0, 1.0, 2.0], np.zeros((3, 2)), [[1.0], [2.0]], np.zeros((3, 1)))
        assert trajectory.controls_on_grid[:, 0].tolist() == [1.0, 2.0, 2.0]
        assert trajectory.N == 2 and trajectory.h == 1.0

    def test_trajectory_grid_must_be_uniform(self):
        with pytest.raises(ShapeError):
            Trajectory([0.0, 1.0, 3.0], np.zeros((3, 1)), np.zeros((2, 1)), np.zeros((3, 1)))


class TestFileSchemas:
    def test_flat_b_becomes_a_column(self, msd_document):
        document = SystemFile.model_validate({k: msd_document[k] for k in ("J", "R", "Q", "B")})
        assert document.B == [[1.0], [0.0], [0.0]]
        assert not document.is_dae

    def test_ragged_matrix_is_rejected(self, msd_document):
        payload = dict(msd_document, J=[[0.0, 1.0], [0.0]])
        with pytest.raises(ValidationError):
            OcpFile.model_validate(payload)

    def test_unknown_keys_are_rejected(self, msd_document):
        with pytest.raises(ValidationError):
            OcpFile.model_validate(dict(msd_document, gain=3))

    def test_exactly_one_initial_datum(self, msd_document):
        with pytest.raises(ValidationError):
            OcpFile.model_validate(dict(msd_document, w0=[1.0, 1.0, 1.0]))

    def test_descriptor_file_needs_w0(self, robot_document):
        payload = dict(robot_document, T=1.0, N=10, x0=[0.0] * 5)
        with pytest.raises(ValidationError):
            OcpFile.model_validate(payload)

    def test_default_control_set_is_flagged(self, msd_document):
        spec = OcpFile.model_validate(msd_document).to_spec()
        assert spec.control_set.is_default
        assert spec.control_set.upper.tolist() == [10.0]
        assert spec.target.kind == "point"

    def test_explicit_ball(self, msd_document):
        payload = dict(msd_document, control_set={"ball": {"radius": 2.0}})
        spec = OcpFile.model_validate(payload).to_spec()
        assert spec.control_set.kind == "ball" and not spec.control_set.is_default

    def test_invalid_structure_raises(self, msd_document):
        payload = dict(msd_document, R=[[-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(StructureError):
            OcpFile.model_validate(payload).to_spec()
