import numpy as np
import pytest

from phturnpike.core.errors import ShapeError
from phturnpike.models.system import revalidate
from phturnpike.services.benchmarks import (
    MSD_HORIZONS,
    ROBOT_CONTROL_BOUND,
    ROBOT_HORIZONS,
    example_horizons,
    example_spec,
    get_example,
    msd_system,
    robot_system,
)


def test_examples_are_port_hamiltonian():
    assert revalidate(msd_system()).valid
    assert revalidate(robot_system()).valid


def test_robot_parameters_can_be_overridden():
    system = robot_system({"k1": 2.0})
    assert system.Q[0, 0] == 2.0
    assert robot_system().Q[0, 0] == 0.0


def test_msd_uses_the_default_box():
    spec = example_spec("msd")
    assert spec.control_set.is_default
    assert spec.control_set.u_max == pytest.approx(10.0)


def test_robot_box_is_wide_enough_for_the_force_input():
    control_set = example_spec("robot").control_set
    assert not control_set.is_default
    assert control_set.kind == "box"
    assert control_set.u_max == pytest.approx(ROBOT_CONTROL_BOUND)
    assert ROBOT_CONTROL_BOUND >= 500.0


def test_example_specs_use_the_longest_listed_horizon():
    assert example_spec("msd").horizon == 20.0
    assert example_spec("robot").steps == 3000


def test_robot_datum_lies_in_image_of_e():
    spec = example_spec("robot")
    assert np.allclose(spec.initial, [1.0, 1.0, 0.0, 1.0, 0.0])
    assert spec.is_dae


class TestHorizons:
    def test_published_grids(self):
        assert example_horizons("msd") == MSD_HORIZONS
        assert example_horizons("robot") == ROBOT_HORIZONS

    def test_listed_horizon_keeps_its_grid(self):
        assert example_horizons("robot", 10.0) == [(10.0, 2000)]

    def test_unlisted_horizon_scales_with_density(self):
        assert example_horizons("msd", 12.0) == [(12.0, 120)]
        assert example_horizons("robot", 2.5) == [(2.5, 500)]

    def test_steps_override_every_horizon(self):
        assert example_horizons("msd", steps=50) == [(10.0, 50), (15.0, 50), (20.0, 50)]

    def test_nonpositive_override(self):
        with pytest.raises(ShapeError):
            example_horizons("msd", -1.0)


def test_unknown_example():
    with pytest.raises(ShapeError):
        get_example("pendulum")
