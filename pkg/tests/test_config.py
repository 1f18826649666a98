import pytest
from pydantic import ValidationError

from phturnpike.cli.runner import RunConfig
from phturnpike.core.config import Settings, parse_float_list


class TestSettings:
    def test_defaults(self):
        config = Settings(_env_file=None)
        assert config.RANK_TOL == 1e-9
        assert config.DEFAULT_CONTROL_BOUND == 10.0
        assert config.eps_values == [0.01, 0.05, 0.1, 0.5]
        assert set(config.tolerances) == {"rank", "spectral", "structure", "qp", "feasibility"}

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("RANK_TOL", "1e-7")
        monkeypatch.setenv("EPS_GRID", "0.2, 0.4")
        config = Settings(_env_file=None)
        assert config.RANK_TOL == 1e-7
        assert config.eps_values == [0.2, 0.4]

    def test_debug_follows_environment(self):
        assert Settings(_env_file=None, ENVIRONMENT="dev").DEBUG
        assert not Settings(_env_file=None, ENVIRONMENT="production").DEBUG

    @pytest.mark.parametrize(
        "override",
        [{"RANK_TOL": 0.0}, {"QP_TOL": -1.0}, {"GROWTH_SAFETY": 0.5}, {"EPS_GRID": "0.1,-0.2"}, {"EPS_GRID": " , "}],
    )
    def test_invalid_values(self, override):
        with pytest.raises(ValidationError):
            Settings(_env_file=None, **override)


def test_parse_float_list_skips_blanks():
    assert parse_float_list("1, 2,,3 ") == [1.0, 2.0, 3.0]


class TestRunConfig:
    def test_input_required(self):
        with pytest.raises(ValidationError):
            RunConfig(subcommand="solve")

    def test_reproduce_needs_known_example(self):
        with pytest.raises(ValidationError):
            RunConfig(subcommand="reproduce", example="pendulum")
        assert RunConfig(subcommand="reproduce", example="robot").input is None

    def test_unknown_subcommand(self, tmp_path):
        with pytest.raises(ValidationError):
            RunConfig(subcommand="plot", input=tmp_path)

    def test_eps_grid_string(self, tmp_path):
        config = RunConfig(subcommand="turnpike", input=tmp_path, eps_grid="0.5,0.1")
        assert config.eps_grid == [0.5, 0.1]
        with pytest.raises(ValidationError):
            RunConfig(subcommand="turnpike", input=tmp_path, eps_grid="0.5,-1")

    def test_tol_routes_by_subcommand(self, tmp_path):
        validate = RunConfig(subcommand="validate", input=tmp_path, tol=1e-6)
        solve = RunConfig(subcommand="solve", input=tmp_path, tol=1e-6)

        assert validate.effective_tolerances()["structure"] == 1e-6
        assert solve.effective_tolerances()["rank"] == 1e-6
        assert solve.tolerances.rank_tol == 1e-6

    def test_horizons_must_be_positive(self, tmp_path):
        with pytest.raises(ValidationError):
            RunConfig(subcommand="turnpike", input=tmp_path, horizons=[10.0, 0.0])
