from functools import lru_cache
from typing import Any, Dict, List

from pydantic import field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from phturnpike import __version__


class Settings(BaseSettings):
    PROJECT_NAME: str = "ph-turnpike"
    VERSION: str = __version__

    # Environment
    ENVIRONMENT: str = "development"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"

    # Structural decisions (ranks, kernels, axis tests)
    RANK_TOL: float = 1e-9
    SPECTRAL_TOL: float = 1e-8
    STRUCTURE_TOL: float = 1e-10
    INVERTIBILITY_RCOND: float = 1e-10

    # QP solver
    QP_TOL: float = 1e-7
    QP_EPS: float = 1e-9
    QP_MAX_ITER: int = 200000
    FEASIBILITY_TOL: float = 1e-6

    # Control sets
    DEFAULT_CONTROL_BOUND: float = 10.0
    BALL_FACETS_PER_INPUT: int = 16
    INTERIOR_MARGIN: float = 1e-6

    # Reachability and growth constants
    GRAMIAN_MIN_STEPS: int = 200
    GROWTH_SAFETY: float = 1.25
    GROWTH_FLOOR: float = 1e-6
    MIN_TIME_STEPS: int = 200
    MIN_TIME_REL_WIDTH: float = 1e-2

    # Turnpike diagnostics - comma separated to keep env parsing flat
    EPS_GRID: str = "0.01,0.05,0.1,0.5"

    WORKERS: int = 1

    @property
    def eps_values(self) -> List[float]:
        """Parse the measure-turnpike epsilon grid"""
        return parse_float_list(self.EPS_GRID)

    @property
    def tolerances(self) -> Dict[str, float]:
        return {
            "rank": self.RANK_TOL,
            "spectral": self.SPECTRAL_TOL,
            "structure": self.STRUCTURE_TOL,
            "qp": self.QP_TOL,
            "feasibility": self.FEASIBILITY_TOL,
        }

    @field_validator(
        "RANK_TOL",
        "SPECTRAL_TOL",
        "STRUCTURE_TOL",
        "INVERTIBILITY_RCOND",
        "QP_TOL",
        "QP_EPS",
        "FEASIBILITY_TOL",
        "DEFAULT_CONTROL_BOUND",
        "INTERIOR_MARGIN",
        "GROWTH_FLOOR",
        "MIN_TIME_REL_WIDTH",
    )
    @classmethod
    def positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("GROWTH_SAFETY")
    @classmethod
    def inflating(cls, value: float) -> float:
        if value < 1:
            raise ValueError("safety factor must be at least 1")
        return value

    @field_validator("EPS_GRID")
    @classmethod
    def eps_grid_positive(cls, value: str) -> str:
        if not parse_float_list(value) or any(v <= 0 for v in parse_float_list(value)):
            raise ValueError("epsilon grid must hold positive numbers")
        return value

    @model_validator(mode="before")
    @classmethod
    def validate_settings(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        # Set debug mode based on environment
        if "DEBUG" not in values:
            environment = values.get("ENVIRONMENT", "production")
            values["DEBUG"] = str(environment).lower() in ["development", "dev"]
        return values

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        env_ignore_empty=True,
    )


def parse_float_list(raw: str) -> List[float]:
    """Comma-separated floats, blanks skipped"""
    return [float(item.strip()) for item in raw.split(",") if item.strip()]


@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
