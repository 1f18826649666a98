"""
Command dispatch.

`run` resolves the handler registered for the subcommand, opens the output
directory and always leaves a meta.json behind, whatever the outcome.
Library errors map to their exit codes; anything unexpected exits 4.
"""

import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import structlog
import typer
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from phturnpike.core.config import parse_float_list, settings
from phturnpike.core.errors import InputFormatError, PhTurnpikeError
from phturnpike.core.storage import OutputWriter, atomic_write_text, dump_json, output_session
from phturnpike.models.ocp import SolverTolerances
from phturnpike.schemas.report import RunMeta

logger = structlog.get_logger(__name__)

SUBCOMMANDS = ("validate", "analyze-pencil", "analyze-control", "reduce", "solve", "turnpike", "reproduce")
EXAMPLES = ("msd", "robot")

VALIDATION_EXIT = 2
UNEXPECTED_EXIT = 4

Handler = Callable[["RunConfig", OutputWriter], Optional[Dict[str, Any]]]
HANDLERS: Dict[str, Handler] = {}


class RunConfig(BaseModel):
    """One CLI invocation"""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    input: Optional[Path] = None
    out: Path = Path("out")
    tol: Optional[float] = Field(default=None, gt=0)
    horizons: List[float] = Field(default_factory=list)
    steps: Optional[int] = Field(default=None, ge=2)
    eps_grid: Optional[List[float]] = None
    example: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)
    t: float = Field(default=1.0, gt=0)

    @field_validator("subcommand")
    @classmethod
    def known_subcommand(cls, value: str) -> str:
        if value not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {value!r}")
        return value

    @field_validator("horizons")
    @classmethod
    def positive_horizons(cls, value: List[float]) -> List[float]:
        if any(T <= 0 for T in value):
            raise ValueError("horizons must be positive")
        return value

    @field_validator("eps_grid", mode="before")
    @classmethod
    def split_eps_grid(cls, value: Any) -> Any:
        if isinstance(value, str):
            return parse_float_list(value)
        return value

    @field_validator("eps_grid")
    @classmethod
    def positive_eps(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and (not value or any(e <= 0 for e in value)):
            raise ValueError("eps grid must hold positive numbers")
        return value

    @model_validator(mode="after")
    def needs_source(self) -> "RunConfig":
        if self.subcommand == "reproduce":
            if self.example not in EXAMPLES:
                raise ValueError(f"reproduce needs --example, one of {', '.join(EXAMPLES)}")
        elif self.input is None:
            raise ValueError(f"{self.subcommand} needs --input")
        return self

    @property
    def tolerances(self) -> SolverTolerances:
        if self.tol is None:
            return SolverTolerances()
        return SolverTolerances(rank_tol=self.tol)

    def effective_tolerances(self) -> Dict[str, float]:
        values = dict(settings.tolerances)
        if self.tol is not None:
            values["structure" if self.subcommand == "validate" else "rank"] = self.tol
        return values


def handler(name: str) -> Callable[[Handler], Handler]:
    """Register the function that executes `name`"""

    def register(func: Handler) -> Handler:
        HANDLERS[name] = func
        return func

    return register


def _resolve(subcommand: str) -> Handler:
    if not HANDLERS:
        from phturnpike.cli import commands  # noqa: F401  registers the handlers
    return HANDLERS[subcommand]


def _execute(config: RunConfig, writer: OutputWriter) -> Tuple[int, Optional[Dict[str, Any]], Optional[BaseException]]:
    try:
        extra = _resolve(config.subcommand)(config, writer)
        return 0, extra, None
    except PhTurnpikeError as exc:
        logger.warning("run failed", subcommand=config.subcommand, **exc.to_dict())
        return exc.exit_code, None, exc
    except ValidationError as exc:
        logger.warning("input file rejected", subcommand=config.subcommand, errors=exc.errors())
        return VALIDATION_EXIT, None, exc
    except Exception as exc:  # noqa: BLE001
        logger.exception("unexpected failure", subcommand=config.subcommand)
        return UNEXPECTED_EXIT, None, exc


def run(config: RunConfig) -> int:
    """Execute one subcommand and return the process exit status"""
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    meta = RunMeta(subcommand=config.subcommand, tolerances=config.effective_tolerances(), started_at=started)
    logger.info("run started", subcommand=config.subcommand, out=str(config.out))

    try:
        with output_session(config.out) as writer:
            code, extra, error = _execute(config, writer)
            files = [p.name for p in writer.written]
    except InputFormatError as exc:
        logger.warning("output directory unusable", **exc.to_dict())
        return exc.exit_code

    updates: Dict[str, Any] = {
        "finished_at": datetime.now(timezone.utc),
        "elapsed_seconds": time.perf_counter() - clock,
        "exit_code": code,
        "files": files,
    }
    if extra:
        updates.update(extra)
    if error is not None:
        updates["error"] = str(error)
        updates["error_type"] = type(error).__name__
    meta = meta.model_copy(update=updates)
    atomic_write_text(Path(config.out) / "meta.json", dump_json(meta))
    logger.info("run finished", subcommand=config.subcommand, exit_code=code, files=len(files))
    return code


def invoke(**fields: Any) -> None:
    """Build the config from command-line options, run it and exit with its status"""
    try:
        config = RunConfig(**fields)
    except ValidationError as exc:
        for error in exc.errors():
            typer.echo(f"error: {error['msg']}", err=True)
        raise typer.Exit(VALIDATION_EXIT) from exc
    raise typer.Exit(run(config))
