from pathlib import Path
from typing import Dict, Optional

import structlog
import typer

from phturnpike.cli.emit import load_spec, write_solution
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.storage import OutputWriter
from phturnpike.services.ocp import solve_ocp

logger = structlog.get_logger(__name__)


@handler("solve")
def execute(config: RunConfig, writer: OutputWriter) -> Dict[str, bool]:
    spec = load_spec(config.input, config.tolerances)
    if config.horizons or config.steps:
        T = config.horizons[0] if config.horizons else spec.horizon
        spec = spec.with_horizon(T, config.steps or max(2, round(spec.steps * T / spec.horizon)))
    solution = solve_ocp(spec)
    write_solution(writer, solution, spec.system)
    return {"control_set_default": spec.control_set.is_default}


def solve(
    input_path: Path = typer.Option(..., "--input", "-i", help="OCP JSON file"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Rank tolerance"),
    horizon: Optional[float] = typer.Option(None, "--horizon", help="Override the horizon T"),
    steps: Optional[int] = typer.Option(None, "--steps", help="Override the grid size N"),
) -> None:
    """Solve the minimal-energy-supply problem and write the trajectory."""
    invoke(
        subcommand="solve",
        input=input_path,
        out=out,
        tol=tol,
        horizons=[horizon] if horizon is not None else [],
        steps=steps,
    )
