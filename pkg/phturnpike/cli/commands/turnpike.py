from pathlib import Path
from typing import Dict, List, Optional

import structlog
import typer

from phturnpike.cli.emit import load_spec, write_report
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.storage import OutputWriter
from phturnpike.services.turnpike import multi_horizon_report

logger = structlog.get_logger(__name__)


@handler("turnpike")
def execute(config: RunConfig, writer: OutputWriter) -> Dict[str, bool]:
    spec = load_spec(config.input, config.tolerances)
    density = spec.steps / spec.horizon
    horizons = [
        (float(T), config.steps or max(2, round(density * T)))
        for T in (config.horizons or [spec.horizon])
    ]
    report = multi_horizon_report(spec, horizons, config.eps_grid, config.workers)
    write_report(writer, report)
    return {"control_set_default": spec.control_set.is_default}


def turnpike(
    input_path: Path = typer.Option(..., "--input", "-i", help="OCP JSON file"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Rank tolerance"),
    horizon: Optional[List[float]] = typer.Option(None, "--horizon", help="Horizon T, repeatable"),
    steps: Optional[int] = typer.Option(None, "--steps", help="Grid size N for every horizon"),
    eps_grid: Optional[str] = typer.Option(None, "--eps-grid", help="Comma separated epsilons, e.g. 0.01,0.1"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Horizons solved in parallel"),
) -> None:
    """Turnpike statistics and theoretical bounds over one or more horizons."""
    invoke(
        subcommand="turnpike",
        input=input_path,
        out=out,
        tol=tol,
        horizons=horizon or [],
        steps=steps,
        eps_grid=eps_grid,
        workers=workers,
    )
