from pathlib import Path
from typing import Dict, List, Optional

import structlog
import typer

from phturnpike.cli.emit import load_file
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.config import settings
from phturnpike.core.storage import OutputWriter
from phturnpike.models.sets import ControlSet
from phturnpike.schemas.ocp import OcpFile
from phturnpike.services.control import analyze_control as analyze

logger = structlog.get_logger(__name__)

DEFAULT_GROWTH_HORIZON = 20.0


@handler("analyze-control")
def execute(config: RunConfig, writer: OutputWriter) -> Dict[str, bool]:
    document = load_file(config.input)
    system = document.to_system()
    if isinstance(document, OcpFile) and document.control_set is not None:
        control_set = document.control_set.to_control_set(system.m)
    else:
        control_set = ControlSet.default_box(system.m, settings.DEFAULT_CONTROL_BOUND)
    T_max = max(config.horizons) if config.horizons else DEFAULT_GROWTH_HORIZON
    report = analyze(system, control_set, t=config.t, T_max=T_max)
    payload = {
        "controllable": report.controllable,
        "r_controllable": report.r_controllable,
        "kalman_dim": report.kalman_dim,
        "optimal_steady_basis": report.optimal_steady.basis.to_list(),
        "alpha_t": report.gramian.alpha,
        "t": config.t,
        "M": report.growth.M,
        "T_max": T_max,
        "report": report.to_dict(),
        "tolerances": config.effective_tolerances(),
    }
    writer.write_json("control.json", payload)
    logger.info("control report written", kalman_dim=report.kalman_dim, alpha=report.gramian.alpha, T_max=T_max)
    return {"control_set_default": control_set.is_default}


def analyze_control(
    input_path: Path = typer.Option(..., "--input", "-i", help="System or OCP JSON file"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Rank tolerance"),
    t: float = typer.Option(1.0, "--t", help="Gramian horizon t"),
    horizon: Optional[List[float]] = typer.Option(None, "--horizon", help="Growth-bound horizon"),
) -> None:
    """Kalman subspace, R-controllability, optimal steady states, Gramian and growth bound."""
    invoke(subcommand="analyze-control", input=input_path, out=out, tol=tol, t=t, horizons=horizon or [])
