from pathlib import Path
from typing import Optional

import structlog
import typer

from phturnpike.cli.emit import load_file
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.config import settings
from phturnpike.core.errors import StructureError
from phturnpike.core.storage import OutputWriter
from phturnpike.schemas.report import ValidationReport, ViolationModel

logger = structlog.get_logger(__name__)


@handler("validate")
def execute(config: RunConfig, writer: OutputWriter) -> None:
    document = load_file(config.input)
    tol = config.tol or settings.STRUCTURE_TOL
    result = document.validate_system(tol)
    n, m = len(document.J), len(document.B[0])
    report = ValidationReport(
        kind="dae" if document.is_dae else "ode",
        n=n,
        m=m,
        valid=result.valid,
        violations=[ViolationModel(condition=v.condition, residual=v.residual) for v in result.violations],
        tolerance=tol,
    )
    writer.write_json("validation.json", report)
    logger.info("system validated", kind=report.kind, valid=report.valid, violations=len(report.violations))
    if not result.valid:
        raise StructureError(
            "system violates the port-Hamiltonian conditions",
            {"violations": [v.condition for v in result.violations]},
        )


def validate(
    input_path: Path = typer.Option(..., "--input", "-i", help="System or OCP JSON file"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Structure tolerance"),
) -> None:
    """Check the port-Hamiltonian sign and symmetry conditions."""
    invoke(subcommand="validate", input=input_path, out=out, tol=tol)
