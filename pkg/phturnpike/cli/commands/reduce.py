from pathlib import Path
from typing import Optional

import structlog
import typer

from phturnpike.cli.emit import load_system, system_payload
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.errors import StructureError
from phturnpike.core.storage import OutputWriter
from phturnpike.models.system import PhDaeSystem
from phturnpike.services.decomp import reduce_dae

logger = structlog.get_logger(__name__)


@handler("reduce")
def execute(config: RunConfig, writer: OutputWriter) -> None:
    system = load_system(config.input)
    if not isinstance(system, PhDaeSystem):
        raise StructureError("reduce needs a descriptor system (a file with E)")
    reduction = reduce_dae(system, config.tolerances.rank_tol)
    writer.write_json("reduced_system.json", system_payload(reduction.reduced))
    transform = reduction.transform_payload()
    transform["checks"] = reduction.checks
    writer.write_json("transform.json", transform)
    logger.info("system reduced", method=reduction.method, n=system.n, n1=reduction.n1)


def reduce(
    input_path: Path = typer.Option(..., "--input", "-i", help="Descriptor system JSON file"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Rank tolerance"),
) -> None:
    """Reduce a pH-DAE to a pH-ODE with feed-through and emit the lifting data."""
    invoke(subcommand="reduce", input=input_path, out=out, tol=tol)
