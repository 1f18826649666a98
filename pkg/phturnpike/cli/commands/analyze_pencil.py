from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import structlog
import typer

from phturnpike.cli.emit import load_system
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.config import settings
from phturnpike.core.storage import OutputWriter
from phturnpike.models.system import PhDaeSystem
from phturnpike.services.pencil import (
    dh_index_le1_check,
    dh_regularity_check,
    is_dh_matrix,
    is_dh_pencil,
    is_regular,
    pencil_index,
    quasi_weierstrass,
)

logger = structlog.get_logger(__name__)


@handler("analyze-pencil")
def execute(config: RunConfig, writer: OutputWriter) -> None:
    system = load_system(config.input)
    tol = config.tolerances.rank_tol
    descriptor = isinstance(system, PhDaeSystem)
    E = system.E if descriptor else np.eye(system.n)
    B = system.B if descriptor else system.B_tilde
    A = system.A
    regularity = is_regular(E, A)
    report: Dict[str, Any] = {
        "kind": "dae" if descriptor else "ode",
        "regular": regularity.regular,
        "mu": regularity.mu,
        "tolerances": config.effective_tolerances(),
    }
    if regularity.regular:
        qw = quasi_weierstrass(E, A, tol)
        pencil = is_dh_pencil(E, A, settings.SPECTRAL_TOL, tol)
        matrix = is_dh_matrix(qw.C, settings.SPECTRAL_TOL, tol) if qw.n1 else None
        report.update(
            index=pencil_index(E, A, tol),
            n1=qw.n1,
            n2=qw.n2,
            reconstruction_residual=qw.reconstruction_residual(E, A),
            nilpotent_coupling=qw.nilpotent_coupling(B),
            dh_matrix=matrix.to_dict() if matrix is not None else None,
            dh_pencil=pencil.is_dh,
            conditions=pencil.conditions,
            violated=pencil.violated,
            details=pencil.details,
        )
    if descriptor:
        report["dh_regularity"] = dh_regularity_check(system, tol)
        report["dh_index_le1"] = dh_index_le1_check(system, tol)
    writer.write_json("pencil.json", report)
    logger.info("pencil analysed", regular=regularity.regular, index=report.get("index"), mu=regularity.mu)


def analyze_pencil(
    input_path: Path = typer.Option(..., "--input", "-i", help="System JSON file"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Rank tolerance"),
) -> None:
    """Regularity, index and dissipative-Hamiltonian certificates of sE - A."""
    invoke(subcommand="analyze-pencil", input=input_path, out=out, tol=tol)
