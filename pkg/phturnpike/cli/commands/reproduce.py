"""Built-in reproductions: the mass-spring-damper ODE and the robot DAE."""

from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import structlog
import typer

from phturnpike.cli.emit import horizon_label, write_report, write_solution
from phturnpike.cli.runner import RunConfig, handler, invoke
from phturnpike.core.storage import OutputWriter
from phturnpike.models.system import PhDaeSystem
from phturnpike.services.benchmarks import example_horizons, example_spec, get_example
from phturnpike.services.pencil import dh_index_le1_check, is_dh_pencil, pencil_index
from phturnpike.services.turnpike import TurnpikeReport, multi_horizon_report

logger = structlog.get_logger(__name__)


def _example_facts(name: str, report: TurnpikeReport, system) -> Dict[str, Any]:
    facts: Dict[str, Any] = {
        "example": name,
        "description": get_example(name).description,
        "subspace_kind": report.subspace_kind,
        "subspace_basis": report.subspace.to_list(),
    }
    if isinstance(system, PhDaeSystem):
        facts["pencil_index"] = pencil_index(system.E, system.A)
        facts["dh_pencil"] = is_dh_pencil(system.E, system.A).is_dh
        facts["dh_index_le1"] = dh_index_le1_check(system)
    return facts


def _plot_data(writer: OutputWriter, name: str, report: TurnpikeReport) -> None:
    for T, solution in sorted(report.solutions.items()):
        label = horizon_label(T)
        trajectory = solution.trajectory
        times = trajectory.times
        states = np.column_stack([times, trajectory.states, trajectory.controls_on_grid])
        writer.write_columns(f"plot_states_T{label}.dat", "t states controls", states)
        writer.write_columns(f"plot_adjoint_T{label}.dat", "t adjoint", np.column_stack([times, solution.adjoint]))
        if name == "msd":
            writer.write_columns(f"plot_orbit_T{label}.dat", "x1 x2 x3", trajectory.states)


@handler("reproduce")
def execute(config: RunConfig, writer: OutputWriter) -> Dict[str, bool]:
    name = config.example
    spec = example_spec(name, config.tolerances)
    horizon = config.horizons[0] if config.horizons else None
    horizons = example_horizons(name, horizon, config.steps)
    report = multi_horizon_report(spec, horizons, config.eps_grid, config.workers)
    write_report(writer, report)
    for T, solution in sorted(report.solutions.items()):
        write_solution(writer, solution, spec.system, suffix=f"_T{horizon_label(T)}")
    if report.solutions:
        longest = max(report.solutions)
        write_solution(writer, report.solutions[longest], spec.system)
    _plot_data(writer, name, report)
    writer.write_json("example.json", _example_facts(name, report, spec.system))
    logger.info("reproduction written", example=name, horizons=[T for T, _ in horizons])
    return {"control_set_default": spec.control_set.is_default}


def reproduce(
    example_arg: Optional[str] = typer.Argument(None, metavar="EXAMPLE", help="msd or robot"),
    example: Optional[str] = typer.Option(None, "--example", help="msd or robot"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Output directory"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Rank tolerance"),
    horizon: Optional[float] = typer.Option(None, "--horizon", help="Run a single horizon T"),
    steps: Optional[int] = typer.Option(None, "--steps", help="Grid size N"),
    eps_grid: Optional[str] = typer.Option(None, "--eps-grid", help="Comma separated epsilons"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Horizons solved in parallel"),
) -> None:
    """Rebuild a built-in experiment and write its data bundle."""
    invoke(
        subcommand="reproduce",
        example=example or example_arg,
        out=out,
        tol=tol,
        horizons=[horizon] if horizon is not None else [],
        steps=steps,
        eps_grid=eps_grid,
        workers=workers,
    )
