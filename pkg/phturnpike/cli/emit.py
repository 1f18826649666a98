"""Input loading and the file formats the commands write."""

from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from phturnpike.core.errors import InputFormatError
from phturnpike.core.numerics import SubspaceBasis
from phturnpike.core.storage import OutputWriter, read_json
from phturnpike.models.ocp import OcpSpec, SolverTolerances
from phturnpike.models.system import PhOdeSystem, PhSystem
from phturnpike.schemas.ocp import OcpFile
from phturnpike.schemas.report import SolutionSummary
from phturnpike.schemas.system import SystemFile
from phturnpike.services.ocp import OcpSolution
from phturnpike.services.turnpike import TurnpikeReport, distance_profile, turnpike_subspace

OCP_KEYS = {"T", "N", "x0", "w0", "target", "control_set"}


def horizon_label(T: float) -> str:
    return f"{T:g}"


def load_file(path: Path) -> Union[SystemFile, OcpFile]:
    """System file, or OCP file when any problem key is present"""
    data = read_json(path)
    if not isinstance(data, dict):
        raise InputFormatError(f"{path}: top level must be a JSON object", {"path": str(path)})
    if OCP_KEYS & data.keys():
        return OcpFile.model_validate(data)
    return SystemFile.model_validate(data)


def load_system(path: Path) -> PhSystem:
    return load_file(path).to_system()


def load_spec(path: Path, tolerances: Optional[SolverTolerances] = None) -> OcpSpec:
    document = load_file(path)
    if not isinstance(document, OcpFile):
        raise InputFormatError(f"{path}: not an OCP file (T, N and x0/w0 are missing)", {"path": str(path)})
    return document.to_spec(tolerances)


def system_payload(system: PhOdeSystem) -> dict:
    """A reduced system in the system-file layout"""
    return {name: getattr(system, name).tolist() for name in ("J", "R", "Q", "B", "P", "D")}


def trajectory_table(solution: OcpSolution, subspace: SubspaceBasis, joint: bool) -> Tuple[List[str], np.ndarray]:
    """t, states, held controls, outputs, discrete adjoint and distance, one row per grid point"""
    trajectory = solution.trajectory
    n, m = trajectory.states.shape[1], trajectory.controls.shape[1]
    p = trajectory.outputs.shape[1]
    k = solution.adjoint.shape[1]
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"u{i + 1}" for i in range(m)]
        + [f"y{i + 1}" for i in range(p)]
        + [f"lambda{i + 1}" for i in range(k)]
        + ["distW"]
    )
    dist = distance_profile(solution, subspace, joint)
    table = np.column_stack(
        [
            trajectory.times,
            trajectory.states,
            trajectory.controls_on_grid,
            trajectory.outputs,
            solution.adjoint,
            dist,
        ]
    )
    return header, table


def solution_summary(solution: OcpSolution) -> SolutionSummary:
    trajectory = solution.trajectory
    return SolutionSummary(
        cost=solution.cost,
        objective=solution.objective,
        supplied_energy=solution.supplied_energy,
        dissipated_energy=solution.dissipated_energy,
        kkt_residual=solution.kkt_residual,
        energy_balance_residual=solution.energy_balance_residual,
        terminal_error=solution.terminal_error,
        ball_excess=solution.ball_excess,
        status=solution.status,
        iterations=solution.iterations,
        lambda0=solution.lambda0,
        control_set_default=solution.control_set_default,
        reduction=getattr(solution.reduction, "method", None),
        T=trajectory.horizon,
        N=trajectory.N,
    )


def write_solution(writer: OutputWriter, solution: OcpSolution, system: PhSystem, suffix: str = "") -> None:
    subspace, joint = turnpike_subspace(system)
    header, table = trajectory_table(solution, subspace, joint)
    writer.write_csv(f"trajectory{suffix}.csv", header, table)
    writer.write_json(f"solution{suffix}.json", solution_summary(solution))


def write_profiles(writer: OutputWriter, report: TurnpikeReport) -> None:
    for T, profile in sorted(report.profiles.items()):
        solution = report.solutions[T]
        times = solution.trajectory.times
        norms = np.linalg.norm(solution.adjoint, axis=1)
        writer.write_csv(f"profile_T{horizon_label(T)}.csv", ["t", "dist", "lambda_norm"], np.column_stack([times, profile, norms]))


def write_report(writer: OutputWriter, report: TurnpikeReport) -> None:
    writer.write_json("report.json", report.to_dict())
    write_profiles(writer, report)
