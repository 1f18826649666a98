"""
Built-in reproduction examples.

msd: a three-state mass-spring-damper with homogeneous damping, an ODE with
Q = I and no feed-through.

robot: vertical force control of a two-mass manipulator end-effector with a
rigid third spring, a descriptor system whose constraint makes the pencil
index 2 (x5 = 0 is algebraic and x3 acts as its multiplier).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog

from phturnpike.core.config import settings
from phturnpike.core.errors import ShapeError
from phturnpike.models.ocp import OcpSpec, SolverTolerances
from phturnpike.models.sets import ControlSet, TargetSet
from phturnpike.models.system import PhDaeSystem, PhOdeSystem, PhSystem

logger = structlog.get_logger(__name__)

MSD_HORIZONS: List[Tuple[float, int]] = [(10.0, 100), (15.0, 150), (20.0, 200)]
ROBOT_HORIZONS: List[Tuple[float, int]] = [(5.0, 1000), (10.0, 2000), (15.0, 3000)]
# the end-effector force needs |u| up to about 414 on the shortest horizon
ROBOT_CONTROL_BOUND = 1000.0

ROBOT_PARAMETERS: Dict[str, float] = {
    "m_A": 1.1,
    "m_B": 0.1,
    "k1": 0.0,
    "k2": 5.0,
    "c1": 10.0,
    "c2": 10.0,
    "c3": 17.0,
}


@dataclass(frozen=True)
class Example:
    name: str
    horizons: List[Tuple[float, int]]
    density: int
    description: str


EXAMPLES: Dict[str, Example] = {
    "msd": Example("msd", MSD_HORIZONS, 10, "modified mass-spring-damper, ker RQ = {x1 + x2 = 0}"),
    "robot": Example("robot", ROBOT_HORIZONS, 200, "robot end-effector force control, ker RQ = {x4 = x5 = 0}"),
}


def msd_system() -> PhOdeSystem:
    J = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
    R = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    B = np.array([[1.0], [0.0], [0.0]])
    return PhOdeSystem(J, R, np.eye(3), B)


def robot_system(parameters: Optional[Dict[str, float]] = None) -> PhDaeSystem:
    """k3 = infinity, so the third entry of E is 1/k3 = 0"""
    p = {**ROBOT_PARAMETERS, **(parameters or {})}
    Gamma = np.array([[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]])
    J = np.block([[np.zeros((3, 3)), Gamma], [-Gamma.T, np.zeros((2, 2))]])
    damping = np.array([[p["c1"] + p["c2"], -p["c2"]], [-p["c2"], p["c2"] + p["c3"]]])
    R = np.zeros((5, 5))
    R[3:, 3:] = damping
    E = np.diag([1.0, 1.0, 0.0, p["m_A"], p["m_B"]])
    Q = np.diag([p["k1"], p["k2"], 1.0, 1.0, 1.0])
    B = np.array([[0.0], [0.0], [0.0], [1.0], [0.0]])
    return PhDaeSystem(E, J, R, Q, B)


def _control_set(system: PhSystem) -> ControlSet:
    return ControlSet.default_box(system.m, settings.DEFAULT_CONTROL_BOUND)


def msd_spec(horizon: float = 20.0, steps: int = 200, tolerances: Optional[SolverTolerances] = None) -> OcpSpec:
    system = msd_system()
    return OcpSpec(
        system,
        horizon,
        steps,
        np.array([1.0, 1.0, 1.0]),
        TargetSet.singleton([-1.2, -0.7, -1.0]),
        _control_set(system),
        tolerances or SolverTolerances(),
    )


def robot_spec(horizon: float = 15.0, steps: int = 3000, tolerances: Optional[SolverTolerances] = None) -> OcpSpec:
    system = robot_system()
    return OcpSpec(
        system,
        horizon,
        steps,
        np.array([1.0, 1.0, 0.0, 1.0, 0.0]),
        TargetSet.singleton([1.0, 1.0, 0.0, 2.0, 0.0]),
        ControlSet.box([-ROBOT_CONTROL_BOUND], [ROBOT_CONTROL_BOUND]),
        tolerances or SolverTolerances(),
    )


def example_spec(name: str, tolerances: Optional[SolverTolerances] = None) -> OcpSpec:
    example = get_example(name)
    T, N = example.horizons[-1]
    builder = msd_spec if name == "msd" else robot_spec
    return builder(T, N, tolerances)


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ShapeError(f"unknown example {name!r}", {"known": sorted(EXAMPLES)}) from None


def example_horizons(name: str, horizon: Optional[float] = None, steps: Optional[int] = None) -> List[Tuple[float, int]]:
    """
    Horizons of a reproduction run.

    Without overrides the published grid is used. A horizon override keeps
    the listed N for that horizon, otherwise N scales with the example's grid
    density; a steps override replaces N for every horizon.
    """
    example = get_example(name)
    if horizon is None:
        horizons = list(example.horizons)
    else:
        listed = {T: N for T, N in example.horizons}
        horizons = [(float(horizon), listed.get(float(horizon), int(round(example.density * horizon))))]
    if steps is not None:
        horizons = [(T, int(steps)) for T, _ in horizons]
    if any(T <= 0 or N < 2 for T, N in horizons):
        raise ShapeError("horizon overrides must be positive", {"horizons": horizons})
    logger.debug("example horizons", example=name, horizons=horizons)
    return horizons
