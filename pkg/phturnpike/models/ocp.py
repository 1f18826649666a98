from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from phturnpike.core.config import settings
from phturnpike.core.errors import ShapeError, StructureError
from phturnpike.core.numerics import as_matrix, as_vector, dist_to_subspace, range_basis
from phturnpike.models.base import Base
from phturnpike.models.sets import ControlSet, TargetSet
from phturnpike.models.system import PhDaeSystem, PhSystem


@dataclass(frozen=True)
class SolverTolerances(Base):
    qp_tol: float = field(default_factory=lambda: settings.QP_TOL)
    qp_eps: float = field(default_factory=lambda: settings.QP_EPS)
    max_iter: int = field(default_factory=lambda: settings.QP_MAX_ITER)
    feasibility_tol: float = field(default_factory=lambda: settings.FEASIBILITY_TOL)
    rank_tol: float = field(default_factory=lambda: settings.RANK_TOL)
    spectral_tol: float = field(default_factory=lambda: settings.SPECTRAL_TOL)


@dataclass(frozen=True, repr=False, eq=False)
class OcpSpec(Base):
    """
    Minimal-energy-supply problem on [0, T] with N grid intervals.

    For descriptor systems `initial` is w0 = E x(0) and the target constrains
    E x(T); for ODE systems both refer to the state itself.
    """

    system: PhSystem
    horizon: float
    steps: int
    initial: np.ndarray
    target: Optional[TargetSet]
    control_set: ControlSet
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)

    def __post_init__(self) -> None:
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ShapeError("horizon must be positive", {"horizon": self.horizon})
        if int(self.steps) != self.steps or self.steps < 2:
            raise ShapeError("grid needs at least two intervals", {"steps": self.steps})
        object.__setattr__(self, "steps", int(self.steps))
        n, m = self.system.n, self.system.m
        object.__setattr__(self, "initial", as_vector(self.initial, "initial datum", n))
        if self.control_set.dim != m:
            raise ShapeError("control set dimension must equal the input count", {"dim": self.control_set.dim, "m": m})
        if self.target is not None and self.target.dim != n:
            raise ShapeError("target dimension must equal the state dimension")
        if self.is_dae:
            image = range_basis(self.system.E, self.tolerances.rank_tol)
            gap = dist_to_subspace(self.initial, image)
            if gap > 1e-8 * (1.0 + float(np.linalg.norm(self.initial))):
                raise StructureError("initial datum w0 is not in im E", {"distance": gap})
            if self.target is not None and self.target.kind == "point":
                gap = dist_to_subspace(self.target.point, image)
                if gap > 1e-8 * (1.0 + float(np.linalg.norm(self.target.point))):
                    raise StructureError("target point is not in im E", {"distance": gap})

    @property
    def is_dae(self) -> bool:
        return isinstance(self.system, PhDaeSystem)

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def with_horizon(self, horizon: float, steps: Optional[int] = None) -> "OcpSpec":
        return replace(self, horizon=float(horizon), steps=int(steps if steps is not None else self.steps))

    def with_system(self, system: PhSystem, initial, target: Optional[TargetSet]) -> "OcpSpec":
        return replace(self, system=system, initial=initial, target=target)


@dataclass(frozen=True, repr=False, eq=False)
class Trajectory(Base):
    """Grid samples; controls are piecewise constant, one value per interval."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    outputs: np.ndarray

    def __post_init__(self) -> None:
        times = as_vector(self.times, "times")
        N = times.size - 1
        if N < 1:
            raise ShapeError("trajectory needs at least one interval")
        steps = np.diff(times)
        if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(times[-1])):
            raise ShapeError("time grid must be strictly increasing and uniform")
        states = as_matrix(self.states, "states")
        controls = as_matrix(self.controls, "controls")
        outputs = as_matrix(self.outputs, "outputs")
        if states.shape[0] != N + 1 or controls.shape[0] != N or outputs.shape[0] != N + 1:
            raise ShapeError(
                "sample counts do not match the grid",
                {"grid": N + 1, "states": states.shape[0], "controls": controls.shape[0], "outputs": outputs.shape[0]},
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "outputs", outputs)

    @property
    def N(self) -> int:
        return self.times.size - 1

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def controls_on_grid(self) -> np.ndarray:
        """Control at every grid point; the last interval's value is held at t_N"""
        return np.vstack([self.controls, self.controls[-1:]])

    def admissible(self, control_set: ControlSet, tol: float = 1e-8) -> bool:
        return all(control_set.contains(u, tol) for u in self.controls)
