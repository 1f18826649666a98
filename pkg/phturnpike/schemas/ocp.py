from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from phturnpike.core.config import settings
from phturnpike.models.ocp import OcpSpec, SolverTolerances
from phturnpike.models.sets import ControlSet, TargetSet
from phturnpike.schemas.system import Matrix, SystemFile


class TargetSchema(BaseModel):
    """{"point": [...]} or {"G": [[...]], "l": [...], "u": [...]}"""

    model_config = ConfigDict(extra="forbid")

    point: Optional[List[float]] = None
    G: Optional[Matrix] = None
    l: Optional[List[float]] = None
    u: Optional[List[float]] = None

    @model_validator(mode="after")
    def one_variant(self) -> "TargetSchema":
        box = (self.G, self.l, self.u)
        if self.point is not None and any(v is not None for v in box):
            raise ValueError("target is either a point or an affine box, not both")
        if self.point is None and any(v is None for v in box):
            raise ValueError("affine box target needs G, l and u")
        return self

    def to_target(self) -> TargetSet:
        if self.point is not None:
            return TargetSet.singleton(self.point)
        return TargetSet.affine_box(self.G, self.l, self.u)


class BoxSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lower: List[float]
    upper: List[float]


class BallSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(gt=0)


class ControlSetSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    box: Optional[BoxSchema] = None
    ball: Optional[BallSchema] = None

    @model_validator(mode="after")
    def one_variant(self) -> "ControlSetSchema":
        if (self.box is None) == (self.ball is None):
            raise ValueError("control_set needs exactly one of box or ball")
        return self

    def to_control_set(self, m: int) -> ControlSet:
        if self.box is not None:
            return ControlSet.box(self.box.lower, self.box.upper)
        return ControlSet.ball(self.ball.radius, m)


class OcpFile(SystemFile):
    """System file plus horizon, grid, initial datum, target and control set"""

    T: float = Field(gt=0)
    N: int = Field(ge=2)
    x0: Optional[List[float]] = None
    w0: Optional[List[float]] = None
    target: Optional[TargetSchema] = None
    control_set: Optional[ControlSetSchema] = None

    @model_validator(mode="after")
    def initial_datum(self) -> "OcpFile":
        if (self.x0 is None) == (self.w0 is None):
            raise ValueError("give exactly one of x0 or w0")
        if self.is_dae and self.x0 is not None:
            raise ValueError("descriptor systems take w0 = E x(0), not x0")
        if not self.is_dae and self.w0 is not None:
            raise ValueError("ODE systems take x0, not w0")
        return self

    def to_spec(self, tolerances: Optional[SolverTolerances] = None) -> OcpSpec:
        system = self.to_system()
        if self.control_set is None:
            control_set = ControlSet.default_box(system.m, settings.DEFAULT_CONTROL_BOUND)
        else:
            control_set = self.control_set.to_control_set(system.m)
        initial = self.w0 if self.is_dae else self.x0
        target = self.target.to_target() if self.target is not None else None
        return OcpSpec(
            system,
            self.T,
            self.N,
            initial,
            target,
            control_set,
            tolerances or SolverTolerances(),
        )
