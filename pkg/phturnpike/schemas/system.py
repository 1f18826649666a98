from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationInfo, field_validator, model_validator

from phturnpike.core.config import settings
from phturnpike.core.errors import StructureError
from phturnpike.models.system import PhSystem, ValidationResult, validate_ph_dae, validate_ph_ode

Matrix = List[List[float]]


def _finite_matrix(value: Matrix, name: str) -> Matrix:
    if not value or not value[0]:
        raise ValueError(f"{name} must be a non-empty nested array")
    width = len(value[0])
    if any(len(row) != width for row in value):
        raise ValueError(f"{name} rows must all have the same length")
    if not np.all(np.isfinite(np.array(value, dtype=float))):
        raise ValueError(f"{name} entries must be finite")
    return value


class SystemFile(BaseModel):
    """
    JSON system file.

    With "E" and without feed-through the file describes a pH-DAE; without
    "E", or with "P"/"D", a pH-ODE. A flat "B" is read as a single column.
    """

    model_config = ConfigDict(extra="forbid")

    E: Optional[Matrix] = None
    J: Matrix
    R: Matrix
    Q: Matrix
    B: Union[Matrix, List[float]]
    P: Optional[Union[Matrix, List[float]]] = None
    D: Optional[Union[Matrix, List[float]]] = None

    @field_validator("E", "J", "R", "Q")
    @classmethod
    def matrix_shape(cls, value: Optional[Matrix], info: ValidationInfo) -> Optional[Matrix]:
        if value is None:
            return value
        return _finite_matrix(value, info.field_name)

    @field_validator("B", "P", "D", mode="before")
    @classmethod
    def column_from_vector(cls, value, info: ValidationInfo):
        if isinstance(value, list) and value and not isinstance(value[0], list):
            if info.field_name == "D":
                return [value]
            return [[v] for v in value]
        return value

    @model_validator(mode="after")
    def feed_through_needs_ode(self) -> "SystemFile":
        if self.E is not None and (self.P is not None or self.D is not None):
            if not np.allclose(np.array(self.E, dtype=float), np.eye(len(self.E))):
                raise ValueError("feed-through (P, D) is only allowed for ODE systems (no E or E = I)")
        for name in ("B", "P", "D"):
            value = getattr(self, name)
            if value is not None:
                _finite_matrix(value, name)
        return self

    @property
    def is_dae(self) -> bool:
        return self.E is not None and self.P is None and self.D is None

    def validate_system(self, tol: Optional[float] = None) -> ValidationResult:
        tol = tol or settings.STRUCTURE_TOL
        if self.is_dae:
            return validate_ph_dae(self.E, self.J, self.R, self.Q, self.B, tol)
        return validate_ph_ode(self.J, self.R, self.Q, self.B, self.P, self.D, tol)

    def to_system(self, tol: Optional[float] = None) -> PhSystem:
        """Validated domain system; raises StructureError listing the violations"""
        result = self.validate_system(tol)
        if not result.valid:
            raise StructureError(
                "system violates the port-Hamiltonian conditions",
                {"violations": [v.to_dict() for v in result.violations]},
            )
        return result.system
