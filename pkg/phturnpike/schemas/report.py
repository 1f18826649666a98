from datetime import datetime
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from phturnpike import __version__


class ViolationModel(BaseModel):
    condition: str
    residual: float


class ValidationReport(BaseModel):
    kind: str
    n: int
    m: int
    valid: bool
    violations: List[ViolationModel] = Field(default_factory=list)
    tolerance: float


class SolutionSummary(BaseModel):
    """Contents of solution.json"""

    cost: float
    objective: float
    supplied_energy: float
    dissipated_energy: float
    kkt_residual: float
    energy_balance_residual: float
    terminal_error: float
    ball_excess: float
    status: str
    iterations: int
    lambda0: float
    control_set_default: bool
    reduction: Optional[str] = None
    T: float
    N: int


class RunMeta(BaseModel):
    """Contents of meta.json; the only output carrying timestamps"""

    tool: str = "ph-turnpike"
    version: str = __version__
    subcommand: str
    tolerances: Dict[str, float] = Field(default_factory=dict)
    started_at: datetime
    finished_at: Optional[datetime] = None
    elapsed_seconds: Optional[float] = None
    exit_code: int = 0
    error: Optional[str] = None
    error_type: Optional[str] = None
    control_set_default: Optional[bool] = None
    files: List[str] = Field(default_factory=list)
