from .ocp import ControlSetSchema, OcpFile, TargetSchema
from .report import RunMeta, SolutionSummary, ValidationReport, ViolationModel
from .system import SystemFile

__all__ = [
    "ControlSetSchema",
    "OcpFile",
    "RunMeta",
    "SolutionSummary",
    "SystemFile",
    "TargetSchema",
    "ValidationReport",
    "ViolationModel",
]
