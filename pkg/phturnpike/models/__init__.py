from .base import Base, Violation
from .ocp import OcpSpec, SolverTolerances, Trajectory
from .sets import ControlSet, TargetSet
from .system import (
    PhDaeSystem,
    PhOdeSystem,
    PhSystem,
    ValidationResult,
    dissipation_rate,
    hamiltonian,
    output_of,
    revalidate,
    validate_ph_dae,
    validate_ph_ode,
)

__all__ = [
    "Base",
    "Violation",
    "OcpSpec",
    "SolverTolerances",
    "Trajectory",
    "ControlSet",
    "TargetSet",
    "PhDaeSystem",
    "PhOdeSystem",
    "PhSystem",
    "ValidationResult",
    "dissipation_rate",
    "hamiltonian",
    "output_of",
    "revalidate",
    "validate_ph_dae",
    "validate_ph_ode",
]
