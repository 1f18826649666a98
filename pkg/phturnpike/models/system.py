from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from phturnpike.core.errors import ShapeError
from phturnpike.core.numerics import as_matrix, as_vector, norm2, psd_deficit, symmetric_part
from phturnpike.models.base import Base, Violation

DEFAULT_STRUCTURE_TOL = 1e-10


@dataclass(frozen=True, repr=False, eq=False)
class PhDaeSystem(Base):
    """d/dt Ex = (J - R)Qx + Bu,  y = B^T Q x"""

    E: np.ndarray
    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    B: np.ndarray

    def __post_init__(self) -> None:
        E = as_matrix(self.E, "E")
        n = E.shape[0]
        if E.shape != (n, n):
            raise ShapeError("E must be square", {"shape": list(E.shape)})
        for name in ("J", "R", "Q"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name, (n, n)))
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ShapeError("B row count must match the state dimension", {"rows": B.shape[0], "n": n})
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def A(self) -> np.ndarray:
        return (self.J - self.R) @ self.Q

    @property
    def energy_matrix(self) -> np.ndarray:
        """E^T Q, symmetric PSD for a valid system"""
        return symmetric_part(self.E.T @ self.Q)

    @property
    def dissipation_matrix(self) -> np.ndarray:
        """Q^T R Q"""
        return symmetric_part(self.Q.T @ self.R @ self.Q)


@dataclass(frozen=True, repr=False, eq=False)
class PhOdeSystem(Base):
    """x' = (J - R)Qx + (B - P)u,  y = (B + P)^T Q x + Du"""

    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    P: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        J = as_matrix(self.J, "J")
        n = J.shape[0]
        if J.shape != (n, n):
            raise ShapeError("J must be square", {"shape": list(J.shape)})
        for name in ("R", "Q"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name, (n, n)))
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ShapeError("B row count must match the state dimension", {"rows": B.shape[0], "n": n})
        m = B.shape[1]
        P = np.zeros((n, m)) if self.P is None else as_matrix(self.P, "P", (n, m))
        D = np.zeros((m, m)) if self.D is None else as_matrix(self.D, "D", (m, m))
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def A(self) -> np.ndarray:
        return (self.J - self.R) @ self.Q

    @property
    def B_tilde(self) -> np.ndarray:
        return self.B - self.P

    @property
    def S(self) -> np.ndarray:
        return 0.5 * (self.D + self.D.T)

    @property
    def N_skew(self) -> np.ndarray:
        return 0.5 * (self.D - self.D.T)

    @property
    def W(self) -> np.ndarray:
        """[[QRQ, QP], [P^T Q, S]]"""
        Q, R, P = self.Q, self.R, self.P
        return np.block([[Q @ R @ Q, Q @ P], [P.T @ Q, self.S]])

    @property
    def energy_matrix(self) -> np.ndarray:
        return self.Q

    @property
    def dissipation_matrix(self) -> np.ndarray:
        return self.Q @ self.R @ self.Q

    def as_dae(self) -> PhDaeSystem:
        """Same dynamics with E = I; only meaningful without feed-through"""
        if np.any(self.P) or np.any(self.D):
            raise ShapeError("an ODE with feed-through has no E = I descriptor form")
        return PhDaeSystem(np.eye(self.n), self.J, self.R, self.Q, self.B)


PhSystem = Union[PhDaeSystem, PhOdeSystem]


@dataclass(frozen=True, repr=False, eq=False)
class ValidationResult(Base):
    system: Optional[PhSystem]
    violations: List[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid

    def __repr__(self) -> str:
        names = [v.condition for v in self.violations]
        return f"<ValidationResult(valid={self.valid}, violations={names})>"


def _scale(M: np.ndarray) -> float:
    return max(1.0, norm2(M))


def _check_skew(M: np.ndarray, label: str, tol: float, out: List[Violation]) -> None:
    residual = norm2(M + M.T)
    if residual > tol * _scale(M):
        out.append(Violation(f"{label} not skew-symmetric", residual))


def _check_symmetric_psd(M: np.ndarray, label: str, tol: float, out: List[Violation]) -> None:
    residual = norm2(M - M.T)
    if residual > tol * _scale(M):
        out.append(Violation(f"{label} not symmetric", residual))
    deficit = psd_deficit(M)
    if deficit > tol * _scale(M):
        out.append(Violation(f"{label} not PSD", deficit))


def validate_ph_dae(E, J, R, Q, B, tol: float = DEFAULT_STRUCTURE_TOL) -> ValidationResult:
    """
    Check the pH-DAE sign conditions.

    Shape problems raise ShapeError; violated structural conditions are
    returned as data together with their residual norms.
    """
    system = PhDaeSystem(E, J, R, Q, B)
    violations: List[Violation] = []
    _check_skew(system.J, "J", tol, violations)
    _check_symmetric_psd(system.R, "R", tol, violations)
    _check_symmetric_psd(system.Q.T @ system.E, "Q^T E", tol, violations)
    return ValidationResult(system if not violations else None, violations)


def validate_ph_ode(J, R, Q, B, P=None, D=None, tol: float = DEFAULT_STRUCTURE_TOL) -> ValidationResult:
    system = PhOdeSystem(J, R, Q, B, P, D)
    violations: List[Violation] = []
    _check_skew(system.J, "J", tol, violations)
    _check_symmetric_psd(system.R, "R", tol, violations)
    _check_symmetric_psd(system.Q, "Q", tol, violations)
    deficit = psd_deficit(system.S)
    if deficit > tol * _scale(system.S):
        violations.append(Violation("S not PSD", deficit))
    W = system.W
    deficit = psd_deficit(W)
    if deficit > tol * _scale(W):
        violations.append(Violation("W not PSD", deficit))
    return ValidationResult(system if not violations else None, violations)


def revalidate(system: PhSystem, tol: float = DEFAULT_STRUCTURE_TOL) -> ValidationResult:
    if isinstance(system, PhDaeSystem):
        return validate_ph_dae(system.E, system.J, system.R, system.Q, system.B, tol)
    return validate_ph_ode(system.J, system.R, system.Q, system.B, system.P, system.D, tol)


def output_of(system: PhSystem, x, u) -> np.ndarray:
    """Port output y"""
    x = as_vector(x, "x", system.n)
    u = as_vector(u, "u", system.m)
    if isinstance(system, PhDaeSystem):
        return system.B.T @ (system.Q @ x)
    return (system.B + system.P).T @ (system.Q @ x) + system.D @ u


def hamiltonian(system: PhSystem, x) -> float:
    """Stored energy: x^T E^T Q x / 2 (DAE) or x^T Q x / 2 (ODE)"""
    x = as_vector(x, "x", system.n)
    return 0.5 * float(x @ (system.energy_matrix @ x))


def dissipation_rate(system: PhSystem, x, u) -> float:
    """||W^(1/2)(x;u)||^2, the instantaneous dissipated power"""
    x = as_vector(x, "x", system.n)
    u = as_vector(u, "u", system.m)
    if isinstance(system, PhDaeSystem):
        return float(x @ (system.dissipation_matrix @ x))
    z = np.concatenate([x, u])
    return float(z @ (system.W @ z))
