"""
Structure-preserving DAE -> ODE reductions and the conservative/dissipative
split of a pH-ODE.

Two reductions share one interface:

* ``BeattieReduction`` transforms an index <= 1 pH-DAE with invertible
  (U, V) into block form and eliminates the algebraic block, producing a
  pH-ODE with feed-through.
* ``ConstraintElimination`` works from the quasi-Weierstrass form and also
  covers index-2 systems whose input never reaches the nilpotent chain.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import structlog

from phturnpike.core.config import settings
from phturnpike.core.errors import IndexTooHighError, IrregularPencilError, ReductionError, ShapeError, StructureError
from phturnpike.core.numerics import (
    SubspaceBasis,
    as_matrix,
    as_vector,
    classify_spectrum,
    norm2,
    nullspace,
    ordered_block_split,
    orthogonal_complement,
    range_basis,
    rcond,
    skew_part,
    subspace_sum,
    symmetric_part,
)
from phturnpike.models.base import Base
from phturnpike.models.ocp import Trajectory
from phturnpike.models.sets import TargetSet
from phturnpike.models.system import PhDaeSystem, PhOdeSystem, validate_ph_ode
from phturnpike.services.pencil import dh_index_le1_check, dh_regularity_check, quasi_weierstrass

logger = structlog.get_logger(__name__)

BLOCK_TOL = 1e-9


def _residual(M: np.ndarray, scale: float = 1.0) -> float:
    return norm2(M) / max(1.0, scale)


def _require_invertible(M: np.ndarray, label: str) -> None:
    if M.size and rcond(M) < settings.INVERTIBILITY_RCOND:
        raise ReductionError(f"{label} is numerically singular", {"rcond": rcond(M)})


class DaeReduction(ABC):
    """A pH-ODE equivalent to a pH-DAE together with the maps between them"""

    method: str
    source: PhDaeSystem
    reduced: PhOdeSystem

    @property
    def n1(self) -> int:
        return self.reduced.n

    @abstractmethod
    def initial(self, w0) -> np.ndarray:
        """Reduced initial state for the DAE datum E x(0) = w0"""

    @abstractmethod
    def energy_map(self) -> np.ndarray:
        """M with E x = M z on the solution manifold"""

    @abstractmethod
    def lift_state(self, z, u) -> np.ndarray:
        """DAE state for reduced state z and input u"""

    @abstractmethod
    def transform_payload(self) -> Dict[str, Any]:
        """Data needed to lift reduced solutions later"""

    def target(self, target: Optional[TargetSet]) -> Optional[TargetSet]:
        """The terminal set on E x(T) expressed in reduced coordinates"""
        if target is None:
            return None
        if target.kind == "point":
            return target.pulled_back(self.energy_map(), self.initial(target.point))
        return target.pulled_back(self.energy_map())

    def lift(self, trajectory: Trajectory) -> Trajectory:
        """Reduced trajectory -> DAE trajectory on the same grid"""
        if trajectory.states.shape[1] != self.n1:
            raise ShapeError("reduced trajectory has the wrong state dimension")
        controls = trajectory.controls_on_grid
        states = np.vstack([self.lift_state(z, u) for z, u in zip(trajectory.states, controls)])
        outputs = states @ (self.source.Q.T @ self.source.B)
        return Trajectory(trajectory.times, states, trajectory.controls, outputs)

    @property
    def W_hat(self) -> np.ndarray:
        return self.reduced.W

    def dissipation_identity_residual(self, z, u) -> float:
        """|x^T Q^T R Q x - (z; u)^T W (z; u)| for the lifted x"""
        z = as_vector(z, "z", self.n1)
        u = as_vector(u, "u", self.source.m)
        x = self.lift_state(z, u)
        lhs = float(x @ (self.source.dissipation_matrix @ x))
        zu = np.concatenate([z, u])
        return abs(lhs - float(zu @ (self.W_hat @ zu)))


@dataclass(frozen=True, repr=False, eq=False)
class BeattieReduction(Base, DaeReduction):
    """
    U^T E V = diag(I, 0), U^-1 Q V = diag(Q11, Q22) and L = U^T (J - R) U with
    L12 = 0. z = V^-1 x splits into the dynamic z1 and the algebraic z2.
    """

    source: PhDaeSystem
    U: np.ndarray
    V: np.ndarray
    blocks: Dict[str, np.ndarray]
    reduced: PhOdeSystem
    method: str = "beattie"
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def n1(self) -> int:
        return self.blocks["Q11"].shape[0]

    @property
    def n2(self) -> int:
        return self.blocks["Q22"].shape[0]

    @property
    def B_hat(self) -> np.ndarray:
        return self.reduced.B

    @property
    def P_hat(self) -> np.ndarray:
        return self.reduced.P

    @property
    def S_hat(self) -> np.ndarray:
        return self.reduced.S

    @property
    def N_hat(self) -> np.ndarray:
        return self.reduced.N_skew

    def recover_z2(self, z1, u) -> np.ndarray:
        """z2 = -Q22^-1 L22^-1 (L21 Q11 z1 + B2 u)"""
        z1 = as_vector(z1, "z1", self.n1)
        u = as_vector(u, "u", self.source.m)
        if self.n2 == 0:
            return np.zeros(0)
        b = self.blocks
        rhs = b["L21"] @ (b["Q11"] @ z1) + b["B2"] @ u
        return -np.linalg.solve(b["Q22"], np.linalg.solve(b["L22"], rhs))

    def lift_state(self, z, u) -> np.ndarray:
        z = as_vector(z, "z1", self.n1)
        return self.V @ np.concatenate([z, self.recover_z2(z, u)])

    def energy_map(self) -> np.ndarray:
        return np.linalg.inv(self.U).T[:, : self.n1]

    def initial(self, w0) -> np.ndarray:
        w0 = as_vector(w0, "w0", self.source.n)
        return (self.U.T @ w0)[: self.n1]

    def algebraic_residual(self, z1, z2, u) -> float:
        """Second block row of the transformed DAE"""
        b = self.blocks
        res = b["L21"] @ (b["Q11"] @ z1) + b["L22"] @ (b["Q22"] @ z2) + b["B2"] @ u
        return float(np.linalg.norm(res))

    def transform_payload(self) -> Dict[str, Any]:
        return {"method": self.method, "U": self.U.tolist(), "V": self.V.tolist(), "n1": self.n1}


@dataclass(frozen=True, repr=False, eq=False)
class ConstraintElimination(Base, DaeReduction):
    """
    x = V xi - W F_W u on the solution manifold; xi follows the ODE part of
    the quasi-Weierstrass form and carries the energy xi^T Q xi / 2.
    """

    source: PhDaeSystem
    V: np.ndarray
    W: np.ndarray
    F_W: np.ndarray
    index: int
    reduced: PhOdeSystem
    method: str = "constraint_elimination"
    checks: Dict[str, float] = field(default_factory=dict)

    @property
    def input_lift(self) -> np.ndarray:
        return -self.W @ self.F_W

    @property
    def lift_matrix(self) -> np.ndarray:
        """L with x = L (xi; u)"""
        return np.hstack([self.V, self.input_lift])

    def lift_state(self, z, u) -> np.ndarray:
        z = as_vector(z, "xi", self.n1)
        u = as_vector(u, "u", self.source.m)
        return self.V @ z + self.input_lift @ u

    def energy_map(self) -> np.ndarray:
        return self.source.E @ self.V

    def initial(self, w0) -> np.ndarray:
        w0 = as_vector(w0, "w0", self.source.n)
        EV = self.energy_map()
        xi, *_ = np.linalg.lstsq(EV, w0, rcond=None)
        gap = float(np.linalg.norm(EV @ xi - w0))
        if gap > 1e-8 * (1.0 + float(np.linalg.norm(w0))):
            raise StructureError("datum is not reachable by E on the solution manifold", {"distance": gap})
        return xi

    def transform_payload(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "V": self.V.tolist(),
            "input_lift": self.input_lift.tolist(),
            "n1": self.n1,
            "index": self.index,
        }


def _beattie_frames(system: PhDaeSystem, tol: float):
    E, Q = system.E, system.Q
    n = system.n
    V2 = nullspace(E, tol).basis
    n2 = V2.shape[1]
    n1 = n - n2
    if n1 == 0:
        raise ReductionError("E = 0 leaves no dynamic part to reduce")
    if n2 == 0:
        V1 = np.eye(n)
        U1 = np.linalg.inv(E).T
        return U1, np.zeros((n, 0)), V1, V2

    V1 = range_basis(E.T, tol).basis
    U2 = Q @ V2
    if range_basis(U2, tol).dim != n2:
        raise ReductionError("Q does not map ker E injectively; index exceeds one")
    image = range_basis(Q @ V1, tol)
    complement = orthogonal_complement(subspace_sum([image, range_basis(U2, tol)], tol), tol)
    U1 = np.hstack([image.basis, complement.basis])
    if U1.shape[1] != n1:
        raise ReductionError(
            "cannot complete U1 to a complement of Q ker E", {"have": U1.shape[1], "need": n1}
        )
    K = U1.T @ E @ V1
    _require_invertible(K, "U1^T E V1")
    U1 = U1 @ np.linalg.inv(K).T
    return U1, U2, V1, V2


def _beattie_blocks(system: PhDaeSystem, U: np.ndarray, V: np.ndarray, n1: int) -> Dict[str, np.ndarray]:
    Jt = U.T @ system.J @ U
    Rt = U.T @ system.R @ U
    Qt = np.linalg.solve(U, system.Q @ V)
    Bt = U.T @ system.B
    Lt = Jt - Rt
    s1, s2 = slice(0, n1), slice(n1, None)
    blocks = {"Qt": Qt, "Jt": Jt, "Rt": Rt, "Lt": Lt}
    for name, M in (("J", Jt), ("R", Rt), ("L", Lt)):
        blocks[f"{name}11"], blocks[f"{name}12"] = M[s1, s1], M[s1, s2]
        blocks[f"{name}21"], blocks[f"{name}22"] = M[s2, s1], M[s2, s2]
    blocks["Q11"], blocks["Q22"] = symmetric_part(Qt[s1, s1]), Qt[s2, s2]
    blocks["B1"], blocks["B2"] = Bt[s1], Bt[s2]
    return blocks


def beattie_reduce(system: PhDaeSystem, tol: float = None) -> BeattieReduction:
    """
    Reduce an index <= 1 pH-DAE to a pH-ODE with feed-through.

    The frame (U, V) is built constructively; a final shear of U1 and V1
    removes L12 so that J12 = R12. Every block identity is verified.
    """
    tol = tol or settings.RANK_TOL
    if not dh_regularity_check(system, tol):
        raise IrregularPencilError("ker E, ker RQ and ker Q^T J Q intersect; pencil is singular")
    if not dh_index_le1_check(system, tol):
        raise IndexTooHighError(2, "pencil index exceeds one; use constraint elimination")

    U1, U2, V1, V2 = _beattie_frames(system, tol)
    n1 = U1.shape[1]
    U, V = np.hstack([U1, U2]), np.hstack([V1, V2])
    _require_invertible(U, "U")
    _require_invertible(V, "V")
    blocks = _beattie_blocks(system, U, V, n1)

    if U2.shape[1]:
        _require_invertible(blocks["L22"], "L22")
        shear = (blocks["L12"] @ np.linalg.inv(blocks["L22"])).T
        U1 = U1 - U2 @ shear
        V1 = V1 - V2 @ shear @ blocks["Q11"]
        U, V = np.hstack([U1, U2]), np.hstack([V1, V2])
        blocks = _beattie_blocks(system, U, V, n1)
        _require_invertible(blocks["L22"], "L22")
        _require_invertible(blocks["Q22"], "Q22")

    scale = max(norm2(system.E), norm2(system.Q), norm2(system.J) + norm2(system.R))
    EV = U.T @ system.E @ V
    target = np.zeros_like(EV)
    target[:n1, :n1] = np.eye(n1)
    Qt = blocks["Qt"]
    checks = {
        "UEV": _residual(EV - target, scale),
        "UQV_offdiag": _residual(Qt[:n1, n1:], scale) + _residual(Qt[n1:, :n1], scale),
        "J_skew": _residual(blocks["Jt"] + blocks["Jt"].T, scale),
        "R12_J12": _residual(blocks["R12"] - blocks["J12"], scale),
    }
    failed = {k: v for k, v in checks.items() if v > BLOCK_TOL * max(1.0, np.linalg.cond(U))}
    if failed:
        raise ReductionError("Beattie block identities violated", failed)

    b = blocks
    if U2.shape[1]:
        L22_inv_T_B2 = np.linalg.solve(b["L22"].T, b["B2"])
        L22_inv_B2 = np.linalg.solve(b["L22"], b["B2"])
        P_hat = -0.5 * b["L21"].T @ L22_inv_T_B2
        B_hat = b["B1"] + P_hat
        S_hat = -0.5 * b["B2"].T @ (L22_inv_B2 + L22_inv_T_B2)
        N_hat = -0.5 * b["B2"].T @ (L22_inv_B2 - L22_inv_T_B2)
    else:
        m = system.m
        P_hat, B_hat = np.zeros((n1, m)), b["B1"]
        S_hat = N_hat = np.zeros((m, m))
    validation = validate_ph_ode(
        skew_part(b["J11"]), symmetric_part(b["R11"]), b["Q11"], B_hat, P_hat, S_hat + N_hat, tol=1e-9
    )
    if not validation.valid:
        raise ReductionError(
            "reduced system is not port-Hamiltonian",
            {v.condition: v.residual for v in validation.violations},
        )

    reduction = BeattieReduction(system, U, V, blocks, validation.system, checks=checks)
    logger.info("beattie reduction", n1=n1, n2=reduction.n2, cond_U=float(np.linalg.cond(U)))
    return reduction


def eliminate_constraints(system: PhDaeSystem, tol: float = None) -> ConstraintElimination:
    """
    pH-ODE for the ODE part of a regular pencil of index <= 2.

    The input must not excite the nilpotent chain. The energy weight is
    V^T E^T Q V and the feed-through comes from the algebraic response
    x_W = -W F_W u.
    """
    tol = tol or settings.RANK_TOL
    qw = quasi_weierstrass(system.E, system.A, tol)
    coupling = qw.nilpotent_coupling(system.B)
    if qw.index >= 3 or coupling > 1e-8 * max(1.0, norm2(system.B)):
        raise IndexTooHighError(qw.index, f"index-{qw.index} pencil with input-driven constraints cannot be reduced")
    if qw.n1 == 0:
        raise ReductionError("pencil has no dynamic part")

    E, Q, B = system.E, system.Q, system.B
    Vb, Wb = qw.V.basis, qw.W.basis
    F_V, F_W = qw.input_split(B)
    C = qw.C
    Qr = symmetric_part(Vb.T @ E.T @ Q @ Vb)
    n1 = qw.n1

    kernel = nullspace(Qr, tol)
    image = orthogonal_complement(kernel, tol)
    O = np.hstack([image.basis, kernel.basis])
    r = image.dim
    C_hat = O.T @ C @ O
    q = image.basis.T @ Qr @ image.basis
    scale = max(1.0, norm2(C))
    if kernel.dim and _residual(C @ kernel.basis, scale) > 1e-8:
        raise ReductionError("ODE part does not vanish on the kernel of the energy weight")
    L_hat = np.zeros((n1, n1))
    if r:
        L_hat[:, :r] = C_hat[:, :r] @ np.linalg.inv(q)
        L_hat[:r, r:] = -L_hat[r:, :r].T
    M = O @ L_hat @ O.T
    J_red, R_red = skew_part(M), -symmetric_part(M)

    G = Vb.T @ Q.T @ B
    rhs = 0.5 * (G - Qr @ F_V)
    P_red = np.linalg.pinv(Qr) @ rhs
    if _residual(Qr @ P_red - rhs, max(1.0, norm2(G))) > 1e-8:
        raise ReductionError("output map is not compatible with the energy weight")
    B_red = F_V + P_red
    input_lift = -Wb @ F_W
    D_red = B.T @ Q @ input_lift

    validation = validate_ph_ode(J_red, R_red, Qr, B_red, P_red, D_red, tol=1e-9)
    if not validation.valid:
        raise ReductionError(
            "eliminated system is not port-Hamiltonian",
            {v.condition: v.residual for v in validation.violations},
        )
    reduced = validation.system
    L = np.hstack([Vb, input_lift])
    W_lifted = symmetric_part(L.T @ system.dissipation_matrix @ L)
    checks = {
        "generator": _residual(reduced.A - C, scale),
        "dissipation": _residual(W_lifted - reduced.W, max(1.0, norm2(W_lifted))),
    }
    if any(v > 1e-8 for v in checks.values()):
        raise ReductionError("eliminated system does not reproduce the DAE", checks)

    logger.info("constraint elimination", index=qw.index, n1=n1, n2=qw.n2)
    return ConstraintElimination(system, Vb, Wb, F_W, qw.index, reduced, checks=checks)


def reduce_dae(system: PhDaeSystem, tol: float = None) -> DaeReduction:
    """Beattie form when the index-one certificate holds, constraint elimination otherwise"""
    tol = tol or settings.RANK_TOL
    if not dh_regularity_check(system, tol):
        raise IrregularPencilError("pencil sE - (J - R)Q is singular")
    if dh_index_le1_check(system, tol):
        return beattie_reduce(system, tol)
    return eliminate_constraints(system, tol)


def recover_z2(reduction: BeattieReduction, z1, u) -> np.ndarray:
    return reduction.recover_z2(z1, u)


def lift_solution(reduction: DaeReduction, trajectory: Trajectory) -> Trajectory:
    return reduction.lift(trajectory)


@dataclass(frozen=True, repr=False, eq=False)
class SpectralSplit(Base):
    """
    R^n = N1 + N2 with N1 the imaginary-axis and N2 the Hurwitz invariant
    subspace of A = (J - R)Q. A1 is A restricted to N1, in the N1 basis;
    on N2 the pH triple (J2, R2, Q2) is kept.
    """

    N1: SubspaceBasis
    N2: SubspaceBasis
    A1: np.ndarray
    Q1: np.ndarray
    J2: np.ndarray
    R2: np.ndarray
    Q2: np.ndarray
    flagged: List[complex] = field(default_factory=list)
    checks: Dict[str, Any] = field(default_factory=dict)

    @property
    def A2(self) -> np.ndarray:
        return (self.J2 - self.R2) @ self.Q2

    @property
    def stability_margin(self) -> float:
        """-max Re sigma(A2), positive for a Hurwitz block"""
        if self.N2.dim == 0:
            return float("inf")
        return float(-np.max(np.linalg.eigvals(self.A2).real))


def spectral_split(J, R, Q, spectral_tol: float = None, rank_tol: float = None) -> SpectralSplit:
    J = as_matrix(J, "J")
    R = as_matrix(R, "R", J.shape)
    Q = as_matrix(Q, "Q", J.shape)
    spectral_tol = spectral_tol or settings.SPECTRAL_TOL
    rank_tol = rank_tol or settings.RANK_TOL
    A = (J - R) @ Q
    spectrum = classify_spectrum(A, spectral_tol, rank_tol)
    flagged = [complex(z) for z in spectrum.marginal]
    for z in flagged:
        logger.warning("axis boundary eigenvalue", value=str(z))

    split = ordered_block_split(A, spectrum.on_axis)
    k = split.M1.shape[0]
    N1 = range_basis(split.S[:, :k], rank_tol) if k else SubspaceBasis.zero(A.shape[0])
    N2 = range_basis(split.S[:, k:], rank_tol) if k < A.shape[0] else SubspaceBasis.zero(A.shape[0])
    if N1.dim + N2.dim != A.shape[0]:
        raise ReductionError("invariant subspaces do not split the state space", {"dim_N1": N1.dim, "dim_N2": N2.dim})

    B1, B2 = N1.basis, N2.basis
    A1 = B1.T @ A @ B1
    Q1 = symmetric_part(B1.T @ Q @ B1)
    Q2 = symmetric_part(B2.T @ Q @ B2)
    if N2.dim:
        if rcond(Q2) < settings.INVERTIBILITY_RCOND:
            raise ReductionError("energy weight degenerates on the Hurwitz subspace")
        M2 = (B2.T @ A @ B2) @ np.linalg.inv(Q2)
        J2, R2 = skew_part(M2), -symmetric_part(M2)
    else:
        J2 = R2 = np.zeros((0, 0))

    kernel_Q = nullspace(Q, rank_tol)
    kernel_RQ = nullspace(R @ Q, rank_tol)
    checks = {
        "q_orthogonality": norm2(B1.T @ Q @ B2) if N1.dim and N2.dim else 0.0,
        "kerQ_in_N1": N1.contains_subspace(kernel_Q),
        "N1_in_kerRQ": kernel_RQ.contains_subspace(N1),
        "invariance": max(
            norm2(A @ B1 - B1 @ A1) if N1.dim else 0.0,
            norm2(A @ B2 - B2 @ (B2.T @ A @ B2)) if N2.dim else 0.0,
        ),
    }
    if checks["q_orthogonality"] > 1e-8 * max(1.0, norm2(Q)):
        logger.warning("split is not Q-orthogonal", residual=checks["q_orthogonality"])
    logger.debug("spectral split", dim_N1=N1.dim, dim_N2=N2.dim, flagged=len(flagged))
    return SpectralSplit(N1, N2, A1, Q1, J2, R2, Q2, flagged, checks)


def dissipative_input(split: SpectralSplit, B_tilde: np.ndarray) -> np.ndarray:
    """Coordinates of B_tilde along N2 in the N1 + N2 decomposition"""
    basis = np.hstack([split.N1.basis, split.N2.basis])
    coords = np.linalg.solve(basis, B_tilde)
    return split.N2.basis @ coords[split.N1.dim :]


