"""
Matrix pencil analysis for sE - A.

Wong sequences give the quasi-Weierstrass form S(C + I), S(I + N) from which
regularity, the differentiation index and the ODE part are read. The
dissipative-Hamiltonian certifiers follow the spectral characterisation: the
ODE part must lie in the closed left half plane, nonzero imaginary
eigenvalues must be semi-simple and zero has chains of length at most two.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
import structlog

from phturnpike.core.config import settings
from phturnpike.core.errors import (
    IndexTooHighError,
    IrregularPencilError,
    NumericalError,
    ShapeError,
    SingularShiftError,
    StructureError,
)
from phturnpike.core.numerics import (
    SpectrumClassification,
    SubspaceBasis,
    as_matrix,
    as_vector,
    classify_spectrum,
    dist_to_subspace,
    norm2,
    nullspace,
    ordered_block_split,
    psd_deficit,
    range_basis,
    rank,
    rcond,
    real_embedding,
    require_square,
    rk4_step_matrices,
    skew_part,
    subspace_intersect,
    symmetric_part,
)
from phturnpike.models.base import Base
from phturnpike.models.ocp import Trajectory
from phturnpike.models.system import PhDaeSystem

logger = structlog.get_logger(__name__)

SINGULAR_SHIFT_RCOND = 1e-12
ROUNDOFF_FACTOR = 100.0


@dataclass(frozen=True, repr=False, eq=False)
class QuasiWeierstrass(Base):
    """
    ODE/nilpotent split of a regular pencil.

    With T_b = [V W] the bases of the two Wong limits, E T_b = S T_b (I + N)
    and A T_b = S T_b (C + I) block-diagonally.
    """

    S: np.ndarray
    C: np.ndarray
    N: np.ndarray
    V: SubspaceBasis
    W: SubspaceBasis
    index: int
    mu: float
    P_V: np.ndarray
    P_W: np.ndarray

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def n1(self) -> int:
        return self.V.dim

    @property
    def n2(self) -> int:
        return self.W.dim

    @property
    def basis(self) -> np.ndarray:
        return np.hstack([self.V.basis, self.W.basis])

    @property
    def coordinate_map(self) -> np.ndarray:
        """S [V W]: the matrix that absorbs the left transformation"""
        return self.S @ self.basis

    def input_split(self, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates (F_V, F_W) of S^-1 B in the V/W bases"""
        F = np.linalg.solve(self.coordinate_map, B)
        return F[: self.n1], F[self.n1 :]

    def nilpotent_coupling(self, B: np.ndarray) -> float:
        """||N F_W||, zero when the input never needs differentiating"""
        if self.n2 == 0:
            return 0.0
        _, F_W = self.input_split(B)
        return norm2(self.N @ F_W)

    def reconstruction_residual(self, E: np.ndarray, A: np.ndarray) -> float:
        """Relative residual of S(C + I) = A and S(I + N) = E"""
        Tb = self.basis
        Tb_inv = np.linalg.inv(Tb)
        Sh = self.coordinate_map
        k = self.n1
        CI = scipy.linalg.block_diag(self.C, np.eye(self.n2))
        IN = scipy.linalg.block_diag(np.eye(k), self.N)
        res = norm2(Sh @ CI @ Tb_inv - A) + norm2(Sh @ IN @ Tb_inv - E)
        return res / max(norm2(A) + norm2(E), 1e-300)

    def consistent_initial(self, E: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, float]:
        """xi with E V xi = w in the least-squares sense, plus the residual"""
        EV = E @ self.V.basis
        if self.n1 == 0:
            return np.zeros(0), float(np.linalg.norm(w))
        xi, *_ = np.linalg.lstsq(EV, w, rcond=None)
        return xi, float(np.linalg.norm(EV @ xi - w))


@dataclass(frozen=True, repr=False, eq=False)
class RegularityResult(Base):
    regular: bool
    mu: Optional[float]
    shifts_tried: int


@dataclass(frozen=True, repr=False, eq=False)
class DhCertificate(Base):
    is_dh: bool
    conditions: Dict[str, bool]
    violated: Optional[str] = None
    J: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    reconstruction_error: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.is_dh


def candidate_shifts(E: np.ndarray, A: np.ndarray) -> List[float]:
    """n + 1 deterministic real shifts; det(sE - A) has degree <= n"""
    n = E.shape[0]
    nE, nA = norm2(E), norm2(A)
    rng = np.random.default_rng(0)
    return [1.0 + nA / max(nE, 1.0)] + rng.uniform(1.0, 2.0 + nA + nE, size=n).tolist()


def _check_pencil(E, A) -> Tuple[np.ndarray, np.ndarray]:
    E = as_matrix(E, "E")
    A = as_matrix(A, "A")
    n = require_square(E, "E")
    if A.shape != (n, n):
        raise ShapeError("E and A must be square of equal size", {"E": list(E.shape), "A": list(A.shape)})
    return E, A


def wong_sequences(E, A, mu: float, tol: float = None) -> QuasiWeierstrass:
    """Quasi-Weierstrass form from the Wong limits of T = (mu E - A)^-1 E"""
    tol = tol or settings.RANK_TOL
    E, A = _check_pencil(E, A)
    n = E.shape[0]
    M = mu * E - A
    if rcond(M) < SINGULAR_SHIFT_RCOND:
        raise SingularShiftError("mu E - A is singular at this shift", {"mu": mu})
    T = np.linalg.solve(M, E)

    # ascent of T: first k with rank T^k = rank T^(k+1)
    # roundoff in T^k is of size n eps |T|^k
    noise = ROUNDOFF_FACTOR * n * np.finfo(float).eps
    growth = norm2(T) if n else 0.0
    power = np.eye(n)
    current = n
    index = n
    for k in range(n + 1):
        following = power @ T
        r_next = rank(following, tol, noise * growth ** (k + 1)) if n else 0
        if r_next == current:
            index = k
            break
        power, current = following, r_next

    if index == 0:
        V, W = SubspaceBasis.full(n), SubspaceBasis.zero(n)
    else:
        floor = noise * growth**index
        V, W = range_basis(power, tol, floor), nullspace(power, tol, floor)
    if V.dim + W.dim != n:
        raise NumericalError("Wong limits do not split the state space", {"dim_V": V.dim, "dim_W": W.dim})
    Tb = np.hstack([V.basis, W.basis])
    if rcond(Tb) < settings.INVERTIBILITY_RCOND:
        raise NumericalError("Wong limits are numerically dependent", {"rcond": rcond(Tb)})

    n1, n2 = V.dim, W.dim
    T_V = V.basis.T @ T @ V.basis
    T_W = W.basis.T @ T @ W.basis
    C = mu * np.eye(n1) - np.linalg.inv(T_V) if n1 else np.zeros((0, 0))
    N = T_W @ np.linalg.inv(mu * T_W - np.eye(n2)) if n2 else np.zeros((0, 0))
    Tb_inv = np.linalg.inv(Tb)
    P_V = V.basis @ Tb_inv[:n1]
    P_W = W.basis @ Tb_inv[n1:]
    S = E @ P_V + A @ P_W

    if n2 and index >= 1:
        scale = max(1.0, norm2(N))
        if norm2(np.linalg.matrix_power(N, index)) > 1e-8 * scale ** index:
            raise NumericalError("nilpotent part does not vanish at the computed index", {"index": index})

    return QuasiWeierstrass(S=S, C=C, N=N, V=V, W=W, index=index, mu=float(mu), P_V=P_V, P_W=P_W)


def is_regular(E, A) -> RegularityResult:
    E, A = _check_pencil(E, A)
    shifts = candidate_shifts(E, A)
    for count, mu in enumerate(shifts, start=1):
        if rcond(mu * E - A) >= SINGULAR_SHIFT_RCOND:
            return RegularityResult(True, float(mu), count)
    return RegularityResult(False, None, len(shifts))


def _admissible_shifts(E: np.ndarray, A: np.ndarray) -> List[float]:
    return [mu for mu in candidate_shifts(E, A) if rcond(mu * E - A) >= SINGULAR_SHIFT_RCOND]


def quasi_weierstrass(E, A, tol: float = None) -> QuasiWeierstrass:
    E, A = _check_pencil(E, A)
    shifts = _admissible_shifts(E, A)
    if not shifts:
        raise IrregularPencilError("pencil sE - A is singular", {"shifts_tried": len(candidate_shifts(E, A))})
    qw = wong_sequences(E, A, shifts[0], tol)
    logger.debug("quasi-Weierstrass form", index=qw.index, n1=qw.n1, n2=qw.n2, mu=qw.mu)
    return qw


def pencil_index(E, A, tol: float = None) -> int:
    """Differentiation index, checked at two admissible shifts"""
    E, A = _check_pencil(E, A)
    shifts = _admissible_shifts(E, A)
    if not shifts:
        raise IrregularPencilError("pencil sE - A is singular")
    first = wong_sequences(E, A, shifts[0], tol).index
    if len(shifts) > 1:
        second = wong_sequences(E, A, shifts[1], tol).index
        if second != first:
            raise NumericalError(
                "index depends on the probing shift", {"mu": shifts[:2], "indices": [first, second]}
            )
    return first


def dh_regularity_check(system: PhDaeSystem, tol: float = None) -> bool:
    """ker E, ker RQ and ker Q^T J Q intersect trivially"""
    tol = tol or settings.RANK_TOL
    kernels = [
        nullspace(system.E, tol),
        nullspace(system.R @ system.Q, tol),
        nullspace(system.Q.T @ system.J @ system.Q, tol),
    ]
    return subspace_intersect(kernels).is_trivial


def dh_index_le1_check(system: PhDaeSystem, tol: float = None) -> bool:
    """ker E, ker RQ and the JQ-preimage of im E intersect trivially"""
    tol = tol or settings.RANK_TOL
    image = range_basis(system.E, tol)
    preimage = nullspace(image.complement_projector() @ system.J @ system.Q, tol)
    kernels = [nullspace(system.E, tol), nullspace(system.R @ system.Q, tol), preimage]
    return subspace_intersect(kernels).is_trivial


def _semisimple_axis(M: np.ndarray, spectrum: SpectrumClassification, tol: float) -> Tuple[bool, List[float]]:
    defective = []
    n = M.shape[0]
    for alpha in spectrum.imaginary_clusters():
        shifted = M - 1j * alpha * np.eye(n)
        if rank(real_embedding(shifted), tol) != rank(real_embedding(shifted @ shifted), tol):
            defective.append(alpha)
    return not defective, defective


def _zero_chains_short(M: np.ndarray, tol: float) -> bool:
    n = M.shape[0]
    if n == 0:
        return True
    scale = norm2(M)
    if scale == 0:
        return True
    Mn = M / scale
    M2 = Mn @ Mn
    return rank(M2, tol) == rank(M2 @ Mn, tol)


def spectral_conditions(M: np.ndarray, spectral_tol: float, rank_tol: float) -> Tuple[Dict[str, bool], Dict[str, Any]]:
    """Closed left half plane, semi-simple imaginary axis, zero chains of length <= 2"""
    spectrum = classify_spectrum(M, spectral_tol, rank_tol)
    unstable = spectrum.unstable
    semisimple, defective = _semisimple_axis(M, spectrum, rank_tol)
    conditions = {
        "i": unstable.size == 0,
        "ii": semisimple,
        "iii": _zero_chains_short(M, rank_tol),
    }
    details = {
        "eigenvalues": spectrum.eigenvalues,
        "zero_multiplicity": spectrum.zero_count,
        "unstable": unstable,
        "defective_frequencies": defective,
    }
    return conditions, details


def _nilpotent_witness(N0: np.ndarray, threshold: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S0, J0, Q0 with N0 = S0 (J0 Q0) S0^-1 built from [[0,1],[-1,0]] [[0,0],[0,1]] blocks"""
    k = N0.shape[0]
    if k == 0:
        empty = np.zeros((0, 0))
        return empty, empty, empty
    U, s, Vt = np.linalg.svd(N0)
    r = int(np.sum(s > threshold))
    columns = []
    for i in range(r):
        columns.extend([N0 @ Vt[i], Vt[i]])
    kernel = Vt[r:].T
    if r and kernel.shape[1]:
        coeff = nullspace(U[:, :r].T @ kernel)
        rest = kernel @ coeff.basis
    else:
        rest = kernel
    S0 = np.column_stack(columns + [rest[:, j] for j in range(rest.shape[1])]) if (columns or rest.size) else np.eye(k)
    if S0.shape != (k, k) or rcond(S0) < settings.INVERTIBILITY_RCOND:
        raise NumericalError("nilpotent chain basis is degenerate", {"rank": r, "size": k})
    J0 = np.zeros((k, k))
    Q0 = np.zeros((k, k))
    for i in range(r):
        J0[2 * i, 2 * i + 1], J0[2 * i + 1, 2 * i] = 1.0, -1.0
        Q0[2 * i + 1, 2 * i + 1] = 1.0
    return S0, J0, Q0


def _lyapunov_factors(M: np.ndarray, P: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """J, R, Q with M = (J - R) Q from P > 0 satisfying M P + P M^T <= 0"""
    MP = M @ P
    return 0.5 * (MP - MP.T), -0.5 * (MP + MP.T), np.linalg.inv(P)


def dh_witness(A: np.ndarray, spectrum: SpectrumClassification) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Build (J, R, Q) with A = (J - R)Q.

    A is block-diagonalised into a nilpotent block, a semi-simple imaginary
    block and a Hurwitz block. The imaginary block is skew in the inner
    product Re(X X^H) of its eigenvectors, the Hurwitz block gets a Lyapunov
    solution, and the nilpotent chains use the explicit 2x2 factorisation.
    """
    n = A.shape[0]
    scale = max(norm2(A), 1e-300)
    axis = ordered_block_split(A, spectrum.on_axis)
    zero = ordered_block_split(axis.M1, spectrum.is_zero)
    k0, kim = zero.M1.shape[0], zero.M2.shape[0]
    S = axis.S @ scipy.linalg.block_diag(zero.S, np.eye(axis.M2.shape[0]))

    S0, J0, Q0 = _nilpotent_witness(zero.M1, 1e-7 * scale)
    if k0:
        S0_inv = np.linalg.inv(S0)
        Jn, Qn = S0 @ J0 @ S0.T, S0_inv.T @ Q0 @ S0_inv
    else:
        Jn = Qn = np.zeros((0, 0))

    if kim:
        _, X = np.linalg.eig(zero.M2)
        X = X / np.linalg.norm(X, axis=0, keepdims=True)
        P_im = symmetric_part(np.real(X @ X.conj().T))
    else:
        P_im = np.zeros((0, 0))
    A_st = axis.M2
    P_st = scipy.linalg.solve_continuous_lyapunov(A_st, -np.eye(A_st.shape[0])) if A_st.size else np.zeros((0, 0))
    P_st = symmetric_part(P_st)

    M_rest = scipy.linalg.block_diag(zero.M2, A_st)
    P_rest = scipy.linalg.block_diag(P_im, P_st)
    if M_rest.size:
        Jr, Rr, Qr = _lyapunov_factors(M_rest, P_rest)
    else:
        Jr = Rr = Qr = np.zeros((0, 0))

    J_hat = scipy.linalg.block_diag(Jn, Jr)
    R_hat = scipy.linalg.block_diag(np.zeros((k0, k0)), Rr)
    Q_hat = scipy.linalg.block_diag(Qn, Qr)
    S_inv = np.linalg.inv(S)
    J = skew_part(S @ J_hat @ S.T)
    R = symmetric_part(S @ R_hat @ S.T)
    Q = symmetric_part(S_inv.T @ Q_hat @ S_inv)
    if J.shape != (n, n):
        raise NumericalError("witness blocks do not cover the state space")
    return J, R, Q


def is_dh_matrix(A, spectral_tol: float = None, rank_tol: float = None) -> DhCertificate:
    A = as_matrix(A, "A")
    require_square(A, "A")
    spectral_tol = spectral_tol or settings.SPECTRAL_TOL
    rank_tol = rank_tol or settings.RANK_TOL
    conditions, details = spectral_conditions(A, spectral_tol, rank_tol)
    violated = next((name for name in ("i", "ii", "iii") if not conditions[name]), None)
    if violated is not None:
        return DhCertificate(False, conditions, violated, details=details)

    J, R, Q = dh_witness(A, classify_spectrum(A, spectral_tol, rank_tol))
    scale = max(norm2(A), 1e-300)
    error = norm2((J - R) @ Q - A) / scale
    checks = {
        "skew": norm2(J + J.T) / max(1.0, norm2(J)),
        "R_deficit": psd_deficit(R) / max(1.0, norm2(R)),
        "Q_deficit": psd_deficit(Q) / max(1.0, norm2(Q)),
    }
    if error > 1e-7 or any(value > 1e-8 for value in checks.values()):
        raise NumericalError("dissipative Hamiltonian witness failed verification", {"error": error, **checks})
    details.update(checks)
    return DhCertificate(True, conditions, None, J, R, Q, error, details)


def is_dh_pencil(E, A, spectral_tol: float = None, rank_tol: float = None) -> DhCertificate:
    """Pencil conditions read off the quasi-Weierstrass form"""
    E, A = _check_pencil(E, A)
    spectral_tol = spectral_tol or settings.SPECTRAL_TOL
    rank_tol = rank_tol or settings.RANK_TOL
    qw = quasi_weierstrass(E, A, rank_tol)
    ode_conditions, details = spectral_conditions(qw.C, spectral_tol, rank_tol)
    conditions = {
        "i": ode_conditions["i"],
        "ii": ode_conditions["ii"],
        "iii": qw.index <= 2,
        "iv": ode_conditions["iii"],
    }
    details.update({"index": qw.index, "n1": qw.n1, "n2": qw.n2})
    violated = next((name for name in ("i", "ii", "iii", "iv") if not conditions[name]), None)
    return DhCertificate(violated is None, conditions, violated, details=details)


def _check_controls(controls, m: int) -> np.ndarray:
    controls = as_matrix(controls, "controls")
    if controls.shape[1] != m or controls.shape[0] < 1:
        raise ShapeError("controls must have one row per interval and m columns", {"shape": list(controls.shape)})
    return controls


def solve_dae_ivp(system: PhDaeSystem, controls, w0, horizon: float, tol: float = None) -> Trajectory:
    """
    RK4 on the ODE part with piecewise-constant controls; the algebraic part
    follows the input pointwise.

    Index 2 is accepted only when the input never reaches the nilpotent
    chain, since otherwise input derivatives would be required.
    """
    tol = tol or settings.RANK_TOL
    controls = _check_controls(controls, system.m)
    w0 = as_vector(w0, "w0", system.n)
    N = controls.shape[0]
    h = horizon / N
    times = np.linspace(0.0, horizon, N + 1)
    qw = quasi_weierstrass(system.E, system.A, tol)
    B = system.B

    if qw.index == 0:
        A_ode = np.linalg.solve(system.E, system.A)
        B_ode = np.linalg.solve(system.E, B)
        Phi, Gamma = rk4_step_matrices(A_ode, B_ode, h)
        states = np.empty((N + 1, system.n))
        states[0] = np.linalg.solve(system.E, w0)
        for k in range(N):
            states[k + 1] = Phi @ states[k] + Gamma @ controls[k]
    else:
        coupling = qw.nilpotent_coupling(B)
        if qw.index >= 3 or coupling > 1e-8 * max(1.0, norm2(B)):
            raise IndexTooHighError(qw.index, f"index-{qw.index} DAE needs input derivatives; refused")
        F_V, F_W = qw.input_split(B)
        xi, gap = qw.consistent_initial(system.E, w0)
        if gap > 1e-8 * (1.0 + float(np.linalg.norm(w0))):
            raise StructureError("initial datum is not consistent with the DAE", {"distance": gap})
        Phi, Gamma = rk4_step_matrices(qw.C, F_V, h)
        Vb, Wb = qw.V.basis, qw.W.basis
        on_grid = np.vstack([controls, controls[-1:]])
        states = np.empty((N + 1, system.n))
        for k in range(N + 1):
            states[k] = Vb @ xi - Wb @ (F_W @ on_grid[k])
            if k < N:
                xi = Phi @ xi + Gamma @ controls[k]

    outputs = states @ (system.Q.T @ B)
    return Trajectory(times=times, states=states, controls=controls, outputs=outputs)


def consistent_state(system: PhDaeSystem, w, u, tol: float = None) -> np.ndarray:
    """The x with E x = w on the solution manifold for the frozen input u"""
    tol = tol or settings.RANK_TOL
    qw = quasi_weierstrass(system.E, system.A, tol)
    F_V, F_W = qw.input_split(system.B)
    xi, gap = qw.consistent_initial(system.E, as_vector(w, "w", system.n))
    if gap > 1e-8 * (1.0 + float(np.linalg.norm(w))):
        raise StructureError("datum is not consistent with the DAE", {"distance": gap})
    return qw.V.basis @ xi - qw.W.basis @ (F_W @ as_vector(u, "u", system.m))


def image_of_E(system: PhDaeSystem, tol: float = None) -> SubspaceBasis:
    return range_basis(system.E, tol or settings.RANK_TOL)


def is_in_image(system: PhDaeSystem, w, tol: float = 1e-8) -> bool:
    w = as_vector(w, "w", system.n)
    return dist_to_subspace(w, image_of_E(system)) <= tol * (1.0 + float(np.linalg.norm(w)))
