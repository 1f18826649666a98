"""
Reachability and steady-state analysis.

Covers the Kalman subspace, R-controllability of descriptor systems, the
kernel of optimal steady states, controllability Gramians, growth bounds
for e^{tA} and QP-based feasibility and minimal-time estimates.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
import scipy.sparse as sp
import structlog

from phturnpike.core.config import settings
from phturnpike.core.errors import (
    InfeasibleProblemError,
    IrregularPencilError,
    NumericalError,
    ShapeError,
    StructureError,
)
from phturnpike.core.numerics import (
    SubspaceBasis,
    as_matrix,
    as_vector,
    expm,
    max_eigenvalue,
    norm2,
    nullspace,
    range_basis,
    rank,
    real_embedding,
    symmetric_part,
)
from phturnpike.models.base import Base
from phturnpike.models.ocp import OcpSpec, SolverTolerances
from phturnpike.models.sets import ControlSet, TargetSet
from phturnpike.models.system import PhDaeSystem, PhOdeSystem, output_of
from phturnpike.services.decomp import dissipative_input, reduce_dae, spectral_split
from phturnpike.services.ocp import FeasibilityResult, minimal_terminal_distance
from phturnpike.services.pencil import is_regular, quasi_weierstrass
from phturnpike.services.qp import QpProblem, solve_qp

logger = structlog.get_logger(__name__)

GRAMIAN_REL_CHANGE = 1e-6
GRAMIAN_MAX_DOUBLINGS = 10
GROWTH_SAMPLES = 60
GROWTH_VERIFY_FACTOR = 10


@dataclass(frozen=True, repr=False, eq=False)
class SteadyState(Base):
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    optimal: bool
    dynamics_residual: float = 0.0
    dissipation_residual: float = 0.0


@dataclass(frozen=True, repr=False, eq=False)
class OptimalSteadyStates(Base):
    """Orthonormal basis of ker [[A, B_tilde], W] in R^(n+m) plus a representative"""

    basis: SubspaceBasis
    representative: SteadyState
    interior_candidate: Optional[SteadyState] = None

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def has_interior_nonzero(self) -> bool:
        return self.interior_candidate is not None


@dataclass(frozen=True, repr=False, eq=False)
class GramianResult(Base):
    G: np.ndarray
    alpha: float
    steps: int
    relative_change: float


@dataclass(frozen=True, repr=False, eq=False)
class GrowthBound(Base):
    """M with |e^{tA}| <= 1 + M t on (0, T_max]"""

    M: float
    horizon: float
    reinflated: bool = False
    worst_ratio: float = 0.0


@dataclass(frozen=True, repr=False, eq=False)
class MinimalTimeEstimate(Base):
    lower: float
    upper: float
    evaluations: int = 0

    @property
    def value(self) -> float:
        return self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def kalman_subspace(A, B, tol: float = None) -> SubspaceBasis:
    """im [B, AB, ..., A^{n-1} B]

    This is also the set of states reachable from the origin: every
    trajectory started at x0 = 0 stays in it, whatever the controls.
    """
    tol = tol or settings.RANK_TOL
    A = as_matrix(A, "A")
    n = A.shape[0]
    B = as_matrix(B, "B")
    if B.shape[0] != n:
        raise ShapeError("B must have n rows", {"rows": B.shape[0], "n": n})
    if not np.any(B):
        return SubspaceBasis.zero(n)
    As = A / max(1.0, norm2(A))
    block = B / norm2(B)
    blocks = [block]
    for _ in range(n - 1):
        block = As @ block
        blocks.append(block)
    return range_basis(np.hstack(blocks), tol)


def is_controllable(A, B, tol: float = None) -> bool:
    return kalman_subspace(A, B, tol).dim == as_matrix(A, "A").shape[0]


def is_r_controllable(system: PhDaeSystem, tol: float = None) -> bool:
    """rank [lam E - A, B] = n at every finite eigenvalue of the pencil"""
    tol = tol or settings.RANK_TOL
    if not is_regular(system.E, system.A).regular:
        raise IrregularPencilError("R-controllability needs a regular pencil")
    qw = quasi_weierstrass(system.E, system.A, tol)
    n = system.n
    eigenvalues = np.linalg.eigvals(qw.C) if qw.n1 else np.zeros(0)
    for lam in eigenvalues:
        pencil = np.hstack([lam * system.E - system.A, system.B.astype(complex)])
        if rank(real_embedding(pencil), tol) < 2 * n:
            logger.debug("hautus rank drop", eigenvalue=str(complex(lam)))
            return False
    return True


def _steady_state(system: PhOdeSystem, x: np.ndarray, u: np.ndarray) -> SteadyState:
    dyn = float(np.linalg.norm(system.A @ x + system.B_tilde @ u))
    z = np.concatenate([x, u])
    diss = float(np.linalg.norm(system.W @ z))
    scale = max(1.0, float(np.linalg.norm(z)))
    optimal = dyn <= 1e-9 * scale and diss <= 1e-9 * scale
    return SteadyState(x, u, output_of(system, x, u), optimal, dyn, diss)


def steady_state_matrix(system: PhOdeSystem) -> np.ndarray:
    """The (2n+m) x (n+m) stack [[A, B_tilde], W]"""
    return np.vstack([np.hstack([system.A, system.B_tilde]), system.W])


def optimal_steady_states(system: PhOdeSystem, control_set: ControlSet, tol: float = None) -> OptimalSteadyStates:
    tol = tol or settings.RANK_TOL
    if control_set.dim != system.m:
        raise ShapeError("control set dimension must equal the input count")
    n = system.n
    basis = nullspace(steady_state_matrix(system), tol)
    zero = _steady_state(system, np.zeros(n), np.zeros(system.m))

    candidate = None
    for j in range(basis.dim):
        v = basis.basis[:, j]
        u = v[n:]
        if np.linalg.norm(u) <= 1e-12:
            continue
        scale = 0.5 * control_set.boundary_distance(u)
        state = _steady_state(system, scale * v[:n], scale * u)
        if control_set.is_interior(state.u, settings.INTERIOR_MARGIN):
            candidate = state
            break
    logger.debug("optimal steady states", dim=basis.dim, interior_nonzero=candidate is not None)
    return OptimalSteadyStates(basis, zero, candidate)


def reachable_optimal_steady_state(
    system: PhOdeSystem, initial, control_set: ControlSet, tol: float = None
) -> Optional[SteadyState]:
    """
    Optimal steady state in initial + im K(A, B_tilde) closest in coefficient
    norm, or None when that affine subspace holds none with interior control.
    """
    tol = tol or settings.RANK_TOL
    initial = as_vector(initial, "initial", system.n)
    n = system.n
    kernel = nullspace(steady_state_matrix(system), tol)
    off_reach = kalman_subspace(system.A, system.B_tilde, tol).complement_projector()
    target = off_reach @ initial
    if kernel.dim == 0:
        coeff = np.zeros(0)
        residual = float(np.linalg.norm(target))
    else:
        lhs = off_reach @ kernel.basis[:n]
        coeff, *_ = np.linalg.lstsq(lhs, target, rcond=None)
        residual = float(np.linalg.norm(lhs @ coeff - target))
    if residual > 1e-8 * (1.0 + float(np.linalg.norm(initial))):
        return None
    z = kernel.basis @ coeff if kernel.dim else np.zeros(n + system.m)
    state = _steady_state(system, z[:n], z[n:])
    if not control_set.is_interior(state.u, settings.INTERIOR_MARGIN):
        return None
    return state


def steady_state_program_value(system: PhOdeSystem, x_bar, tolerances: Optional[SolverTolerances] = None) -> float:
    """
    min (x; u)^T W (x; u) over steady states (x, u) with x = x_bar.

    Zero exactly when x_bar belongs to an optimal steady state.
    """
    x_bar = as_vector(x_bar, "x_bar", system.n)
    n, m = system.n, system.m
    A_rows = sp.vstack([
        sp.csc_matrix(np.hstack([system.A, system.B_tilde])),
        sp.hstack([sp.eye(n), sp.csc_matrix((n, m))]),
    ]).tocsc()
    rhs = np.concatenate([np.zeros(n), x_bar])
    problem = QpProblem(P=sp.csc_matrix(2.0 * system.W), q=np.zeros(n + m), A=A_rows, l=rhs, u=rhs)
    return solve_qp(problem, tolerances).objective


def dae_steady_state_lift(system: PhDaeSystem, w_bar, u_bar, tol: float = 1e-8) -> np.ndarray:
    """The unique x with E x = w_bar and (J - R)Q x + B u_bar = 0"""
    w_bar = as_vector(w_bar, "w_bar", system.n)
    u_bar = as_vector(u_bar, "u_bar", system.m)
    M = np.vstack([system.E, system.A])
    rhs = np.concatenate([w_bar, -system.B @ u_bar])
    x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    residual = float(np.linalg.norm(M @ x - rhs))
    if residual > tol * (1.0 + float(np.linalg.norm(rhs))):
        raise StructureError("(w, u) is not a steady state of the descriptor system", {"residual": residual})
    return x


def _simpson_gramian(A: np.ndarray, B: np.ndarray, t: float, steps: int) -> np.ndarray:
    h = t / steps
    step = expm(A, h)
    E = np.eye(A.shape[0])
    BBt = B @ B.T
    G = np.zeros_like(BBt)
    for j in range(steps + 1):
        weight = 1.0 if j in (0, steps) else (4.0 if j % 2 else 2.0)
        G += weight * (E @ BBt @ E.T)
        E = step @ E
    return symmetric_part(G * h / 3.0)


def controllability_gramian(A, B, t: float, steps: Optional[int] = None) -> GramianResult:
    """
    int_0^t e^{sA} B B^T e^{sA^T} ds by composite Simpson, doubling the step
    count until the relative change drops below 1e-6.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if t <= 0:
        raise ShapeError("Gramian horizon must be positive", {"t": t})
    steps = steps or settings.GRAMIAN_MIN_STEPS
    steps += steps % 2
    G = _simpson_gramian(A, B, t, steps)
    change = 0.0
    for _ in range(GRAMIAN_MAX_DOUBLINGS):
        steps *= 2
        finer = _simpson_gramian(A, B, t, steps)
        change = norm2(finer - G) / max(norm2(finer), 1e-300)
        G = finer
        if change <= GRAMIAN_REL_CHANGE or not np.any(G):
            break
    alpha = max(0.0, float(np.linalg.eigvalsh(G)[0])) if G.size else 0.0
    return GramianResult(G, alpha, steps, change)


def _growth_ratio(A: np.ndarray, t: float) -> float:
    return (norm2(expm(A, t)) - 1.0) / t


def exp_growth_bound(A, T_max: float) -> GrowthBound:
    """Sampled sup of (|e^{tA}| - 1)/t, inflated, then checked on a denser grid"""
    A = as_matrix(A, "A")
    if T_max <= 0:
        raise ShapeError("growth horizon must be positive", {"T_max": T_max})
    grid = np.geomspace(T_max * 1e-4, T_max, GROWTH_SAMPLES)
    log_norm = max(0.0, max_eigenvalue(symmetric_part(A)))
    worst = max([log_norm] + [_growth_ratio(A, t) for t in grid])
    M = max(settings.GROWTH_FLOOR, settings.GROWTH_SAFETY * worst)

    dense = np.geomspace(T_max * 1e-5, T_max, GROWTH_SAMPLES * GROWTH_VERIFY_FACTOR)
    ratios = np.array([_growth_ratio(A, t) for t in dense])
    reinflated = False
    if np.any(ratios > M):
        worst = max(worst, float(ratios.max()))
        M = settings.GROWTH_SAFETY * worst
        reinflated = True
        logger.warning("growth bound re-inflated", M=M, T_max=T_max)
    return GrowthBound(M, float(T_max), reinflated, worst)


def _ode_spec(spec: OcpSpec) -> OcpSpec:
    if not spec.is_dae:
        return spec
    reduction = reduce_dae(spec.system, spec.tolerances.rank_tol)
    return spec.with_system(reduction.reduced, reduction.initial(spec.initial), reduction.target(spec.target))


def feasibility_check(spec: OcpSpec) -> FeasibilityResult:
    """Can the discretised system reach the target with admissible controls"""
    result = minimal_terminal_distance(_ode_spec(spec))
    logger.debug("feasibility", T=spec.horizon, distance=result.distance, feasible=result.feasible)
    return result


def minimal_time_estimate(
    system: PhOdeSystem,
    initial,
    target: Union[TargetSet, np.ndarray],
    control_set: ControlSet,
    T_hi: float,
    steps: Optional[int] = None,
    workers: int = 1,
    tolerances: Optional[SolverTolerances] = None,
) -> MinimalTimeEstimate:
    """
    Bracket the minimal steering time on [0, T_hi].

    With workers > 1 every round tests that many interior points at once and
    keeps the sub-interval where feasibility switches on. Feasibility is
    assumed monotone in T. A distance solve that does not converge counts as
    unreachable, so the upper endpoint is always a certified horizon.
    """
    if not isinstance(target, TargetSet):
        target = TargetSet.singleton(target)
    initial = as_vector(initial, "initial", system.n)
    steps = steps or settings.MIN_TIME_STEPS
    tolerances = tolerances or SolverTolerances()
    if target.contains(initial, tolerances.feasibility_tol):
        return MinimalTimeEstimate(0.0, 0.0, 0)

    def feasible(T: float) -> bool:
        spec = OcpSpec(system, T, steps, initial, target, control_set, tolerances)
        try:
            return minimal_terminal_distance(spec).feasible
        except InfeasibleProblemError:
            return False
        except NumericalError as exc:
            logger.warning("feasibility undecided, treated as unreachable", T=T, reason=exc.message)
            return False

    if not feasible(T_hi):
        raise InfeasibleProblemError("target is not reachable within the upper time limit", {"T_hi": T_hi})
    lower, upper = 0.0, float(T_hi)
    width = T_hi * settings.MIN_TIME_REL_WIDTH
    evaluations = 1
    k = max(1, int(workers))
    with ThreadPoolExecutor(max_workers=k) as pool:
        while upper - lower > width:
            points: List[float] = [lower + (upper - lower) * (i + 1) / (k + 1) for i in range(k)]
            verdicts = list(pool.map(feasible, points)) if k > 1 else [feasible(points[0])]
            evaluations += len(points)
            bounds = [lower] + points + [upper]
            flags = [False] + verdicts + [True]
            first = flags.index(True)
            lower, upper = bounds[first - 1], bounds[first]
    logger.debug("minimal time", lower=lower, upper=upper, evaluations=evaluations)
    return MinimalTimeEstimate(lower, upper, evaluations)


def r_constant(system: PhOdeSystem, growth: float, u_max: float) -> float:
    """(M / omega) |B2| u_max with B2 the Hurwitz-subspace part of B_tilde"""
    split = spectral_split(system.J, system.R, system.Q)
    if split.N2.dim == 0:
        return 0.0
    B2 = dissipative_input(split, system.B_tilde)
    return float(growth / split.stability_margin * norm2(B2) * u_max)


@dataclass(frozen=True, repr=False, eq=False)
class ControlReport(Base):
    controllable: bool
    kalman_dim: int
    r_controllable: Optional[bool]
    optimal_steady: OptimalSteadyStates
    gramian: GramianResult
    growth: GrowthBound
    r_constant: float
    notes: List[str] = field(default_factory=list)


def analyze_control(
    system: Union[PhOdeSystem, PhDaeSystem], control_set: ControlSet, t: float = 1.0, T_max: float = 20.0
) -> ControlReport:
    """Everything the `analyze-control` command reports, on the ODE form"""
    notes: List[str] = []
    r_ctrl: Optional[bool] = None
    ode = system
    if isinstance(system, PhDaeSystem):
        r_ctrl = is_r_controllable(system)
        ode = reduce_dae(system).reduced
        notes.append("reachability quantities refer to the reduced pH-ODE")
    kalman = kalman_subspace(ode.A, ode.B_tilde)
    growth = exp_growth_bound(ode.A, T_max)
    report = ControlReport(
        controllable=kalman.dim == ode.n,
        kalman_dim=kalman.dim,
        r_controllable=r_ctrl,
        optimal_steady=optimal_steady_states(ode, control_set),
        gramian=controllability_gramian(ode.A, ode.B_tilde, t),
        growth=growth,
        r_constant=r_constant(ode, growth.M, control_set.u_max),
        notes=notes,
    )
    logger.info("control analysed", controllable=report.controllable, kalman_dim=report.kalman_dim)
    return report
