"""
Convex QP container and solver front end.

    minimise  1/2 z^T P z + q^T z + constant   s.t.  l <= A z <= u

Multipliers follow the OSQP convention P z + q + A^T y = 0, with y_i > 0 on
an active upper bound and y_i < 0 on an active lower bound.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import osqp
import scipy.sparse as sp
import structlog
from scipy.sparse.linalg import splu

from phturnpike.core.errors import InfeasibleProblemError, ShapeError, SolverError
from phturnpike.models.base import Base
from phturnpike.models.ocp import SolverTolerances

logger = structlog.get_logger(__name__)

KKT_REGULARISATION = 1e-11
REFINEMENT_STEPS = 5


@dataclass(frozen=True, repr=False, eq=False)
class QpProblem(Base):
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray
    constant: float = 0.0
    layout: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        P = sp.csc_matrix(self.P, dtype=float)
        A = sp.csc_matrix(self.A, dtype=float)
        n = P.shape[0]
        if P.shape != (n, n) or A.shape[1] != n:
            raise ShapeError("QP matrices have inconsistent shapes", {"P": list(P.shape), "A": list(A.shape)})
        q = np.asarray(self.q, dtype=float).reshape(-1)
        l = np.asarray(self.l, dtype=float).reshape(-1)
        u = np.asarray(self.u, dtype=float).reshape(-1)
        if q.size != n or l.size != A.shape[0] or u.size != A.shape[0]:
            raise ShapeError("QP vectors have inconsistent lengths")
        if np.any(l > u):
            raise ShapeError("QP bounds must satisfy l <= u")
        for name, value in (("P", P), ("A", A), ("q", q), ("l", l), ("u", u)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def rows(self) -> int:
        return self.A.shape[0]

    @property
    def equality_rows(self) -> np.ndarray:
        return self.l == self.u

    @property
    def equality_only(self) -> bool:
        return bool(np.all(self.equality_rows))

    def equality_part(self) -> "QpProblem":
        """Same objective with the inequality rows dropped"""
        rows = self.equality_rows
        A = self.A.tocsr()[np.flatnonzero(rows)]
        return QpProblem(self.P, self.q, A, self.l[rows], self.u[rows], self.constant, dict(self.layout))

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.P @ z) + self.q @ z + self.constant)


@dataclass(frozen=True, repr=False, eq=False)
class QpSolution(Base):
    x: np.ndarray
    y: np.ndarray
    status: str
    objective: float
    iterations: int
    residuals: Dict[str, float]

    @property
    def kkt_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def kkt_residuals(problem: QpProblem, x: np.ndarray, y: np.ndarray) -> Dict[str, float]:
    """Scaled stationarity, primal, dual-sign and complementarity residuals"""
    Px, Ax, ATy = problem.P @ x, problem.A @ x, problem.A.T @ y
    grad_scale = 1.0 + max(np.max(np.abs(problem.q), initial=0.0), np.max(np.abs(Px), initial=0.0))
    stationarity = np.max(np.abs(Px + problem.q + ATy), initial=0.0) / grad_scale

    finite_l, finite_u = np.isfinite(problem.l), np.isfinite(problem.u)
    low = np.where(finite_l, problem.l - Ax, 0.0)
    high = np.where(finite_u, Ax - problem.u, 0.0)
    bound_scale = 1.0 + np.max(np.abs(Ax), initial=0.0)
    primal = max(np.max(low, initial=0.0), np.max(high, initial=0.0)) / bound_scale

    y_pos, y_neg = np.maximum(y, 0.0), np.maximum(-y, 0.0)
    dual = max(np.max(y_pos[~finite_u], initial=0.0), np.max(y_neg[~finite_l], initial=0.0))
    dual /= 1.0 + np.max(np.abs(y), initial=0.0)

    slack_u = np.where(finite_u, problem.u - Ax, 0.0)
    slack_l = np.where(finite_l, Ax - problem.l, 0.0)
    equality = problem.equality_rows
    comp = np.where(equality, 0.0, np.abs(y_pos * slack_u) + np.abs(y_neg * slack_l))
    complementarity = np.max(comp, initial=0.0) / (bound_scale * (1.0 + np.max(np.abs(y), initial=0.0)))
    return {
        "stationarity": float(stationarity),
        "primal": float(primal),
        "dual": float(dual),
        "complementarity": float(complementarity),
    }


def _solve_kkt(problem: QpProblem) -> QpSolution:
    """Equality-constrained QP via the regularised KKT system and refinement"""
    n, m = problem.n, problem.rows
    b = problem.u
    K0 = sp.bmat([[problem.P, problem.A.T], [problem.A, None]], format="csc") if m else sp.csc_matrix(problem.P)
    scale = max(1.0, abs(K0).max() if K0.nnz else 1.0)
    delta = KKT_REGULARISATION * scale
    reg = sp.diags(np.concatenate([delta * np.ones(n), -delta * np.ones(m)]), format="csc")
    try:
        lu = splu((K0 + reg).tocsc())
    except RuntimeError as exc:
        raise SolverError("KKT matrix is singular", {"reason": str(exc)}) from exc
    rhs = np.concatenate([-problem.q, b])
    sol = lu.solve(rhs)
    for _ in range(REFINEMENT_STEPS):
        residual = rhs - K0 @ sol
        if np.max(np.abs(residual), initial=0.0) <= 1e-14 * scale * (1.0 + np.max(np.abs(sol))):
            break
        sol = sol + lu.solve(residual)
    x, y = sol[:n], sol[n:]
    residuals = kkt_residuals(problem, x, y)
    return QpSolution(x, y, "optimal", problem.objective(x), 1, residuals)


def _solve_osqp(problem: QpProblem, tolerances: SolverTolerances, warm_start: Optional[np.ndarray]) -> QpSolution:
    solver = osqp.OSQP()
    solver.setup(
        P=sp.triu(problem.P, format="csc"),
        q=problem.q,
        A=problem.A,
        l=problem.l,
        u=problem.u,
        eps_abs=tolerances.qp_eps,
        eps_rel=tolerances.qp_eps,
        eps_prim_inf=1e-9,
        eps_dual_inf=1e-9,
        max_iter=tolerances.max_iter,
        polish=True,
        verbose=False,
    )
    if warm_start is not None:
        solver.warm_start(x=warm_start)
    result = solver.solve()
    status = str(result.info.status)
    logger.debug("osqp finished", status=status, iterations=int(result.info.iter), n=problem.n, rows=problem.rows)
    if "primal infeasible" in status:
        raise InfeasibleProblemError("QP is infeasible", {"status": status})
    iterations = int(result.info.iter)
    if status not in ("solved", "solved inaccurate", "maximum iterations reached"):
        raise SolverError("QP solver did not converge", {"status": status, "iterations": iterations})
    x = np.asarray(result.x, dtype=float)
    y = np.asarray(result.y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise SolverError("QP solver returned no iterate", {"status": status, "iterations": iterations})
    residuals = kkt_residuals(problem, x, y)
    if status == "maximum iterations reached":
        if max(residuals.values()) > tolerances.feasibility_tol:
            raise SolverError("QP solver did not converge", {"status": status, "iterations": iterations, **residuals})
        logger.warning("accepting unconverged QP iterate", iterations=iterations, **residuals)
    label = "optimal" if status == "solved" else "optimal_inaccurate"
    return QpSolution(x, y, label, problem.objective(x), iterations, residuals)


def _solve_relaxed(problem: QpProblem, tolerances: SolverTolerances) -> Tuple[Optional[QpSolution], Optional[np.ndarray]]:
    """
    KKT solve with the inequality rows dropped.

    The relaxed optimum is returned when it satisfies the dropped rows, with
    zero multipliers on them; otherwise its primal point is handed back as a
    warm start.
    """
    rows = problem.equality_rows
    try:
        relaxed = _solve_kkt(problem.equality_part())
    except SolverError:
        return None, None
    if not np.all(np.isfinite(relaxed.x)):
        return None, None
    y = np.zeros(problem.rows)
    y[rows] = relaxed.y
    residuals = kkt_residuals(problem, relaxed.x, y)
    if max(residuals.values()) > tolerances.qp_tol:
        return None, relaxed.x
    return QpSolution(relaxed.x, y, "optimal", problem.objective(relaxed.x), 1, residuals), None


def solve_qp(
    problem: QpProblem,
    tolerances: Optional[SolverTolerances] = None,
    warm_start: Optional[np.ndarray] = None,
) -> QpSolution:
    """
    Solve a convex QP.

    Equality-only problems go through a direct sparse KKT solve. With
    inequality rows the equality-constrained relaxation is tried first and
    kept when no dropped row is violated; otherwise OSQP with solution
    polishing takes over, warm-started from the relaxation. Residuals are
    recomputed from the returned primal/dual pair and checked against
    ``tolerances.qp_tol``.
    """
    tolerances = tolerances or SolverTolerances()
    if problem.equality_only:
        solution = _solve_kkt(problem)
    else:
        solution, relaxed_start = _solve_relaxed(problem, tolerances)
        if solution is None:
            start = warm_start if warm_start is not None else relaxed_start
            solution = _solve_osqp(problem, tolerances, start)

    if solution.residuals["primal"] > max(tolerances.qp_tol, 1e3 * tolerances.qp_eps):
        raise InfeasibleProblemError(
            "QP constraints not satisfied at the returned point", {"primal": solution.residuals["primal"]}
        )
    if solution.kkt_residual > tolerances.qp_tol:
        logger.warning("kkt residual above tolerance", status=solution.status, **solution.residuals)
    return solution
