"""
Minimal-energy-supply optimal control by direct transcription.

The supplied energy is replaced by the equivalent convex objective
H(x(T)) - H(x0) + int |W^(1/2)(x; u)|^2 and discretised with classical RK4
defects and piecewise-constant controls. Descriptor systems are reduced to a
pH-ODE first and the solution is lifted back.
"""

from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import structlog

from phturnpike.core.config import settings
from phturnpike.core.errors import DegenerateProblemError, InfeasibleProblemError, ShapeError
from phturnpike.core.numerics import as_matrix, as_vector, norm2, rk4_step_matrices
from phturnpike.models.base import Base
from phturnpike.models.ocp import OcpSpec, Trajectory
from phturnpike.models.system import PhDaeSystem, PhOdeSystem, PhSystem, dissipation_rate, hamiltonian, output_of
from phturnpike.services.decomp import reduce_dae
from phturnpike.services.pencil import quasi_weierstrass
from phturnpike.services.qp import QpProblem, QpSolution, solve_qp

logger = structlog.get_logger(__name__)

LAMBDA0 = -1.0
# distance QP accuracy relative to the feasibility tolerance
DISTANCE_EPS_FRACTION = 1e-2


@dataclass(frozen=True, repr=False, eq=False)
class EnergyAudit(Base):
    hamiltonian_change: float
    dissipated: float
    supplied: float

    @property
    def cost(self) -> float:
        return self.hamiltonian_change + self.dissipated

    @property
    def residual(self) -> float:
        return abs(self.cost - self.supplied)


@dataclass(frozen=True, repr=False, eq=False)
class AdjointSamples(Base):
    times: np.ndarray
    values: np.ndarray
    stationarity: np.ndarray
    lambda0: float = LAMBDA0

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)


@dataclass(frozen=True, repr=False, eq=False)
class OcpSolution(Base):
    """
    Optimal trajectory with its costs and multipliers.

    `cost` is the reformulated objective evaluated with Simpson quadrature,
    `objective` the left-endpoint value the QP minimised. For descriptor
    input the trajectory is the lifted one; adjoint data live in reduced
    coordinates.
    """

    trajectory: Trajectory
    cost: float
    objective: float
    supplied_energy: float
    dissipated_energy: float
    energy_balance_residual: float
    kkt_residual: float
    multipliers: Dict[str, np.ndarray]
    adjoint: np.ndarray
    stationarity: np.ndarray
    terminal_error: float
    ball_excess: float
    control_set_default: bool
    status: str
    iterations: int
    lambda0: float = LAMBDA0
    reduction: Optional[Any] = None
    reduced_trajectory: Optional[Trajectory] = None
    system: Optional[PhOdeSystem] = None

    @property
    def ode_trajectory(self) -> Trajectory:
        """The trajectory of the system the QP was posed on"""
        return self.reduced_trajectory if self.reduced_trajectory is not None else self.trajectory


@dataclass(frozen=True, repr=False, eq=False)
class FeasibilityResult(Base):
    feasible: bool
    distance: float
    tolerance: float
    trajectory: Optional[Trajectory] = None

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class GridLayout:
    """Offsets into z = [u_0 .. u_{N-1}, x_0 .. x_N, (p)] and into the row blocks"""

    n: int
    m: int
    N: int
    target_rows: int
    control_rows: int
    extra: int = 0

    @property
    def x_offset(self) -> int:
        return self.N * self.m

    @property
    def variables(self) -> int:
        return self.N * self.m + (self.N + 1) * self.n + self.extra

    @property
    def defect_row(self) -> int:
        return self.n

    @property
    def target_row(self) -> int:
        return self.n + self.N * self.n

    @property
    def control_row(self) -> int:
        return self.target_row + self.target_rows

    def u(self, z: np.ndarray) -> np.ndarray:
        return z[: self.x_offset].reshape(self.N, self.m)

    def x(self, z: np.ndarray) -> np.ndarray:
        return z[self.x_offset : self.x_offset + (self.N + 1) * self.n].reshape(self.N + 1, self.n)

    def as_dict(self) -> Dict[str, int]:
        return {
            "n": self.n,
            "m": self.m,
            "N": self.N,
            "x_offset": self.x_offset,
            "defect_row": self.defect_row,
            "target_row": self.target_row,
            "control_row": self.control_row,
            "extra": self.extra,
        }


def simulate_ode(system: PhOdeSystem, x0, controls, h: float) -> Trajectory:
    """Classical RK4 with controls frozen on each interval"""
    controls = as_matrix(controls, "controls")
    if controls.shape[1] != system.m:
        raise ShapeError("controls must have m columns", {"m": system.m, "shape": list(controls.shape)})
    x0 = as_vector(x0, "x0", system.n)
    N = controls.shape[0]
    Phi, Gamma = rk4_step_matrices(system.A, system.B_tilde, h)
    states = np.empty((N + 1, system.n))
    states[0] = x0
    for k in range(N):
        states[k + 1] = Phi @ states[k] + Gamma @ controls[k]
    held = np.vstack([controls, controls[-1:]])
    outputs = np.vstack([output_of(system, x, u) for x, u in zip(states, held)])
    return Trajectory(np.linspace(0.0, N * h, N + 1), states, controls, outputs)


def _dynamics_rows(system: PhOdeSystem, layout: GridLayout, h: float) -> sp.csc_matrix:
    n, m, N = layout.n, layout.m, layout.N
    Phi, Gamma = rk4_step_matrices(system.A, system.B_tilde, h)
    U_part = sp.kron(sp.eye(N), -Gamma)
    X_part = sp.kron(sp.eye(N, N + 1, k=0), -Phi) + sp.kron(sp.eye(N, N + 1, k=1), sp.eye(n))
    initial = sp.hstack([sp.csc_matrix((n, N * m)), sp.eye(n, (N + 1) * n)])
    blocks = sp.vstack([initial, sp.hstack([U_part, X_part])])
    if layout.extra:
        blocks = sp.hstack([blocks, sp.csc_matrix((blocks.shape[0], layout.extra))])
    return blocks.tocsc()


def _terminal_selector(layout: GridLayout) -> sp.csc_matrix:
    n, N = layout.n, layout.N
    cols = layout.x_offset + N * n + np.arange(n)
    return sp.csc_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, layout.variables))


def _control_rows(spec: OcpSpec, layout: GridLayout) -> Tuple[sp.csc_matrix, np.ndarray, np.ndarray]:
    G, lo, hi = spec.control_set.polyhedral_rows(settings.BALL_FACETS_PER_INPUT)
    N = layout.N
    rows = sp.hstack([sp.kron(sp.eye(N), G), sp.csc_matrix((N * G.shape[0], layout.variables - N * layout.m))])
    return rows.tocsc(), np.tile(lo, N), np.tile(hi, N)


def _energy_hessian(system: PhOdeSystem, layout: GridLayout, h: float) -> sp.csc_matrix:
    n, N = layout.n, layout.N
    W = system.W
    Wxx, Wxu, Wuu = W[:n, :n], W[:n, n:], W[n:, n:]
    running = np.ones(N + 1)
    running[-1] = 0.0
    P_uu = sp.kron(sp.eye(N), 2 * h * Wuu)
    last = np.zeros(N + 1)
    last[-1] = 1.0
    P_xx = sp.kron(sp.diags(running), 2 * h * Wxx) + sp.kron(sp.diags(last), system.Q)
    P_ux = sp.kron(sp.eye(N, N + 1), 2 * h * Wxu.T)
    P = sp.bmat([[P_uu, P_ux], [P_ux.T, P_xx]])
    return ((P + P.T) * 0.5).tocsc()


def transcribe(spec: OcpSpec, objective: str = "energy") -> QpProblem:
    """
    QP of the RK4-discretised problem.

    objective="energy" gives the reformulated supply cost with left-endpoint
    quadrature; objective="distance" minimises |x_N - p|^2 / 2 over controls,
    with p a free point of the target set, and drops the target rows.
    """
    system = spec.system
    if not isinstance(system, PhOdeSystem):
        raise ShapeError("transcription needs an ODE system; reduce descriptor systems first")
    n, m, N, h = system.n, system.m, spec.steps, spec.h
    target = spec.target
    box_distance = objective == "distance" and target is not None and target.kind == "box"
    target_rows = 0
    if objective == "energy" and target is not None:
        target_rows = n if target.kind == "point" else target.G.shape[0]
    G_c, _, _ = spec.control_set.polyhedral_rows(settings.BALL_FACETS_PER_INPUT)
    layout = GridLayout(n, m, N, target_rows, N * G_c.shape[0], extra=n if box_distance else 0)

    dyn = _dynamics_rows(system, layout, h)
    eq_rhs = np.concatenate([spec.initial, np.zeros(N * n)])
    blocks, lower, upper = [dyn], [eq_rhs], [eq_rhs]

    terminal = _terminal_selector(layout)
    if target_rows:
        if target.kind == "point":
            blocks.append(terminal)
            lower.append(target.point)
            upper.append(target.point)
        else:
            blocks.append(sp.csc_matrix(target.G) @ terminal)
            lower.append(target.lower)
            upper.append(target.upper)

    ctrl, lo, hi = _control_rows(spec, layout)
    blocks.append(ctrl)
    lower.append(lo)
    upper.append(hi)

    constant = 0.0
    if objective == "energy":
        P = _energy_hessian(system, layout, h)
        q = np.zeros(layout.variables)
        constant = -hamiltonian(system, spec.initial)
    elif objective == "distance":
        if target is None:
            raise ShapeError("distance objective needs a target")
        if box_distance:
            point_cols = sp.hstack([sp.csc_matrix((n, layout.variables - n)), sp.eye(n)])
            diff = terminal - point_cols
            P = (diff.T @ diff).tocsc()
            q = np.zeros(layout.variables)
            blocks.append(sp.csc_matrix(target.G) @ point_cols)
            lower.append(target.lower)
            upper.append(target.upper)
        else:
            P = (terminal.T @ terminal).tocsc()
            q = -(terminal.T @ target.point)
            constant = 0.5 * float(target.point @ target.point)
    else:
        raise ShapeError(f"unknown objective {objective!r}")

    return QpProblem(
        P=P,
        q=q,
        A=sp.vstack(blocks).tocsc(),
        l=np.concatenate(lower),
        u=np.concatenate(upper),
        constant=constant,
        layout=layout.as_dict(),
    )


def _layout_of(problem: QpProblem) -> GridLayout:
    info = problem.layout
    return GridLayout(
        info["n"], info["m"], info["N"], info["control_row"] - info["target_row"],
        problem.rows - info["control_row"], info["extra"],
    )


def minimal_terminal_distance(spec: OcpSpec) -> FeasibilityResult:
    """Closest approach of x(T) to the target over admissible discretised controls"""
    tolerance = spec.tolerances.feasibility_tol * (1.0 + float(np.linalg.norm(spec.initial)))
    if spec.target is None:
        return FeasibilityResult(True, 0.0, tolerance)
    problem = transcribe(spec, objective="distance")
    eps = max(spec.tolerances.qp_eps, DISTANCE_EPS_FRACTION * spec.tolerances.feasibility_tol)
    solution = solve_qp(problem, replace(spec.tolerances, qp_eps=eps))
    layout = _layout_of(problem)
    states, controls = layout.x(solution.x), layout.u(solution.x)
    if layout.extra:
        point = solution.x[-layout.extra :]
        distance = float(np.linalg.norm(states[-1] - point))
    else:
        distance = float(np.linalg.norm(states[-1] - spec.target.point))
    trajectory = simulate_ode(spec.system, spec.initial, controls, spec.h)
    return FeasibilityResult(distance <= tolerance, distance, tolerance, trajectory)


def energy_audit(trajectory: Trajectory, system: PhSystem) -> EnergyAudit:
    """
    Energy balance terms with Simpson quadrature on every interval.

    Midpoint states come from an RK4 half step with the interval's control.
    For descriptor systems the ODE part is stepped and the algebraic part
    follows the frozen control, which gives the correct left limits.
    """
    h, N = trajectory.h, trajectory.N
    controls = trajectory.controls
    if isinstance(system, PhDaeSystem):
        qw = quasi_weierstrass(system.E, system.A)
        F_V, F_W = qw.input_split(system.B)
        Vb, Wb = qw.V.basis, qw.W.basis
        Phi, Gamma = rk4_step_matrices(qw.C, F_V, h / 2)
        EV = system.E @ Vb

        def coords(x):
            xi, *_ = np.linalg.lstsq(EV, system.E @ x, rcond=None)
            return xi

        def point(xi, u):
            return Vb @ xi - Wb @ (F_W @ u)

        xis = [coords(x) for x in trajectory.states]
        triples = [
            (point(xis[k], controls[k]), point(Phi @ xis[k] + Gamma @ controls[k], controls[k]), point(xis[k + 1], controls[k]))
            for k in range(N)
        ]
    else:
        Phi, Gamma = rk4_step_matrices(system.A, system.B_tilde, h / 2)
        states = trajectory.states
        triples = [(states[k], Phi @ states[k] + Gamma @ controls[k], states[k + 1]) for k in range(N)]

    dissipated = supplied = 0.0
    for k, (left, mid, right) in enumerate(triples):
        u = controls[k]
        d = [dissipation_rate(system, x, u) for x in (left, mid, right)]
        s = [float(u @ output_of(system, x, u)) for x in (left, mid, right)]
        dissipated += h / 6.0 * (d[0] + 4.0 * d[1] + d[2])
        supplied += h / 6.0 * (s[0] + 4.0 * s[1] + s[2])
    change = hamiltonian(system, trajectory.states[-1]) - hamiltonian(system, trajectory.states[0])
    return EnergyAudit(change, dissipated, supplied)


def energy_balance_residual(trajectory: Trajectory, system: PhSystem) -> float:
    return energy_audit(trajectory, system).residual


def _discrete_adjoint(problem: QpProblem, solution: QpSolution) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    layout = _layout_of(problem)
    n, N = layout.n, layout.N
    y = solution.y
    initial = y[:n]
    defects = y[layout.defect_row : layout.target_row].reshape(N, n)
    target = y[layout.target_row : layout.control_row]
    controls = y[layout.control_row :]
    lam = np.empty((N + 1, n))
    lam[0] = initial
    lam[1:] = defects
    multipliers = {"initial": initial, "defects": defects, "target": target, "controls": controls}
    return lam, multipliers


def _stationarity(system: PhOdeSystem, lam: np.ndarray, trajectory: Trajectory, spec: OcpSpec) -> np.ndarray:
    """|B_tilde^T lam - 2(P^T Q x + S u)| on grid points with interior control, NaN elsewhere"""
    held = trajectory.controls_on_grid
    out = np.full(trajectory.N + 1, np.nan)
    margin = settings.INTERIOR_MARGIN
    for k, (x, u) in enumerate(zip(trajectory.states, held)):
        if spec.control_set.is_interior(u, margin):
            r = system.B_tilde.T @ lam[k] - 2.0 * (system.P.T @ (system.Q @ x) + system.S @ u)
            out[k] = float(np.linalg.norm(r))
    return out


def _check_not_degenerate(system: PhOdeSystem) -> None:
    if norm2(system.W) <= settings.STRUCTURE_TOL:
        raise DegenerateProblemError("W = 0: the supplied energy only depends on the end points")


def _solve_ode_problem(spec: OcpSpec) -> OcpSolution:
    system = spec.system
    _check_not_degenerate(system)
    problem = transcribe(spec)
    try:
        solution = solve_qp(problem, spec.tolerances)
    except InfeasibleProblemError as exc:
        details = dict(exc.details)
        try:
            details["terminal_distance"] = minimal_terminal_distance(spec).distance
        except InfeasibleProblemError:
            pass
        raise InfeasibleProblemError("target is not reachable within the horizon", details) from exc

    layout = _layout_of(problem)
    controls, states = layout.u(solution.x), layout.x(solution.x)
    held = np.vstack([controls, controls[-1:]])
    outputs = np.vstack([output_of(system, x, u) for x, u in zip(states, held)])
    trajectory = Trajectory(spec.times, states, controls, outputs)

    lam, multipliers = _discrete_adjoint(problem, solution)
    audit = energy_audit(trajectory, system)
    terminal_error = 0.0
    if spec.target is not None:
        if spec.target.kind == "point":
            terminal_error = float(np.linalg.norm(states[-1] - spec.target.point))
        else:
            gx = spec.target.G @ states[-1]
            terminal_error = float(max(0.0, np.max(spec.target.lower - gx), np.max(gx - spec.target.upper)))
    ball_excess = max(spec.control_set.excess(u) for u in controls)
    if ball_excess > 1e-8:
        logger.warning("control leaves the exact ball", excess=ball_excess)

    return OcpSolution(
        trajectory=trajectory,
        cost=audit.cost,
        objective=solution.objective,
        supplied_energy=audit.supplied,
        dissipated_energy=audit.dissipated,
        energy_balance_residual=audit.residual,
        kkt_residual=solution.kkt_residual,
        multipliers=multipliers,
        adjoint=lam,
        stationarity=_stationarity(system, lam, trajectory, spec),
        terminal_error=terminal_error,
        ball_excess=ball_excess,
        control_set_default=spec.control_set.is_default,
        status=solution.status,
        iterations=solution.iterations,
        system=system,
    )


def solve_ocp(spec: OcpSpec) -> OcpSolution:
    """
    Solve the minimal-energy-supply problem.

    Descriptor systems are reduced, solved in reduced coordinates and lifted;
    the lifted trajectory carries the DAE state and output.
    """
    if not spec.is_dae:
        solution = _solve_ode_problem(spec)
        logger.info("ocp solved", T=spec.horizon, N=spec.steps, cost=solution.cost, status=solution.status)
        return solution

    reduction = reduce_dae(spec.system, spec.tolerances.rank_tol)
    reduced_spec = spec.with_system(reduction.reduced, reduction.initial(spec.initial), reduction.target(spec.target))
    reduced = _solve_ode_problem(reduced_spec)
    lifted = reduction.lift(reduced.trajectory)
    logger.info(
        "ocp solved",
        T=spec.horizon,
        N=spec.steps,
        cost=reduced.cost,
        reduction=reduction.method,
        status=reduced.status,
    )
    return replace(reduced, trajectory=lifted, reduction=reduction, reduced_trajectory=reduced.trajectory)


def adjoint_trajectory(solution: OcpSolution, system: Optional[PhOdeSystem] = None, control_set=None) -> AdjointSamples:
    """
    Backward RK4 integration of lam' = -A^T lam + 2(QRQ x + QP u) from the
    terminal multiplier value, with the state interpolated linearly inside
    each interval and the control frozen.
    """
    system = system or solution.system
    trajectory = solution.ode_trajectory
    n, N, h = system.n, trajectory.N, trajectory.h
    W = system.W
    Wxx, Wxu = W[:n, :n], W[:n, n:]
    At = system.A.T
    states, controls = trajectory.states, trajectory.controls
    values = np.empty((N + 1, n))
    values[N] = solution.adjoint[N]

    def forcing(x, u):
        return 2.0 * (Wxx @ x + Wxu @ u)

    for k in range(N - 1, -1, -1):
        u = controls[k]
        g_right = forcing(states[k + 1], u)
        g_mid = forcing(0.5 * (states[k] + states[k + 1]), u)
        g_left = forcing(states[k], u)
        lam = values[k + 1]
        k1 = At @ lam - g_right
        k2 = At @ (lam + 0.5 * h * k1) - g_mid
        k3 = At @ (lam + 0.5 * h * k2) - g_mid
        k4 = At @ (lam + h * k3) - g_left
        values[k] = lam + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    stationarity = np.full(N + 1, np.nan)
    if control_set is not None:
        held = trajectory.controls_on_grid
        for k in range(N + 1):
            if control_set.is_interior(held[k], settings.INTERIOR_MARGIN):
                r = system.B_tilde.T @ values[k] - 2.0 * (system.P.T @ (system.Q @ states[k]) + system.S @ held[k])
                stationarity[k] = float(np.linalg.norm(r))
    return AdjointSamples(trajectory.times, values, stationarity)
