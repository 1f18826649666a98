"""
Turnpike diagnostics.

Distance profiles of optimal solutions to the subspace of zero-dissipation
input-state pairs, the integral and measure statistics built on them, the
theoretical bound F(x0) with its constants, and the adjoint bound with
C(t_c). `multi_horizon_report` ties everything together for a family of
horizons.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from phturnpike.core.config import settings
from phturnpike.core.errors import (
    InfeasibleProblemError,
    NumericalError,
    PhTurnpikeError,
    ShapeError,
    StructureError,
)
from phturnpike.core.numerics import (
    SubspaceBasis,
    as_matrix,
    as_vector,
    max_eigenvalue,
    min_positive_eigenvalue,
    norm2,
    nullspace,
)
from phturnpike.models.base import Base, to_plain
from phturnpike.models.ocp import OcpSpec
from phturnpike.models.sets import ControlSet
from phturnpike.models.system import PhOdeSystem, PhSystem
from phturnpike.services.control import (
    MinimalTimeEstimate,
    SteadyState,
    controllability_gramian,
    exp_growth_bound,
    minimal_time_estimate,
    reachable_optimal_steady_state,
)
from phturnpike.services.decomp import reduce_dae
from phturnpike.services.ocp import LAMBDA0, OcpSolution, minimal_terminal_distance, solve_ocp

logger = structlog.get_logger(__name__)

NEAR_RADIUS = 0.1
MID_WINDOW = (0.3, 0.7)
DEFAULT_TC_FRACTION = 0.1

Horizon = Tuple[float, int]


@dataclass(frozen=True, repr=False, eq=False)
class TurnpikeBound(Base):
    """F(x0) = (G0 + G1 + G2) / lambda_min, valid for horizons beyond T0 + T1"""

    F: float
    T_threshold: float
    G0: float
    G1: float
    G2: float
    M: float
    lambda_min: float
    T0: float
    T1: float
    u_max: float
    u1: float

    @property
    def G(self) -> float:
        return self.G0 + self.G1 + self.G2


@dataclass(frozen=True, repr=False, eq=False)
class AdjointBound(Base):
    lhs: float
    rhs: float
    C: float
    alpha: float
    M: float
    t_c: float
    precondition_met: bool

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def status(self) -> str:
        return "ok" if self.precondition_met else "precondition unmet"


@dataclass(frozen=True, repr=False, eq=False)
class TurnpikeRecord(Base):
    T: float
    N: int
    status: str
    integral_stat: Optional[float] = None
    measure_stats: Dict[float, float] = field(default_factory=dict)
    measure_bounds: Dict[float, float] = field(default_factory=dict)
    F: Optional[float] = None
    F_direct: Optional[float] = None
    preconditions_met: bool = False
    integral_bound_holds: Optional[bool] = None
    measure_bounds_hold: Optional[bool] = None
    near_fraction: Optional[float] = None
    adjoint: Optional[AdjointBound] = None
    adjoint_mid_ratio: Optional[float] = None
    cost: Optional[float] = None
    terminal_error: Optional[float] = None
    error: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.error is None


@dataclass(frozen=True, repr=False, eq=False)
class TurnpikeReport(Base):
    """
    Records ordered by horizon. `profiles` and `solutions` are keyed by T and
    are kept out of `to_dict`; the CLI writes them as CSV files.
    """

    subspace_kind: str
    subspace: SubspaceBasis
    records: List[TurnpikeRecord]
    eps_grid: List[float]
    bound: Optional[TurnpikeBound]
    steady_state: Optional[SteadyState]
    T0_estimate: Optional[MinimalTimeEstimate]
    T1_estimate: Optional[MinimalTimeEstimate]
    lambda_min: float
    lambda_max: float
    tolerances: Dict[str, float]
    notes: List[str] = field(default_factory=list)
    profiles: Dict[float, np.ndarray] = field(default_factory=dict)
    solutions: Dict[float, OcpSolution] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            name: to_plain(getattr(self, name))
            for name in (
                "subspace_kind",
                "subspace",
                "records",
                "eps_grid",
                "bound",
                "steady_state",
                "T0_estimate",
                "T1_estimate",
                "lambda_min",
                "lambda_max",
                "tolerances",
                "notes",
            )
        }

    def record(self, T: float) -> TurnpikeRecord:
        for rec in self.records:
            if abs(rec.T - T) <= 1e-12 * max(1.0, T):
                return rec
        raise KeyError(T)


def distance_profile(solution: OcpSolution, subspace: SubspaceBasis, joint: bool) -> np.ndarray:
    """
    dist((x_k, u_k), V) on every grid point, or dist(x_k, V) when not joint.

    The joint profile lives on the system the QP was posed on; the
    state-only profile uses the trajectory the solution reports, which for
    descriptor input is the lifted one.
    """
    if joint:
        trajectory = solution.ode_trajectory
        points = np.hstack([trajectory.states, trajectory.controls_on_grid])
    else:
        points = solution.trajectory.states
    if points.shape[1] != subspace.ambient:
        raise ShapeError(
            "subspace lives in the wrong ambient space", {"expected": points.shape[1], "got": subspace.ambient}
        )
    residual = points @ subspace.complement_projector().T
    return np.linalg.norm(residual, axis=1)


def integral_turnpike_stat(profile, h: float) -> float:
    """h * sum of dist^2 over left endpoints"""
    profile = as_vector(profile, "profile")
    return float(h * np.sum(profile[:-1] ** 2))


def measure_turnpike_stat(profile, h: float, eps: float) -> float:
    """Time spent farther than eps from the subspace"""
    if eps <= 0:
        raise ShapeError("eps must be positive", {"eps": eps})
    profile = as_vector(profile, "profile")
    return float(h * np.count_nonzero(profile[:-1] > eps))


def near_fraction(profile, radius: float = NEAR_RADIUS) -> float:
    profile = as_vector(profile, "profile")
    return float(np.count_nonzero(profile <= radius) / profile.size)


def _window_integral(values: np.ndarray, times: np.ndarray, start: float, stop: float, h: float) -> float:
    eps = 1e-9 * h
    mask = (times[:-1] >= start - eps) & (times[:-1] < stop - eps)
    return float(h * np.sum(values[:-1][mask]))


def adjoint_mid_ratio(adjoint: np.ndarray, times: np.ndarray) -> float:
    """int over [0.3T, 0.7T] of |lam|^2 relative to the whole horizon"""
    h = float(times[1] - times[0])
    T = float(times[-1])
    energy = np.sum(np.asarray(adjoint) ** 2, axis=1)
    total = _window_integral(energy, times, 0.0, T, h)
    if total <= 0.0:
        return 0.0
    return _window_integral(energy, times, MID_WINDOW[0] * T, MID_WINDOW[1] * T, h) / total


def turnpike_bound(
    spec: OcpSpec,
    steady: SteadyState,
    T0: float,
    T1: float,
    u1: Optional[float] = None,
) -> TurnpikeBound:
    """
    Constants of the integral turnpike estimate for the pH-ODE in `spec`.

    G0 bounds the cost of steering x0 to the steady state within T0, G1 the
    cost of steering from the steady state into the target within T1 with
    controls of norm at most u1, and G2 the terminal energy of that last arc.
    """
    system = spec.system
    if not isinstance(system, PhOdeSystem):
        raise ShapeError("turnpike_bound works on a pH-ODE; reduce descriptor systems first")
    if not steady.optimal:
        raise StructureError("steady state is not optimal", {"dissipation_residual": steady.dissipation_residual})
    if not spec.control_set.is_interior(steady.u, settings.INTERIOR_MARGIN):
        raise StructureError("steady-state control is not interior to the control set")
    if T0 < 0 or T1 < 0:
        raise ShapeError("steering times must be non-negative", {"T0": T0, "T1": T1})

    lam_min = min_positive_eigenvalue(system.W, spec.tolerances.rank_tol)
    u_max = spec.control_set.u_max
    u1 = u_max if u1 is None else min(float(u1), u_max)
    horizon = max(T0, T1) if max(T0, T1) > 0 else spec.horizon
    M = exp_growth_bound(system.A, horizon).M

    W_norm = norm2(system.W)
    Q_norm = norm2(system.Q)
    B_norm = norm2(system.B_tilde)
    x0_norm = float(np.linalg.norm(spec.initial))
    xe_norm = float(np.linalg.norm(steady.x))

    G0 = W_norm * T0 * ((1.0 + M * T0) ** 2 * (x0_norm + B_norm * T0 * u_max) ** 2 + u_max**2)
    arc = (1.0 + M * T1) ** 2 * (xe_norm + B_norm * T1 * u1) ** 2
    G1 = W_norm * T1 * (arc + u1**2)
    G2 = 0.5 * Q_norm * arc
    F = (G0 + G1 + G2) / lam_min
    logger.debug("turnpike bound", F=F, G0=G0, G1=G1, G2=G2, M=M, lambda_min=lam_min)
    return TurnpikeBound(F, T0 + T1, G0, G1, G2, M, lam_min, T0, T1, u_max, u1)


def adjoint_turnpike_stat(
    adjoint,
    t_c: float,
    h: float,
    system: PhOdeSystem,
    states,
    controls,
    control_set: ControlSet,
    lambda0: float = LAMBDA0,
) -> AdjointBound:
    """
    Both sides of the adjoint estimate

        int_{2 t_c}^{T - t_c} |lam|^2  <=  t_c C(t_c) int_{t_c}^{T - t_c} |W (x; u)|^2

    with C(t_c) = 8 lambda0^2 / alpha * max(1, |B_tilde|^2 (1 + M t_c)^2 t_c^2).
    `controls` holds one value per grid point.
    """
    adjoint = as_matrix(adjoint, "adjoint")
    states = as_matrix(states, "states")
    controls = as_matrix(controls, "controls")
    K = adjoint.shape[0]
    if states.shape[0] != K or controls.shape[0] != K:
        raise ShapeError("adjoint, states and controls must share the grid")
    T = h * (K - 1)
    if not 0 < t_c < T / 4:
        raise ShapeError("t_c must lie in (0, T/4)", {"t_c": t_c, "T": T})

    gramian = controllability_gramian(system.A, system.B_tilde, t_c)
    if gramian.alpha <= 0.0:
        raise StructureError("(A, B_tilde) is not controllable, alpha(t_c) = 0", {"t_c": t_c})
    M = exp_growth_bound(system.A, t_c).M
    B_norm = norm2(system.B_tilde)
    C = 8.0 * lambda0**2 / gramian.alpha * max(1.0, B_norm**2 * (1.0 + M * t_c) ** 2 * t_c**2)

    times = np.linspace(0.0, T, K)
    dissipation = np.hstack([states, controls]) @ system.W.T
    lhs = _window_integral(np.sum(adjoint**2, axis=1), times, 2.0 * t_c, T - t_c, h)
    rhs = t_c * C * _window_integral(np.sum(dissipation**2, axis=1), times, t_c, T - t_c, h)

    window = (times >= t_c - 1e-9 * h) & (times <= T - t_c + 1e-9 * h)
    interior = all(control_set.is_interior(u, settings.INTERIOR_MARGIN) for u in controls[window])
    if not interior:
        logger.warning("adjoint bound precondition unmet", t_c=t_c, T=T)
    return AdjointBound(lhs, rhs, C, gramian.alpha, M, t_c, interior)


@dataclass
class _BoundInputs:
    """What every horizon of a report shares"""

    ode_spec: OcpSpec
    joint: bool
    subspace: SubspaceBasis
    subspace_kind: str
    lambda_min: float
    lambda_max: float
    bound: Optional[TurnpikeBound] = None
    F: Optional[float] = None
    F_direct: Optional[float] = None
    steady: Optional[SteadyState] = None
    T0: Optional[MinimalTimeEstimate] = None
    T1: Optional[MinimalTimeEstimate] = None
    notes: List[str] = field(default_factory=list)


def turnpike_subspace(system: PhSystem, tol: Optional[float] = None) -> Tuple[SubspaceBasis, bool]:
    """ker W in the joint input-state space for ODEs, ker RQ in state space for DAEs"""
    tol = tol or settings.RANK_TOL
    if isinstance(system, PhOdeSystem):
        return nullspace(system.W, tol), True
    return nullspace(system.R @ system.Q, tol), False


def _ode_form(spec: OcpSpec) -> Tuple[OcpSpec, bool, SubspaceBasis, str, float, float]:
    tol = spec.tolerances.rank_tol
    subspace, joint = turnpike_subspace(spec.system, tol)
    if joint:
        W = spec.system.W
        return spec, True, subspace, "ker W", min_positive_eigenvalue(W, tol), max_eigenvalue(W)
    system = spec.system
    reduction = reduce_dae(system, tol)
    ode_spec = spec.with_system(reduction.reduced, reduction.initial(spec.initial), reduction.target(spec.target))
    QRQ = system.Q.T @ system.R @ system.Q
    return ode_spec, False, subspace, "ker RQ", min_positive_eigenvalue(QRQ, tol), max_eigenvalue(QRQ)


def _prepare(spec: OcpSpec, T_hi: float, workers: int) -> _BoundInputs:
    ode_spec, joint, subspace, kind, lam_min, lam_max = _ode_form(spec)
    inputs = _BoundInputs(ode_spec, joint, subspace, kind, lam_min, lam_max)
    system, control_set = ode_spec.system, ode_spec.control_set

    steady = reachable_optimal_steady_state(system, ode_spec.initial, control_set, spec.tolerances.rank_tol)
    if steady is None:
        inputs.notes.append("no optimal steady state with interior control is reachable from x0")
        return inputs
    inputs.steady = steady
    try:
        T0 = minimal_time_estimate(
            system, ode_spec.initial, steady.x, control_set, T_hi, workers=workers, tolerances=spec.tolerances
        )
        u1 = 0.0
        T1 = MinimalTimeEstimate(0.0, 0.0, 0)
        if ode_spec.target is not None:
            T1 = minimal_time_estimate(
                system, steady.x, ode_spec.target, control_set, T_hi, workers=workers, tolerances=spec.tolerances
            )
            if T1.upper > 0:
                steps = settings.MIN_TIME_STEPS
                arc = OcpSpec(system, T1.upper, steps, steady.x, ode_spec.target, control_set, spec.tolerances)
                result = minimal_terminal_distance(arc)
                u1 = float(np.max(np.linalg.norm(result.trajectory.controls, axis=1)))
    except (InfeasibleProblemError, NumericalError) as exc:
        inputs.notes.append(f"steering times unavailable: {exc.message}")
        logger.warning("steering times unavailable", reason=exc.message, error=type(exc).__name__)
        return inputs
    inputs.T0, inputs.T1 = T0, T1

    bound = turnpike_bound(ode_spec, steady, T0.upper, T1.upper, u1)
    inputs.bound = bound
    if joint:
        inputs.F = bound.F
    else:
        inputs.F = norm2(system.W) / lam_min * bound.F
        inputs.F_direct = bound.G / lam_min
    if T0.width > 0 or T1.width > 0:
        inputs.notes.append("steering times are bisection upper endpoints; F is conservative")
    return inputs


def _solve_horizon(spec: OcpSpec, horizon: Horizon) -> Tuple[Horizon, Union[OcpSolution, PhTurnpikeError]]:
    T, N = horizon
    try:
        return horizon, solve_ocp(spec.with_horizon(T, N))
    except InfeasibleProblemError as exc:
        logger.warning("horizon infeasible", T=T, N=N, reason=exc.message)
        return horizon, exc
    except NumericalError as exc:
        logger.warning("horizon not solved", T=T, N=N, reason=exc.message, error=type(exc).__name__)
        return horizon, exc
    except PhTurnpikeError as exc:
        exc.details.setdefault("horizon", T)
        raise


def _record(
    inputs: _BoundInputs,
    horizon: Horizon,
    solution: OcpSolution,
    eps_grid: Sequence[float],
    tc_fraction: float,
) -> Tuple[TurnpikeRecord, np.ndarray]:
    T, N = horizon
    h = T / N
    profile = distance_profile(solution, inputs.subspace, inputs.joint)
    integral = integral_turnpike_stat(profile, h)
    measures = {eps: measure_turnpike_stat(profile, h, eps) for eps in eps_grid}

    F = inputs.F
    preconditions = inputs.bound is not None and T >= inputs.bound.T_threshold
    measure_bounds: Dict[float, float] = {}
    integral_holds = measures_hold = None
    if F is not None:
        measure_bounds = {eps: F / eps**2 for eps in eps_grid}
        integral_holds = integral <= F
        measures_hold = all(measures[eps] <= measure_bounds[eps] for eps in eps_grid)
        if preconditions and not (integral_holds and measures_hold):
            logger.warning("turnpike bound violated", T=T, integral=integral, F=F)

    ode = solution.ode_trajectory
    adjoint = None
    try:
        adjoint = adjoint_turnpike_stat(
            solution.adjoint,
            tc_fraction * T,
            h,
            solution.system,
            ode.states,
            ode.controls_on_grid,
            inputs.ode_spec.control_set,
            solution.lambda0,
        )
    except StructureError as exc:
        logger.info("adjoint bound unavailable", T=T, reason=exc.message)

    record = TurnpikeRecord(
        T=float(T),
        N=int(N),
        status=solution.status,
        integral_stat=integral,
        measure_stats=measures,
        measure_bounds=measure_bounds,
        F=F,
        F_direct=inputs.F_direct,
        preconditions_met=preconditions,
        integral_bound_holds=integral_holds,
        measure_bounds_hold=measures_hold,
        near_fraction=near_fraction(profile),
        adjoint=adjoint,
        adjoint_mid_ratio=adjoint_mid_ratio(solution.adjoint, ode.times),
        cost=solution.cost,
        terminal_error=solution.terminal_error,
    )
    return record, profile


def multi_horizon_report(
    spec: OcpSpec,
    horizons: Sequence[Horizon],
    eps_grid: Optional[Sequence[float]] = None,
    workers: Optional[int] = None,
    tc_fraction: float = DEFAULT_TC_FRACTION,
) -> TurnpikeReport:
    """
    Solve `spec` on every (T, N) in `horizons` and assemble the statistics.

    ODE input is measured against ker W in the joint input-state space;
    descriptor input against ker RQ on the lifted states. Infeasible or
    numerically failed horizons are kept as flagged records without
    statistics.
    """
    if not horizons:
        raise ShapeError("at least one horizon is required")
    eps_grid = sorted(float(e) for e in (eps_grid or settings.eps_values))
    workers = max(1, int(workers or settings.WORKERS))
    T_hi = max(float(T) for T, _ in horizons)

    inputs = _prepare(spec, T_hi, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(lambda hz: _solve_horizon(spec, hz), horizons))

    records: List[TurnpikeRecord] = []
    profiles: Dict[float, np.ndarray] = {}
    solutions: Dict[float, OcpSolution] = {}
    for (T, N), outcome in sorted(outcomes, key=lambda item: item[0][0]):
        if isinstance(outcome, PhTurnpikeError):
            status = "infeasible" if isinstance(outcome, InfeasibleProblemError) else "failed"
            records.append(TurnpikeRecord(T=float(T), N=int(N), status=status, error=outcome.message))
            inputs.notes.append(f"horizon T={T:g} skipped: {outcome.message}")
            continue
        record, profile = _record(inputs, (T, N), outcome, eps_grid, tc_fraction)
        records.append(record)
        profiles[float(T)] = profile
        solutions[float(T)] = outcome

    report = TurnpikeReport(
        subspace_kind=inputs.subspace_kind,
        subspace=inputs.subspace,
        records=records,
        eps_grid=eps_grid,
        bound=inputs.bound,
        steady_state=inputs.steady,
        T0_estimate=inputs.T0,
        T1_estimate=inputs.T1,
        lambda_min=inputs.lambda_min,
        lambda_max=inputs.lambda_max,
        tolerances=spec.tolerances.to_dict(),
        notes=inputs.notes,
        profiles=profiles,
        solutions=solutions,
    )
    logger.info(
        "turnpike report",
        horizons=[r.T for r in records],
        subspace=inputs.subspace_kind,
        F=inputs.F,
        solved=sum(r.solved for r in records),
    )
    return report
