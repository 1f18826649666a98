import numpy as np
import pytest

from phturnpike.core.errors import IndexTooHighError, ReductionError, StructureError
from phturnpike.models.system import PhDaeSystem, hamiltonian
from phturnpike.services.decomp import (
    BeattieReduction,
    beattie_reduce,
    dissipative_input,
    eliminate_constraints,
    reduce_dae,
    spectral_split,
)
from phturnpike.services.ocp import simulate_ode
from phturnpike.services.pencil import solve_dae_ivp


@pytest.mark.parametrize("seed", range(5))
def test_beattie_block_identities(make_index1_dae, seed):
    rng = np.random.default_rng(seed)
    system = make_index1_dae(rng)
    reduction = beattie_reduce(system)

    assert reduction.n1 == 3 and reduction.n2 == 2
    assert all(value <= 1e-9 * max(1.0, np.linalg.cond(reduction.U)) for value in reduction.checks.values())
    b = reduction.blocks
    assert np.allclose(b["L12"], 0.0, atol=1e-9)
    assert np.allclose(b["J12"], b["R12"], atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_beattie_dissipation_identity(make_index1_dae, seed):
    rng = np.random.default_rng(seed)
    reduction = beattie_reduce(make_index1_dae(rng, m=2))
    for _ in range(5):
        z, u = rng.standard_normal(3), rng.standard_normal(2)
        scale = 1.0 + np.linalg.norm(z) ** 2 + np.linalg.norm(u) ** 2
        assert reduction.dissipation_identity_residual(z, u) <= 1e-8 * scale


def test_beattie_lift_carries_the_energy(make_index1_dae, rng):
    system = make_index1_dae(rng)
    reduction = beattie_reduce(system)
    z, u = rng.standard_normal(3), rng.standard_normal(1)
    x = reduction.lift_state(z, u)
    Q11 = reduction.blocks["Q11"]

    assert hamiltonian(system, x) == pytest.approx(0.5 * z @ Q11 @ z, rel=1e-9, abs=1e-12)
    assert reduction.algebraic_residual(z, reduction.recover_z2(z, u), u) <= 1e-9


def test_reduced_simulation_matches_the_descriptor_system(make_index1_dae, rng):
    system = make_index1_dae(rng)
    reduction = beattie_reduce(system)
    w0 = system.E @ rng.standard_normal(system.n)
    N, horizon = 200, 2.0
    controls = np.sin(np.linspace(0.0, 3.0, N))[:, None]

    dae = solve_dae_ivp(system, controls, w0, horizon)
    reduced = simulate_ode(reduction.reduced, reduction.initial(w0), controls, horizon / N)
    lifted = reduction.lift(reduced)

    assert np.max(np.abs(lifted.states - dae.states)) <= 1e-6
    assert np.allclose(lifted.states @ system.E.T, reduced.states @ reduction.energy_map().T, atol=1e-9)


def test_reduce_dae_prefers_beattie_for_index_one(make_index1_dae, rng):
    reduction = reduce_dae(make_index1_dae(rng))
    assert isinstance(reduction, BeattieReduction)
    assert reduction.method == "beattie"


def test_robot_needs_constraint_elimination(robot):
    with pytest.raises(IndexTooHighError):
        beattie_reduce(robot)

    reduction = reduce_dae(robot)
    assert reduction.method == "constraint_elimination"
    assert reduction.n1 == 3
    assert reduction.index == 2
    assert all(value <= 1e-8 for value in reduction.checks.values())


def test_constraint_elimination_lift_is_consistent(robot, rng):
    reduction = eliminate_constraints(robot)
    xi, u = rng.standard_normal(3), rng.standard_normal(robot.m)
    x = reduction.lift_state(xi, u)

    assert np.allclose(robot.E @ x, reduction.energy_map() @ xi, atol=1e-10)
    assert hamiltonian(robot, x) == pytest.approx(0.5 * xi @ reduction.reduced.Q @ xi, abs=1e-10)
    assert np.allclose(reduction.lift_matrix @ np.concatenate([xi, u]), x)


def test_constraint_elimination_initial_rejects_unreachable_datum(robot):
    reduction = eliminate_constraints(robot)
    w0 = np.zeros(robot.n)
    w0[2] = 1.0
    with pytest.raises(StructureError):
        reduction.initial(w0)


def test_reducing_without_dynamics_fails():
    n = 2
    system = PhDaeSystem(np.zeros((n, n)), np.zeros((n, n)), np.eye(n), np.eye(n), np.ones((n, 1)))
    with pytest.raises(ReductionError):
        beattie_reduce(system)


class TestSpectralSplit:
    def test_msd(self, msd):
        split = spectral_split(msd.J, msd.R, msd.Q)

        assert split.N1.dim == 2
        assert split.N2.dim == 1
        assert split.stability_margin == pytest.approx(2.0, abs=1e-8)
        assert split.checks["N1_in_kerRQ"]
        assert split.checks["kerQ_in_N1"]
        assert split.checks["invariance"] <= 1e-10
        assert not split.flagged

        eigenvalues = np.linalg.eigvals(split.A1)
        assert np.allclose(eigenvalues.real, 0.0, atol=1e-8)
        assert np.allclose(np.abs(eigenvalues.imag), np.sqrt(2.0), atol=1e-8)
        assert np.allclose(msd.A @ split.N1.basis, split.N1.basis @ split.A1, atol=1e-10)

    def test_conservative_system_has_no_dissipative_part(self):
        J = np.array([[0.0, 1.0], [-1.0, 0.0]])
        split = spectral_split(J, np.zeros((2, 2)), np.eye(2))

        assert split.N1.dim == 2 and split.N2.dim == 0
        assert split.stability_margin == float("inf")

    def test_dissipative_input_lies_in_hurwitz_subspace(self, msd):
        split = spectral_split(msd.J, msd.R, msd.Q)
        B2 = dissipative_input(split, msd.B_tilde)

        assert split.N2.contains(B2[:, 0])
        B1 = msd.B_tilde - B2
        assert split.N1.contains(B1[:, 0])
