import numpy as np
import pytest

from phturnpike.core.errors import DegenerateProblemError, NumericalError, ShapeError, StructureError
from phturnpike.core.numerics import (
    SubspaceBasis,
    as_matrix,
    classify_spectrum,
    dist_to_subspace,
    expm,
    max_eigenvalue,
    min_positive_eigenvalue,
    nullspace,
    ordered_block_split,
    orthogonal_complement,
    psd_sqrt,
    range_basis,
    rank,
    real_schur,
    rk4_step_matrices,
    subspace_intersect,
    subspace_sum,
)


def test_rank_of_identity_and_zero():
    assert rank(np.eye(3), 1e-10) == 3
    assert rank(np.zeros((2, 2)), 1e-10) == 0


def test_rank_floor_discards_roundoff():
    noise = np.array([[6.1e-17, 0.0], [0.0, 1.4e-17]])
    assert rank(noise, 1e-9) == 2
    assert rank(noise, 1e-9, floor=1e-14) == 0
    assert rank(np.diag([1.0, 1e-6]), 1e-9, floor=1e-14) == 2


def test_rank_rejects_non_positive_tolerance():
    with pytest.raises(ValueError):
        rank(np.eye(2), 0.0)


def test_as_matrix_rejects_non_finite_entries():
    with pytest.raises(ShapeError):
        as_matrix([[1.0, np.nan]])


def test_nullspace_is_orthonormal_and_annihilated(rng):
    M = rng.standard_normal((3, 5))
    kernel = nullspace(M)
    assert kernel.dim == 2
    assert np.allclose(kernel.basis.T @ kernel.basis, np.eye(2), atol=1e-10)
    assert np.linalg.norm(M @ kernel.basis) < 1e-10


def test_range_and_complement_split_the_space(rng):
    M = rng.standard_normal((5, 2))
    image = range_basis(M)
    complement = orthogonal_complement(image)
    assert image.dim + complement.dim == 5
    assert np.allclose(image.projector() + complement.projector(), np.eye(5), atol=1e-10)


def test_intersection_of_two_planes_is_a_line():
    xy = SubspaceBasis(np.eye(3)[:, :2])
    yz = SubspaceBasis(np.eye(3)[:, 1:])
    line = subspace_intersect([xy, yz])
    assert line.dim == 1
    assert abs(abs(line.basis[1, 0]) - 1.0) < 1e-10


def test_sum_of_subspaces():
    x = SubspaceBasis(np.eye(3)[:, :1])
    y = SubspaceBasis(np.eye(3)[:, 1:2])
    assert subspace_sum([x, y]).dim == 2


def test_subspace_ambient_mismatch():
    with pytest.raises(ShapeError):
        subspace_intersect([SubspaceBasis.full(2), SubspaceBasis.full(3)])


def test_non_orthonormal_basis_is_rejected():
    with pytest.raises(NumericalError):
        SubspaceBasis(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_distance_to_subspace():
    plane = SubspaceBasis(np.eye(3)[:, :2])
    assert dist_to_subspace([1.0, 2.0, -3.0], plane) == pytest.approx(3.0)
    assert dist_to_subspace([1.0, 2.0], SubspaceBasis.zero(2)) == pytest.approx(np.sqrt(5.0))
    assert plane.contains([4.0, -1.0, 0.0])


def test_real_schur_reconstructs(rng):
    for n in range(2, 11):
        M = rng.standard_normal((n, n))
        form = real_schur(M)
        assert np.linalg.norm(M - form.Z @ form.T @ form.Z.T) <= 1e-8 * np.linalg.norm(M, 2)
        assert np.all(np.diff(form.eigenvalues.real) >= -1e-12)


def test_ordered_block_split_reconstructs(rng):
    M = rng.standard_normal((6, 6))
    split = ordered_block_split(M, lambda z: z.real < 0)
    n1 = split.M1.shape[0]
    blocks = np.zeros_like(M)
    blocks[:n1, :n1] = split.M1
    blocks[n1:, n1:] = split.M2
    assert np.allclose(split.S @ blocks @ np.linalg.inv(split.S), M, atol=1e-8)
    assert np.all(np.linalg.eigvals(split.M1).real < 0)


def test_zero_cluster_of_jordan_block():
    jordan = np.diag([1.0, 1.0], k=1)
    spectrum = classify_spectrum(jordan)
    assert spectrum.zero_count == 3
    assert spectrum.unstable.size == 0


def test_imaginary_clusters():
    rotation = np.array([[0.0, 2.0], [-2.0, 0.0]])
    spectrum = classify_spectrum(rotation)
    assert spectrum.zero_count == 0
    assert spectrum.imaginary_clusters() == pytest.approx([2.0])


def test_expm_semigroup(rng):
    M = rng.standard_normal((4, 4)) - 3.0 * np.eye(4)
    for s, t in rng.uniform(0.0, 2.0, size=(5, 2)):
        assert np.allclose(expm(M, s + t), expm(M, s) @ expm(M, t), atol=1e-8)


def test_expm_of_zero_is_identity():
    assert np.array_equal(expm(np.zeros((3, 3)), 5.0), np.eye(3))


def test_psd_sqrt_squares_back(rng):
    L = rng.standard_normal((4, 2))
    M = L @ L.T
    root = psd_sqrt(M)
    assert np.allclose(root @ root, M, atol=1e-8)


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(StructureError):
        psd_sqrt(np.diag([1.0, -1.0]))


def test_eigenvalue_bounds_on_distance_to_kernel(rng):
    L = rng.standard_normal((5, 3))
    M = L @ L.T
    lam_min, lam_max = min_positive_eigenvalue(M), max_eigenvalue(M)
    kernel = nullspace(M)
    for x in rng.standard_normal((20, 5)):
        d2 = dist_to_subspace(x, kernel) ** 2
        value = float(x @ M @ x)
        assert lam_min * d2 <= value * (1 + 1e-8) + 1e-12
        assert value <= lam_max * d2 * (1 + 1e-8) + 1e-12


def test_min_positive_eigenvalue_needs_a_positive_one():
    assert min_positive_eigenvalue(np.diag([0.0, 2.0, 3.0])) == pytest.approx(2.0)
    with pytest.raises(DegenerateProblemError):
        min_positive_eigenvalue(np.zeros((2, 2)))


def test_rk4_step_matches_exponential():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    Phi, Gamma = rk4_step_matrices(A, B, 0.01)
    assert np.allclose(Phi, expm(A, 0.01), atol=1e-10)
    exact = np.linalg.solve(A, (expm(A, 0.01) - np.eye(2)) @ B)
    assert np.allclose(Gamma, exact, atol=1e-10)
