"""
Dense linear-algebra kernels shared by every service module.

Everything here is a pure function of its arguments: no settings lookups, no
logging, no mutable module state. Structural decisions (ranks, kernels, the
imaginary-axis test) are parameterised by explicit relative tolerances.
"""

from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.linalg import LinAlgError

from phturnpike.core.errors import DegenerateProblemError, NumericalError, ShapeError, StructureError

DEFAULT_RANK_TOL = 1e-9
DEFAULT_SPECTRAL_TOL = 1e-8
DEFAULT_SYMMETRY_TOL = 1e-10
ORTHONORMALITY_TOL = 1e-10


def as_matrix(value, name: str = "matrix", shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Coerce to a finite 2-D float array"""
    arr = np.array(value, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be two-dimensional", {"name": name, "ndim": int(arr.ndim)})
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries", {"name": name})
    if shape is not None and arr.shape != tuple(shape):
        raise ShapeError(
            f"{name} has shape {arr.shape}, expected {tuple(shape)}",
            {"name": name, "shape": list(arr.shape), "expected": list(shape)},
        )
    return arr


def as_vector(value, name: str = "vector", size: Optional[int] = None) -> np.ndarray:
    """Coerce to a finite 1-D float array"""
    arr = np.array(value, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries", {"name": name})
    if size is not None and arr.size != size:
        raise ShapeError(f"{name} has length {arr.size}, expected {size}", {"name": name})
    return arr


def require_square(M: np.ndarray, name: str = "matrix") -> int:
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square", {"name": name, "shape": list(M.shape)})
    return M.shape[0]


def norm2(M: np.ndarray) -> float:
    """Spectral norm, 0 for empty input"""
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Column-orthonormal basis; zero columns represent the trivial subspace."""

    basis: np.ndarray
    ambient: int = field(default=-1)

    def __post_init__(self) -> None:
        basis = np.array(self.basis, dtype=float)
        if basis.ndim != 2:
            raise ShapeError("subspace basis must be two-dimensional")
        ambient = basis.shape[0] if self.ambient < 0 else self.ambient
        if basis.shape[0] != ambient:
            raise ShapeError("subspace basis rows must equal the ambient dimension")
        k = basis.shape[1]
        if k:
            gram_error = np.linalg.norm(basis.T @ basis - np.eye(k), 2)
            if gram_error > ORTHONORMALITY_TOL * max(1, k):
                raise NumericalError("subspace basis is not orthonormal", {"residual": float(gram_error)})
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "ambient", ambient)

    @classmethod
    def zero(cls, n: int) -> "SubspaceBasis":
        return cls(np.zeros((n, 0)), n)

    @classmethod
    def full(cls, n: int) -> "SubspaceBasis":
        return cls(np.eye(n), n)

    @classmethod
    def spanned_by(cls, columns, tol: float = DEFAULT_RANK_TOL) -> "SubspaceBasis":
        """Orthonormal basis of the column span"""
        return range_basis(as_matrix(columns, "columns"), tol)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def complement_projector(self) -> np.ndarray:
        return np.eye(self.ambient) - self.projector()

    def contains(self, v, tol: float = 1e-8) -> bool:
        v = as_vector(v, size=self.ambient)
        return dist_to_subspace(v, self) <= tol * max(1.0, float(np.linalg.norm(v)))

    def contains_subspace(self, other: "SubspaceBasis", tol: float = 1e-8) -> bool:
        if other.ambient != self.ambient:
            raise ShapeError("ambient dimension mismatch")
        return all(dist_to_subspace(other.basis[:, j], self) <= tol for j in range(other.dim))

    def to_list(self) -> List[List[float]]:
        return self.basis.T.tolist()

    def __repr__(self) -> str:
        return f"<SubspaceBasis(dim={self.dim}, ambient={self.ambient})>"


def _singular_values(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except LinAlgError as exc:
        raise NumericalError("singular value decomposition failed") from exc


def _rank_from_singular_values(s: np.ndarray, tol: float, floor: float = 0.0) -> int:
    if s.size == 0:
        return 0
    scale = s[0] if s[0] > 0 else 1.0
    return int(np.sum(s > max(tol * scale, floor)))


def rank(M, tol: float = DEFAULT_RANK_TOL, floor: float = 0.0) -> int:
    """
    Number of singular values above tol times the largest one.

    Singular values at or below the absolute level `floor` never count, so a
    matrix made of roundoff alone has rank 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = as_matrix(M)
    return _rank_from_singular_values(_singular_values(M), tol, floor)


def nullspace(M, tol: float = DEFAULT_RANK_TOL, floor: float = 0.0) -> SubspaceBasis:
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = as_matrix(M)
    rows, cols = M.shape
    if cols == 0:
        return SubspaceBasis.zero(0)
    if rows == 0:
        return SubspaceBasis.full(cols)
    try:
        _, s, vt = np.linalg.svd(M, full_matrices=True)
    except LinAlgError as exc:
        raise NumericalError("singular value decomposition failed") from exc
    r = _rank_from_singular_values(s, tol, floor)
    return SubspaceBasis(vt[r:].T.copy(), cols)


def range_basis(M, tol: float = DEFAULT_RANK_TOL, floor: float = 0.0) -> SubspaceBasis:
    """Orthonormal basis of im M"""
    M = as_matrix(M)
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return SubspaceBasis.zero(rows)
    try:
        u, s, _ = np.linalg.svd(M, full_matrices=False)
    except LinAlgError as exc:
        raise NumericalError("singular value decomposition failed") from exc
    r = _rank_from_singular_values(s, tol, floor)
    return SubspaceBasis(u[:, :r].copy(), rows)


def orthogonal_complement(S: SubspaceBasis, tol: float = DEFAULT_RANK_TOL) -> SubspaceBasis:
    if S.is_trivial:
        return SubspaceBasis.full(S.ambient)
    return nullspace(S.basis.T, tol)


def subspace_intersect(bases: Sequence[SubspaceBasis], tol: float = 1e-8) -> SubspaceBasis:
    """Intersection as the kernel of the stacked complement projectors"""
    if not bases:
        raise ShapeError("at least one subspace is required")
    n = bases[0].ambient
    if any(b.ambient != n for b in bases):
        raise ShapeError("ambient dimension mismatch", {"ambients": [b.ambient for b in bases]})
    if n == 0:
        return SubspaceBasis.zero(0)
    stacked = np.vstack([b.complement_projector() for b in bases])
    if not np.any(stacked):
        return SubspaceBasis.full(n)
    return nullspace(stacked, tol)


def subspace_sum(bases: Sequence[SubspaceBasis], tol: float = DEFAULT_RANK_TOL) -> SubspaceBasis:
    if not bases:
        raise ShapeError("at least one subspace is required")
    n = bases[0].ambient
    if any(b.ambient != n for b in bases):
        raise ShapeError("ambient dimension mismatch")
    return range_basis(np.hstack([b.basis for b in bases]), tol)


def dist_to_subspace(v, S: SubspaceBasis) -> float:
    v = as_vector(v)
    if v.size != S.ambient:
        raise ShapeError("dimension mismatch", {"vector": int(v.size), "ambient": S.ambient})
    if S.is_trivial:
        return float(np.linalg.norm(v))
    return float(np.linalg.norm(v - S.basis @ (S.basis.T @ v)))


def rcond(M: np.ndarray) -> float:
    """Reciprocal 2-norm condition number, 0 for singular input"""
    s = _singular_values(M)
    if s.size == 0:
        return 1.0
    if s[0] == 0:
        return 0.0
    return float(s[-1] / s[0])


def symmetric_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def skew_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M - M.T)


def psd_deficit(M: np.ndarray) -> float:
    """How far the symmetric part of M is from PSD (0 when PSD)"""
    if M.size == 0:
        return 0.0
    return max(0.0, -float(np.linalg.eigvalsh(symmetric_part(M))[0]))


def real_embedding(M: np.ndarray) -> np.ndarray:
    """2n x 2n real matrix acting like the complex matrix M on (Re x, Im x)"""
    re, im = np.real(M), np.imag(M)
    return np.block([[re, -im], [im, re]])


class SchurForm(NamedTuple):
    Z: np.ndarray
    T: np.ndarray
    eigenvalues: np.ndarray


def schur_block_eigenvalues(T: np.ndarray) -> np.ndarray:
    """Eigenvalues read off the 1x1 and 2x2 diagonal blocks"""
    n = T.shape[0]
    values: List[complex] = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            values.extend(np.linalg.eigvals(T[i : i + 2, i : i + 2]).tolist())
            i += 2
        else:
            values.append(complex(T[i, i], 0.0))
            i += 1
    return np.array(values, dtype=complex)


def _sort_spectrum(values: np.ndarray) -> np.ndarray:
    order = np.lexsort((values.imag, values.real))
    return values[order]


def real_schur(M) -> SchurForm:
    """M = Z T Z^T with eigenvalues sorted by real part"""
    M = as_matrix(M)
    n = require_square(M)
    if n == 0:
        return SchurForm(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0, dtype=complex))
    try:
        T, Z = scipy.linalg.schur(M, output="real")
    except (LinAlgError, ValueError) as exc:
        raise NumericalError("real Schur iteration did not converge") from exc
    return SchurForm(Z, T, _sort_spectrum(schur_block_eigenvalues(T)))


class BlockSplit(NamedTuple):
    """M = S blkdiag(M1, M2) S^-1, M1 carrying the selected eigenvalues."""

    S: np.ndarray
    M1: np.ndarray
    M2: np.ndarray


def ordered_block_split(M: np.ndarray, select: Callable[[complex], bool]) -> BlockSplit:
    """Reordered real Schur form followed by Sylvester decoupling"""
    n = require_square(M)
    if n == 0:
        return BlockSplit(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)))
    try:
        T, Z, sdim = scipy.linalg.schur(M, output="real", sort=lambda re, im: bool(select(complex(re, im))))
    except (LinAlgError, ValueError) as exc:
        raise NumericalError("ordered Schur reordering failed", {"reason": str(exc)}) from exc
    k = int(sdim)
    if k in (0, n):
        return BlockSplit(Z, T[:k, :k], T[k:, k:])
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    try:
        X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError("Sylvester decoupling failed") from exc
    Y = np.eye(n)
    Y[:k, k:] = X
    return BlockSplit(Z @ Y, T11, T22)


@dataclass(frozen=True, eq=False)
class SpectrumClassification:
    """
    Eigenvalues split into a zero cluster, the imaginary axis, and the open
    left/right half planes.

    The zero cluster size is the stabilised nullity of M^k, so perturbed
    eigenvalues of nilpotent chains never leak into the axis test.
    """

    eigenvalues: np.ndarray
    zero_count: int
    zero_radius: float
    axis_tol: float
    spectral_radius: float

    def is_zero(self, z: complex) -> bool:
        return self.zero_count > 0 and abs(z) <= self.zero_radius

    def on_axis(self, z: complex) -> bool:
        return self.is_zero(z) or abs(z.real) <= self.axis_tol

    def is_stable(self, z: complex) -> bool:
        return not self.on_axis(z) and z.real < 0

    @property
    def nonzero(self) -> np.ndarray:
        return np.array([z for z in self.eigenvalues if not self.is_zero(z)], dtype=complex)

    @property
    def unstable(self) -> np.ndarray:
        return np.array([z for z in self.nonzero if z.real > self.axis_tol], dtype=complex)

    @property
    def marginal(self) -> np.ndarray:
        """Axis eigenvalues whose real part is visibly nonzero"""
        return np.array(
            [z for z in self.nonzero if abs(z.real) <= self.axis_tol and abs(z.real) > 1e-3 * self.axis_tol],
            dtype=complex,
        )

    def imaginary_clusters(self, rel_tol: float = 1e-6) -> List[float]:
        """Distinct positive frequencies of nonzero axis eigenvalues"""
        freqs = sorted(z.imag for z in self.nonzero if self.on_axis(z) and z.imag > 0)
        clusters: List[List[float]] = []
        gap = rel_tol * max(1.0, self.spectral_radius)
        for f in freqs:
            if clusters and f - clusters[-1][-1] <= gap:
                clusters[-1].append(f)
            else:
                clusters.append([f])
        return [float(np.mean(c)) for c in clusters]


def zero_eigenvalue_multiplicity(M: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """dim ker M^k once the chain ker M^k stops growing"""
    n = M.shape[0]
    scale = norm2(M)
    if scale == 0:
        return n
    Mn = M / scale
    power = np.eye(n)
    previous = 0
    for _ in range(n):
        power = power @ Mn
        nullity = n - rank(power, tol)
        if nullity == previous:
            break
        previous = nullity
    return previous


def classify_spectrum(
    M, spectral_tol: float = DEFAULT_SPECTRAL_TOL, rank_tol: float = DEFAULT_RANK_TOL
) -> SpectrumClassification:
    M = as_matrix(M)
    n = require_square(M)
    eigenvalues = real_schur(M).eigenvalues
    if n == 0:
        return SpectrumClassification(eigenvalues, 0, 0.0, 0.0, 0.0)
    g = zero_eigenvalue_multiplicity(M, rank_tol)
    moduli = np.sort(np.abs(eigenvalues))
    if g == 0:
        radius = 0.0
    elif g >= n:
        radius = float("inf")
    else:
        lower, upper = moduli[g - 1], moduli[g]
        radius = float(np.sqrt(max(lower, np.finfo(float).eps * upper) * upper))
    nonzero = moduli[g:]
    rho = float(nonzero.max()) if nonzero.size else 0.0
    return SpectrumClassification(eigenvalues, g, radius, spectral_tol * rho, rho)


def expm(M, t: float = 1.0) -> np.ndarray:
    M = as_matrix(M)
    require_square(M)
    try:
        out = scipy.linalg.expm(t * M)
    except (OverflowError, ValueError, LinAlgError) as exc:
        raise NumericalError("matrix exponential overflow", {"t": t}) from exc
    if not np.all(np.isfinite(out)):
        raise NumericalError("matrix exponential overflow", {"t": t, "norm": norm2(M)})
    return out


def _check_symmetric(M: np.ndarray, tol: float, name: str) -> float:
    scale = max(1.0, norm2(M))
    asym = norm2(M - M.T)
    if asym > tol * scale:
        raise StructureError(f"{name} is not symmetric", {"residual": asym})
    return scale


def psd_sqrt(M, tol: float = DEFAULT_SYMMETRY_TOL) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues down to -tol are clamped"""
    M = as_matrix(M)
    require_square(M)
    if M.size == 0:
        return M.copy()
    scale = _check_symmetric(M, tol, "matrix")
    w, V = np.linalg.eigh(symmetric_part(M))
    if w[0] < -tol * scale:
        raise StructureError("matrix has a negative eigenvalue", {"eigenvalue": float(w[0])})
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return symmetric_part(root)


def min_positive_eigenvalue(M, tol: float = DEFAULT_RANK_TOL) -> float:
    M = as_matrix(M)
    require_square(M)
    w = np.linalg.eigvalsh(symmetric_part(M)) if M.size else np.zeros(0)
    if w.size == 0 or w[-1] <= 0:
        raise DegenerateProblemError("matrix has no positive eigenvalue")
    return float(w[w > tol * w[-1]].min())


def max_eigenvalue(M) -> float:
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(symmetric_part(M))[-1])


def rk4_step_matrices(A: np.ndarray, B: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    One classical RK4 step for x' = Ax + Bu with u frozen on the step:
    x+ = Phi x + Gamma u.
    """
    n = A.shape[0]
    I = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2.0 + hA3 / 6.0 + (hA3 @ hA) / 24.0
    Gamma = h * (I + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ B
    return Phi, Gamma
