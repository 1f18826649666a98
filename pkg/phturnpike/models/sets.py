from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from phturnpike.core.errors import ShapeError
from phturnpike.core.numerics import as_matrix, as_vector
from phturnpike.models.base import Base


@dataclass(frozen=True, repr=False, eq=False)
class ControlSet(Base):
    """Admissible control values: a box or a Euclidean ball around 0."""

    kind: str
    dim: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    radius: Optional[float] = None
    is_default: bool = False

    def __post_init__(self) -> None:
        if self.kind == "box":
            lower = as_vector(self.lower, "lower", self.dim)
            upper = as_vector(self.upper, "upper", self.dim)
            if not (np.all(lower < 0) and np.all(upper > 0)):
                raise ShapeError("box control set must contain 0 strictly inside")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
        elif self.kind == "ball":
            if self.radius is None or not np.isfinite(self.radius) or self.radius <= 0:
                raise ShapeError("ball control set needs a positive radius")
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise ShapeError(f"unknown control set kind {self.kind!r}")

    @classmethod
    def box(cls, lower, upper) -> "ControlSet":
        lower = as_vector(lower, "lower")
        return cls("box", lower.size, lower, as_vector(upper, "upper", lower.size))

    @classmethod
    def ball(cls, radius: float, dim: int) -> "ControlSet":
        return cls("ball", dim, radius=radius)

    @classmethod
    def default_box(cls, dim: int, bound: float) -> "ControlSet":
        return cls("box", dim, -bound * np.ones(dim), bound * np.ones(dim), is_default=True)

    @property
    def u_max(self) -> float:
        """Largest Euclidean norm of an admissible control"""
        if self.kind == "ball":
            return float(self.radius)
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def contains(self, u, tol: float = 1e-8) -> bool:
        u = as_vector(u, "u", self.dim)
        if self.kind == "ball":
            return float(np.linalg.norm(u)) <= self.radius + tol
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def is_interior(self, u, margin: float) -> bool:
        u = as_vector(u, "u", self.dim)
        if self.kind == "ball":
            return float(np.linalg.norm(u)) < self.radius - margin
        return bool(np.all(u > self.lower + margin) and np.all(u < self.upper - margin))

    def boundary_distance(self, direction) -> float:
        """Largest s >= 0 with s * direction still admissible"""
        d = as_vector(direction, "direction", self.dim)
        if not np.any(d):
            return float("inf")
        if self.kind == "ball":
            return self.radius / float(np.linalg.norm(d))
        steps = [
            (self.upper[i] / d[i]) if d[i] > 0 else (self.lower[i] / d[i])
            for i in range(self.dim)
            if d[i] != 0
        ]
        return float(min(steps))

    def excess(self, u) -> float:
        """Distance by which u leaves the set (0 inside)"""
        u = as_vector(u, "u", self.dim)
        if self.kind == "ball":
            return max(0.0, float(np.linalg.norm(u)) - self.radius)
        return float(max(0.0, np.max(self.lower - u), np.max(u - self.upper)))

    def polyhedral_rows(self, facets_per_input: int = 16) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rows G, lo, hi with lo <= G u <= hi; exact for boxes, outer facets for balls"""
        if self.kind == "box":
            return np.eye(self.dim), self.lower.copy(), self.upper.copy()
        m = self.dim
        axes = np.vstack([np.eye(m), -np.eye(m)])
        extra = max(0, facets_per_input * m - 2 * m) if m > 1 else 0
        if extra:
            rng = np.random.default_rng(0)
            dirs = rng.standard_normal((extra, m))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            axes = np.vstack([axes, dirs])
        rows = axes.shape[0]
        return axes, -np.inf * np.ones(rows), self.radius * np.ones(rows)


@dataclass(frozen=True, repr=False, eq=False)
class TargetSet(Base):
    """Terminal set: a single point or an affine box {x : lower <= G x <= upper}."""

    kind: str
    point: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind == "point":
            object.__setattr__(self, "point", as_vector(self.point, "target point"))
        elif self.kind == "box":
            G = as_matrix(self.G, "G")
            lower = np.array(self.lower, dtype=float).reshape(-1)
            upper = np.array(self.upper, dtype=float).reshape(-1)
            if lower.size != G.shape[0] or upper.size != G.shape[0]:
                raise ShapeError("target bounds must match the rows of G")
            if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower > upper):
                raise ShapeError("target bounds must satisfy lower <= upper")
            object.__setattr__(self, "G", G)
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
        else:
            raise ShapeError(f"unknown target kind {self.kind!r}")

    @classmethod
    def singleton(cls, point) -> "TargetSet":
        return cls("point", point=point)

    @classmethod
    def affine_box(cls, G, lower, upper) -> "TargetSet":
        return cls("box", G=G, lower=lower, upper=upper)

    @property
    def dim(self) -> int:
        return self.point.size if self.kind == "point" else self.G.shape[1]

    def contains(self, x, tol: float = 1e-6) -> bool:
        x = as_vector(x, "x", self.dim)
        if self.kind == "point":
            return float(np.linalg.norm(x - self.point)) <= tol
        gx = self.G @ x
        return bool(np.all(gx >= self.lower - tol) and np.all(gx <= self.upper + tol))

    def pulled_back(self, M: np.ndarray, point=None) -> "TargetSet":
        """The set in coordinates z with x = M z; point targets need the mapped point"""
        if self.kind == "point":
            return TargetSet.singleton(point)
        return TargetSet.affine_box(self.G @ M, self.lower, self.upper)
