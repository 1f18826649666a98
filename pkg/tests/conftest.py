import json
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from phturnpike.models.system import PhDaeSystem, PhOdeSystem
from phturnpike.services.benchmarks import msd_system, robot_system


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def msd() -> PhOdeSystem:
    return msd_system()


@pytest.fixture
def robot() -> PhDaeSystem:
    return robot_system()


def _skew(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.standard_normal((n, n))
    return M - M.T


def _spd(rng: np.random.Generator, n: int, shift: float = 0.1) -> np.ndarray:
    L = rng.standard_normal((n, n))
    return L @ L.T / n + shift * np.eye(n)


@pytest.fixture
def make_ph_ode() -> Callable[..., PhOdeSystem]:
    """J skew, R = L L^T of the requested rank, Q symmetric positive definite"""

    def build(rng: np.random.Generator, n: int = 4, m: int = 2, r_rank: int = None) -> PhOdeSystem:
        r_rank = n if r_rank is None else r_rank
        L = rng.standard_normal((n, r_rank))
        return PhOdeSystem(_skew(rng, n), L @ L.T / n, _spd(rng, n, 0.5), rng.standard_normal((n, m)))

    return build


@pytest.fixture
def make_index1_dae() -> Callable[..., PhDaeSystem]:
    """E = diag(I, 0), block-diagonal Q > 0 and R > 0, so the pencil has index one"""

    def build(rng: np.random.Generator, n1: int = 3, n2: int = 2, m: int = 1) -> PhDaeSystem:
        n = n1 + n2
        E = np.diag([1.0] * n1 + [0.0] * n2)
        Q = np.zeros((n, n))
        Q[:n1, :n1] = _spd(rng, n1, 0.5)
        Q[n1:, n1:] = _spd(rng, n2, 0.5)
        return PhDaeSystem(E, _skew(rng, n), _spd(rng, n, 0.2), Q, rng.standard_normal((n, m)))

    return build


@pytest.fixture
def msd_document() -> dict:
    """The mass-spring-damper problem in the OCP file layout"""
    system = msd_system()
    return {
        "J": system.J.tolist(),
        "R": system.R.tolist(),
        "Q": system.Q.tolist(),
        "B": system.B[:, 0].tolist(),
        "T": 10.0,
        "N": 100,
        "x0": [1.0, 1.0, 1.0],
        "target": {"point": [-1.2, -0.7, -1.0]},
    }


@pytest.fixture
def robot_document() -> dict:
    system = robot_system()
    return {
        "E": system.E.tolist(),
        "J": system.J.tolist(),
        "R": system.R.tolist(),
        "Q": system.Q.tolist(),
        "B": system.B.tolist(),
    }


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[str, dict], Path]:
    def write(name: str, payload: dict) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return path

    return write
