import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robintorsion.fem import solve_robin  # noqa: E402
from robintorsion.geometry import BoundaryCurve, ellipse  # noqa: E402
from robintorsion.mesh import build_mesh  # noqa: E402


def curve_by_name(name: str) -> BoundaryCurve:
    if name == "disk":
        return BoundaryCurve.circle()
    if name == "disk2":
        return BoundaryCurve.circle(2.0)
    if name == "pert":
        return BoundaryCurve.from_modes(1.0, [[2, 0.2, 0.0]])
    if name.startswith("pert"):
        return BoundaryCurve.from_modes(1.0, [[2, float(name[4:]), 0.0]])
    if name == "ellipse":
        return ellipse(1.3, 1 / 1.3)
    if name == "ellipse21":
        return ellipse(2.0, 1.0)
    raise KeyError(name)


@functools.lru_cache(maxsize=None)
def mesh_for(name: str, level: int, order: int = 2):
    return build_mesh(curve_by_name(name), level, order)


@functools.lru_cache(maxsize=None)
def solution(name: str, level: int, beta: float, order: int = 2):
    return solve_robin(mesh_for(name, level, order), beta)


@functools.lru_cache(maxsize=None)
def reports(name: str, level: int, beta: float):
    from robintorsion.identities import evaluate_all
    return evaluate_all(solution(name, level, beta))


@pytest.fixture
def disk():
    return curve_by_name("disk")


@pytest.fixture
def pert():
    return curve_by_name("pert")


@pytest.fixture
def ell():
    return curve_by_name("ellipse")


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
