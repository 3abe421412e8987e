from dataclasses import replace

import numpy as np
import pytest

from rwhec.graph import MeasurementPair, ProblemGraph
from rwhec.liegroups import Pose, random_rotation
from rwhec.simulation import SCENARIOS, synthesize_dataset

_ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[n])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_pose(rng, scale=1.0):
    return Pose(random_rotation(rng), rng.uniform(-scale, scale, 3))


def chain_graph(rng, num_x=1, num_y=1, per_edge=6, edges=None, alpha=1.0, monocular=False, noise=0.0):
    """Random graph whose measurements close ``A X = Y B`` exactly (up to ``noise``)."""
    xs = [random_pose(rng) for _ in range(num_x)]
    ys = [random_pose(rng) for _ in range(num_y)]
    g = ProblemGraph(num_x, num_y, monocular=monocular)
    if edges is None:
        edges = [(j, k) for j in range(num_x) for k in range(num_y)]
    for j, k in edges:
        for _ in range(per_edge):
            b = random_pose(rng)
            a = ys[k] @ b @ xs[j].inverse()
            tb = alpha * b.translation + noise * rng.normal(size=3)
            g.add_measurement(j, k, MeasurementPair(a, Pose(b.rotation, tb), 0.01, 125.0))
    return g, xs, ys


@pytest.fixture(scope="session")
def sphere_noiseless():
    return synthesize_dataset(SCENARIOS["sphere_noiseless"])


@pytest.fixture(scope="session")
def sphere_noisy():
    return synthesize_dataset(SCENARIOS["sphere_k125_s1cm"])


@pytest.fixture(scope="session")
def two_sphere_noisy():
    return synthesize_dataset(replace(SCENARIOS["two_sphere_k125_s1cm"], seed=3))


@pytest.fixture(scope="session")
def multi_camera_noiseless():
    return synthesize_dataset(SCENARIOS["multi_camera_noiseless"])
