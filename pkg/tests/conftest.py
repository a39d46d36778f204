import numpy as np
import pytest

from playertrack.geometry import Box3D

# acceptance results collected as (criterion, passed, detail); printed in the summary
ACCEPTANCE_RESULTS: list = []


def cube(x=0.0, y=0.0, z=0.0, size=1.0, yaw=0.0) -> Box3D:
    return Box3D([x, y, z], [size, size, size], yaw)


def person(x, y, yaw=0.0) -> Box3D:
    return Box3D([x, y, 0.9], [0.6, 0.6, 1.8], yaw)


def random_box(rng: np.random.Generator, spread=1.0) -> Box3D:
    return Box3D(rng.normal(0.0, spread, 3), rng.uniform(0.3, 2.0, 3), rng.uniform(-np.pi, np.pi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}")
