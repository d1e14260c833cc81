import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=10, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def octahedron():
    return np.vstack([np.eye(3), -np.eye(3)])


@pytest.fixture(scope="session")
def tetrahedron():
    return np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3)


@pytest.fixture(scope="session")
def icosahedron():
    g = (1 + np.sqrt(5)) / 2
    pts = []
    for a in (1, -1):
        for b in (1, -1):
            pts += [[0, a, b * g], [a, b * g, 0], [b * g, 0, a]]
    pts = np.array(pts, dtype=float)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one ``PASS/FAIL criterion k: ...`` line; printed now and in the summary."""
    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
