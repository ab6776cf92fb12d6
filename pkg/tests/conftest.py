import numpy as np
import pytest
from hypothesis import strategies as st

from hsc.mesh import build_surface


@st.composite
def disk_points(draw, max_radius=0.95):
    r = draw(st.floats(0.0, max_radius))
    theta = draw(st.floats(0.0, 2 * np.pi))
    return np.array([r * np.cos(theta), r * np.sin(theta)])


def make_surface(params, faces, tbm=None):
    params = np.asarray(params, dtype=float)
    n = len(params)
    t = np.ones(n) if tbm is None else np.asarray(tbm, dtype=float)
    verts = np.column_stack([params, np.zeros(n), params, t])
    return build_surface(verts, faces)


@pytest.fixture
def triangle():
    return make_surface([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]], [[0, 1, 2]])


@pytest.fixture
def strip5():
    """Triangle strip whose 1-ring graph is 0-1-2-3-4 plus the chords i-(i+2)."""
    params = [[0.05 * i, 0.05 * (i % 2)] for i in range(5)]
    return make_surface(params, [[0, 1, 2], [1, 3, 2], [2, 3, 4]])


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
