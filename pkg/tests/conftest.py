import numpy as np
import pytest

from qsh import spectral as sp
from qsh.dynamics import SimState
from qsh.tensor_algebra import project_symmetric_traceless


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_qtensor(rng, d, scale=1.0):
    return project_symmetric_traceless(rng.standard_normal((d, d))) * scale


def random_state(grid, rng, amplitude=0.1, kmax=4):
    d = grid.dim
    v = sp.leray_project(grid, sp.band_limited_random(grid, rng, (d,), kmax)) * amplitude
    Q = project_symmetric_traceless(sp.band_limited_random(grid, rng, (d, d), kmax)) * amplitude
    W = project_symmetric_traceless(sp.band_limited_random(grid, rng, (d, d), kmax)) * amplitude
    return SimState(grid, 0.0, v, Q, W)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record(number, title, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
