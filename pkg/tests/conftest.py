import numpy as np
import pytest

from pxclda.fields import Grid, ScalarField


@pytest.fixture
def small_grid():
    return Grid.cube(3.0, 0.25)


@pytest.fixture
def gaussian(small_grid):
    def make(sigma=0.8, center=(0.0, 0.0, 0.0), grid=None):
        g = grid or small_grid
        r2 = g.radius(center) ** 2
        vals = (2 * np.pi * sigma**2) ** -1.5 * np.exp(-r2 / (2 * sigma**2))
        return ScalarField(g, vals, "density")
    return make


# ---- acceptance reporting ---------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    n, title = marker.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title} [{detail}]")
