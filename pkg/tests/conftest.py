import numpy as np
import pytest

from poms import library
from poms.model import Boundary


@pytest.fixture
def c2():
    return library.checkerboard()


@pytest.fixture
def f2():
    return library.free(2)


@pytest.fixture
def chain():
    return library.chain()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grid_dims_for(ts, nx, ny, nz=1):
    return (nx, ny, nz if ts.dim == 3 else 1)


@pytest.fixture
def c2_zero():
    return library.checkerboard(Boundary.zero(0))


def pytest_terminal_summary(terminalreporter):
    rows = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and rep.when == "call":
                rows.append((props["criterion"], "PASS" if rep.passed else "FAIL", props.get("detail", "")))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(rows):
        terminalreporter.write_line(f"{verdict} criterion {name.strip()}: {detail}")
