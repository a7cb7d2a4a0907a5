import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spincurv.geometry import conformal_metric, flat_metric
from spincurv.grid import Grid, GridGeometry

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_conformal():
    """Coarse conformal grid, fast enough for unit tests."""
    metric = conformal_metric(3, 1.0)
    return GridGeometry(metric, Grid(3, 0.5, 0.25, 4.0))


@pytest.fixture(scope="session")
def small_flat():
    return GridGeometry(flat_metric(3), Grid(3, 0.5, 0.0, 4.0))


@pytest.fixture(scope="session")
def small_basis(small_conformal):
    from spincurv.spinor_op import build_spinor_basis

    return build_spinor_basis(small_conformal)
