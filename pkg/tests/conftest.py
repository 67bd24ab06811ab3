import math

import numpy as np
import pytest

from pointpaul.fieldcore import SR88, RfDrive, RingGeometry, TrapConfig

OPTIMUM = dict(a=0.651679, b=3.57668, zmax=1.957965, q_ratio=0.471565, d_ratio=0.019703)

ACCEPTANCE_RESULTS = []


@pytest.fixture
def optimum_geom():
    """Optimal ring scaled to a 1 mm node height."""
    return RingGeometry(OPTIMUM["a"] * 1e-3, OPTIMUM["b"] * 1e-3)


@pytest.fixture
def ref_config(optimum_geom):
    """88Sr+, 300 V at 2 pi x 8 MHz on the optimal 1 mm trap."""
    return TrapConfig(optimum_geom, RfDrive(300.0, 2 * math.pi * 8e6, 0.0), SR88)


@pytest.fixture
def pcb_geom():
    """Fabricated trap: ring inner radius 650 um, outer 3.24 mm."""
    return RingGeometry(650e-6, 3.24e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
