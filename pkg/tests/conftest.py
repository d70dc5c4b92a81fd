import numpy as np
import pytest

from rdesteady import _kernels
from rdesteady.densities import MixtureDensity1D, ParameterLaw

TIGHT = 1e-4


def point_law(k=1.0, m=1.0, c=0.25, sd=TIGHT):
    """Parameter law concentrated near a single (k, m, c)."""
    return ParameterLaw([MixtureDensity1D.normal(v, sd, 1e-6) for v in (k, m, c)])


def sim00_law():
    return ParameterLaw([MixtureDensity1D.normal(1.0, 0.05, 1e-6),
                         MixtureDensity1D.normal(1.0, 0.1, 1e-6),
                         MixtureDensity1D.normal(0.25, 0.03, 1e-6)])


@pytest.fixture(params=_kernels.available())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
