import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slabtest.priors import LaplacePrior, QuadraturePrior, QuasiCauchyPrior

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def qc():
    return QuasiCauchyPrior()


@pytest.fixture(scope="session")
def lap():
    return LaplacePrior(0.5)


@pytest.fixture(scope="session", params=["quasi-cauchy", "laplace:0.5"])
def prior_pair(request):
    """A closed-form prior together with its quadrature oracle."""
    closed = QuasiCauchyPrior() if request.param == "quasi-cauchy" else LaplacePrior(0.5)
    return closed, QuadraturePrior(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
