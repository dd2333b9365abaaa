import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crqprime.domains import ball, perturbed_ball

settings.register_profile(
    "crq", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("crq")

# a few unit directions spread over S^3
DIRS = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [0.6, 0.8j],
    [np.exp(0.7j) * 0.5, 0.75 ** 0.5],
    [np.exp(-1.3j) * 0.8, np.exp(2.1j) * 0.6],
])


def quartic_ball(a=-0.1):
    return perturbed_ball({(2, 2, 0, 0): a}, "quartic")


def mixed_ball():
    return perturbed_ball({(1, 1, 1, 1): -0.15}, "mixed")


def twisted_ball():
    return perturbed_ball({(2, 0, 0, 2): 0.05, (0, 2, 2, 0): 0.05, (0, 0, 2, 2): -0.08},
                          "twisted")


@pytest.fixture
def unit_ball():
    return ball()


@pytest.fixture(params=["quartic", "mixed", "twisted"])
def perturbed(request):
    return {"quartic": quartic_ball, "mixed": mixed_ball, "twisted": twisted_ball}[request.param]()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
