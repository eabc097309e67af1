import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pqsteer._backend import available_backends

settings.register_profile("pqsteer", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pqsteer")


@pytest.fixture(params=[m.NAME for m in available_backends()])
def backend(request):
    return {m.NAME: m for m in available_backends()}[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, d):
    m = random_complex(rng, d, d)
    return (m + m.conj().T) / 2


# acceptance criteria report one line each; collected here and echoed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
