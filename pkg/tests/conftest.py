import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "kbench", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("kbench")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="session")
def case64():
    from kbench.phantom import make_phantom

    return make_phantom((64, 64), coils=4, jitter_seed=7)


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
