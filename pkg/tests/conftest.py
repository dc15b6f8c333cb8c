import numpy as np
import pytest
from hypothesis import settings

from tdse_toolkit import build_rigid_rotor
from tdse_toolkit.harness import ExperimentConfig, reference_state

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_cfg():
    return ExperimentConfig.from_dict({})


@pytest.fixture(scope="session")
def default_reference(default_cfg):
    # the most expensive object in the suite; computed once and shared
    return reference_state(default_cfg)


@pytest.fixture
def rotor3():
    return build_rigid_rotor(3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, d):
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (A + A.conj().T)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
