import numpy as np
import pytest
from hypothesis import settings

from slqns import params
from slqns.experiment import MeasurementPlan
from slqns.noise import TWO_PI, SpectrumVector, pack

settings.register_profile("repo", max_examples=40, deadline=None)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def shot_params():
    return params.spectroscopy_noise()


@pytest.fixture(scope="session")
def peak_omega(shot_params):
    return abs(shot_params.delta_c)


@pytest.fixture(scope="session")
def peak_theta(shot_params, peak_omega):
    return pack(SpectrumVector.from_shot_noise(shot_params, peak_omega))


@pytest.fixture(scope="session")
def design_plan():
    return MeasurementPlan(times=tuple(params.SPINLOCK_TIMES))


@pytest.fixture(scope="session")
def small_plan():
    times = tuple(np.array([1, 11, 31, 71, 151]) * 1e-6)
    return MeasurementPlan(times=times, shots=2000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def omega_hz(omega):
    return omega / TWO_PI


ACCEPTANCE_LINES: dict[tuple[int, str], str] = {}


@pytest.fixture
def acceptance():
    """Record the pass/fail line of one acceptance criterion (or one part of it)."""

    def record(number: int, passed: bool, detail: str, part: str = "") -> bool:
        name = f"criterion {number}" + (f" ({part})" if part else "")
        line = f"{name}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[(number, part)] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
