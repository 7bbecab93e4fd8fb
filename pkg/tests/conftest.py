import numpy as np
import pytest

from gmn_forge import modeldata as mdl

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_acceptance(number: int, passed: bool, text: str):
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def rank_two_model(omega=1):
    lights = (
        mdl.LightCharge((1, 0), 0.1 + 0.2j, 0.3, omega, -np.pi / 2),
        mdl.LightCharge((0, 2), -0.3 + 0.1j, 1.1, omega, -np.pi / 2),
        mdl.LightCharge((1, 2), 0.2 - 0.4j, 2.0, omega, -np.pi / 2),
    )
    T0 = np.array([[1.5j, 0.2 + 0.3j], [0.2 + 0.3j, 1.2j]])
    T1 = np.zeros((2, 2, 2), dtype=complex)
    T1[0, 0, 0] = 0.05j
    T1[1, 1, 1] = -0.04
    return mdl.ModelData(2, (1, 2), lights, (T0, T1), mdl.Domain((0j, 0j), (1.0, 1.0)), name="rank2")


@pytest.fixture(scope="session")
def ov():
    return mdl.build_multi_ov([0.0], [0.0])


@pytest.fixture(scope="session")
def multi():
    # I2 + I1 + I1 perturbation of an I4 fiber
    return mdl.build_multi_ov([0.4, 0.4, -0.3, -0.5], [0.1, 0.2, 0.3, 0.4])


@pytest.fixture(scope="session")
def rank2():
    return rank_two_model()
