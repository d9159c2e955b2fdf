import pytest

from submersion_solitons.singular_launch import bowl_launch, wing_launch

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def bowl2():
    return bowl_launch(2, 0.0, 5.0)


@pytest.fixture(scope="session")
def bowl2_long():
    return bowl_launch(2, 0.0, 100.0)


@pytest.fixture(scope="session")
def wing_unit():
    return wing_launch(2, 1.0, 0.0, 20.0)


@pytest.fixture(scope="session")
def wing_low():
    # vertex below every residual point in {0.2, 0.5, 1, 2}
    return wing_launch(2, 0.1, 0.0, 20.0)


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES[number] = f"[{status}] criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
