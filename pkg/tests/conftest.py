import pytest

from apprentice_drive.demos import fit_mle, generate_demos

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def default_demos():
    return generate_demos(150, 30, seed=0)


@pytest.fixture(scope="session")
def expert(default_demos):
    return fit_mle(default_demos)


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
        print(ACCEPTANCE_LINES[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
