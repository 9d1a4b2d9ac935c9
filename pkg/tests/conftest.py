import pytest

from acceptance_log import LINES


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def planted_small():
    from ensemble_explorer.synthetic import planted_nonlinearity

    return planted_nonlinearity(n_rows=400, seed=3)

