import pytest

_TABLES = []


@pytest.fixture(scope="session")
def acceptance_tables():
    """Tables appended here are printed in the terminal summary."""
    return _TABLES


def pytest_terminal_summary(terminalreporter):
    for lines in _TABLES:
        terminalreporter.write_sep("-", lines[0])
        for line in lines[1:]:
            terminalreporter.write_line(line)
