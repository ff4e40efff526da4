import pytest

from driftstop.filtering import FilterModel
from driftstop.pde import default_grid, solve_value
from driftstop.priors import Normal, TwoPoint


@pytest.fixture(scope="session")
def normal_model():
    return FilterModel(Normal(0.0, 0.5), 0.2)


@pytest.fixture(scope="session")
def normal_solution(normal_model):
    return solve_value(normal_model, default_grid(normal_model, 1.0))


@pytest.fixture(scope="session")
def two_point_model():
    return FilterModel(TwoPoint(-1.0, 1.0, 0.5), 0.2)


@pytest.fixture(scope="session")
def two_point_solution(two_point_model):
    return solve_value(two_point_model, default_grid(two_point_model, 1.0))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Append a one-line criterion verdict to the terminal summary."""

    def _record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
