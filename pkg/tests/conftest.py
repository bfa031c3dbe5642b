import pytest

from cablefem import builtin_spec
from cablefem.em_solver import SystemSpec, solve
from cablefem.meshing import MeshControls, build_cross_section

# one line per acceptance criterion, printed in the terminal summary
CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute 3D solves (acceptance suite)")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[key])


@pytest.fixture(scope="session")
def criteria():
    return CRITERIA


@pytest.fixture(scope="session")
def cable1_mesh():
    return build_cross_section(builtin_spec("cable1"), MeshControls())


@pytest.fixture(scope="session")
def cable1_2d(cable1_mesh):
    return solve(SystemSpec(cable1_mesh))
