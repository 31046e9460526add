import pytest

from ivcleach.core import NodeRecord, Position, RadioModel, SimConfig

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def radio():
    return RadioModel()


def make_node(node_id, x, y, energy=0.5, initial=0.5):
    return NodeRecord(id=node_id, pos=Position(x, y), initial_energy=initial,
                      residual_energy=energy)


@pytest.fixture
def small_config():
    return SimConfig(n_nodes=5, k_clusters=1, max_rounds=10)
