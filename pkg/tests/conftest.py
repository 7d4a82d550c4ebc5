import pytest

from cpsrisk.coupling import CouplingMap, build_coupled_network
from cpsrisk.network_model import CoupledNetwork, CyberRole, LayerParams, PhysicalRole, Topology
from cpsrisk.oracle import toy_system

LOOSE = LayerParams(rho_c=1e6, rho_p=1e6)


def demo_network(params: LayerParams = LOOSE) -> CoupledNetwork:
    """Cyber 2 governs physical 1, which powers cyber 3."""
    cyb = Topology.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    phys = Topology.from_edges(3, [(0, 1), (1, 2)])
    coupling = CouplingMap(supplier=(0, 0, 2, 1), governor=(1, 2, 1), monitors=((0, 0), (3, 1)))
    roles = (CyberRole.MONITOR, CyberRole.CONTROL, CyberRole.CONTROL, CyberRole.MONITOR)
    return CoupledNetwork(phys, cyb, (PhysicalRole.SUBSTATION,) * 3, roles, coupling, params)


@pytest.fixture
def demo():
    return demo_network()


@pytest.fixture(scope="session")
def ieee():
    return build_coupled_network(seed=0)


@pytest.fixture(scope="session")
def toys():
    return [toy_system(5, 7, seed=s) for s in range(5)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
