import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpsrisk.errors import ConfigurationError, EdgeListParseError, TotalCollapseError
from cpsrisk.network_model import (CyberNode, CyberRole, NodeId, PhysicalNode, PhysicalRole, Region,
                                   check_cyber_constraint, check_physical_constraint, cyber, cyber_total_load,
                                   distribute_cyber_load, generate_ba_cyber, load_physical_topology,
                                   parse_edge_list, physical, physical_node_load, Topology)


def test_ba_reference_size():
    g = generate_ba_cyber(110, 3, 2, rng_seed=7)
    assert g.n == 110
    assert g.m == 3 + 2 * 107
    assert g.is_connected()


def test_ba_smallest_growth_step():
    g = generate_ba_cyber(4, 3, 1, rng_seed=0)
    assert g.m == 3 + 1
    assert g.degrees[3] == 1


def test_ba_mean_degree_over_seeds():
    means = [generate_ba_cyber(110, 3, 2, s).degrees.mean() for s in range(1000)]
    assert abs(np.mean(means) - 4.0) / 4.0 < 0.05


def test_ba_reproducible():
    assert generate_ba_cyber(50, 3, 2, 11).edges == generate_ba_cyber(50, 3, 2, 11).edges


@pytest.mark.parametrize("n,m0,m", [(3, 3, 2), (10, 2, 3), (10, 3, 0)])
def test_ba_rejects_bad_params(n, m0, m):
    with pytest.raises(ConfigurationError):
        generate_ba_cyber(n, m0, m)


def test_ieee39_builtin():
    topo, roles = load_physical_topology("ieee39")
    assert (topo.n, topo.m) == (39, 46)
    assert topo.is_connected()
    assert roles.count(PhysicalRole.GENERATOR) == 10
    assert PhysicalRole.LOAD in roles and PhysicalRole.SUBSTATION in roles


def test_single_edge_and_dedup():
    t = parse_edge_list("0 1\n")
    assert (t.n, t.m) == (2, 1)
    t = parse_edge_list("0 1\n1 0\n0 1  # again\n")
    assert t.m == 1
    assert list(t.degrees) == [1, 1]


def test_parse_error_names_line():
    with pytest.raises(EdgeListParseError) as ei:
        parse_edge_list("# header\n0 1\n1 x\n")
    assert ei.value.line_no == 3


def test_cyber_total_load_examples():
    assert cyber_total_load([2, 3], alpha=1, delta=2) == 13
    assert cyber_total_load([2, 3], alive=[False, False]) == 0
    assert cyber_total_load([1, 5, 9], alpha=1, delta=0) == 3


def test_distribute_examples():
    np.testing.assert_allclose(distribute_cyber_load(13, [1, 2, 3], theta=2), [13 / 14, 52 / 14, 117 / 14])
    np.testing.assert_allclose(distribute_cyber_load(12, [4, 4, 4]), [4, 4, 4])
    np.testing.assert_allclose(distribute_cyber_load(9, [1, 5, 9], theta=0), [3, 3, 3])


def test_distribute_failed_get_zero_and_collapse():
    out = distribute_cyber_load(10, [1, 2, 3], alive=[True, False, True])
    assert out[1] == 0 and math.isclose(out.sum(), 10)
    with pytest.raises(TotalCollapseError):
        distribute_cyber_load(10, [1, 2], alive=[False, False])


@given(st.lists(st.integers(0, 30), min_size=1, max_size=40), st.floats(0.1, 1e4),
       st.floats(0.0, 3.0))
def test_distribution_conserves_total(degrees, total, theta):
    if theta > 0 and not any(degrees):
        return
    out = distribute_cyber_load(total, degrees, theta=theta)
    assert math.isclose(out.sum(), total, rel_tol=1e-9)


@given(st.lists(st.integers(1, 30), min_size=2, max_size=20, unique=True), st.floats(0.1, 3.0))
def test_larger_degree_larger_load(degrees, theta):
    out = distribute_cyber_load(100.0, degrees, theta=theta)
    order = np.argsort(degrees)
    assert np.all(np.diff(out[order]) > 0)


def test_physical_node_load_examples():
    assert physical_node_load(3, 1, 2) == 9
    assert physical_node_load(0) == 0
    assert physical_node_load(5, 2, 1) == 10


def _cyber(load, initial):
    return CyberNode(cyber(0), CyberRole.MONITOR, 2, initial, load)


def _phys(load, initial, P):
    return PhysicalNode(physical(0), PhysicalRole.LOAD, 3, initial, P, load)


def test_cyber_constraint_examples():
    assert check_cyber_constraint(_cyber(1.5, 1.0), 0.5)
    assert not check_cyber_constraint(_cyber(1.51, 1.0), 0.5)
    assert check_cyber_constraint(_cyber(0.0, 1.0), 0.0)


def test_physical_constraint_examples():
    assert check_physical_constraint(_phys(9, 9, 9), 0.5)
    assert not check_physical_constraint(_phys(13.6, 9, 9), 0.5)
    assert check_physical_constraint(_phys(0, 9, 9), 0.5)


@given(st.floats(0, 100), st.floats(0.1, 50), st.floats(0, 2), st.floats(0, 2))
def test_constraints_monotone_in_rho(load, initial, r1, r2):
    lo, hi = sorted((r1, r2))
    if check_cyber_constraint(_cyber(load, initial), lo):
        assert check_cyber_constraint(_cyber(load, initial), hi)
    if check_physical_constraint(_phys(load, initial, initial), lo):
        assert check_physical_constraint(_phys(load, initial, initial), hi)


def test_node_and_region_text():
    assert str(cyber(2)) == "c2" and NodeId.parse("p1") == physical(1)
    r = Region.parse("c2,p1")
    assert r.split == (1, 1) and r.size == 2
    assert Region.parse(str(r)) == r


def test_coupled_network_invariants(ieee):
    for topo in (ieee.physical, ieee.cyber):
        for v, nbrs in enumerate(topo.adj):
            assert v not in nbrs
            assert all(v in topo.adj[w] for w in nbrs)
            assert topo.degrees[v] == len(nbrs)
    assert ieee.n_total == 149
    # default P = initial load, so the physical bound is (1 + rho_p) L0
    np.testing.assert_allclose(ieee.physical_bounds, 1.5 * ieee.physical_load0)


def test_networkx_view():
    nx = pytest.importorskip("networkx")
    topo = Topology.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    g = topo.to_networkx()
    assert isinstance(g, nx.Graph) and g.number_of_edges() == 3
