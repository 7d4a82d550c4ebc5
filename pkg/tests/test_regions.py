import itertools

import pytest

from cpsrisk.network_model import Region, cyber, physical
from cpsrisk.oracle import toy_system
from cpsrisk.regions import (
    AdmissibleCounts,
    count_admissible_estimate,
    count_admissible_exact,
    enumerate_connected,
    is_admissible,
    is_connected_region,
)

from conftest import demo_network


def brute_force_counts(net, max_size):
    counts = {}
    nodes = [net.node_at(k) for k in range(net.n_total)]
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(nodes, size):
            r = Region.of(combo)
            if is_admissible(r, net):
                y, x = r.split
                counts[(x, y)] = counts.get((x, y), 0) + 1
    return counts


def test_admissibility_rules(demo):
    assert is_admissible(Region.of([cyber(1), physical(2)]), demo)
    assert not is_admissible(Region.of([]), demo)
    assert not is_admissible(Region.of([physical(0), physical(1)]), demo)  # no cyber node
    assert not is_admissible(Region.of([cyber(0), cyber(2)]), demo)  # not connected
    assert not is_admissible(Region.of([cyber(9)]), demo)
    assert is_admissible(Region.of([physical(0), physical(1)]), demo, sources=[physical(0)])


def test_connectivity_uses_coupling_links(demo):
    # c2 and p1 are adjacent only through the control link
    assert is_connected_region(Region.of([cyber(2), physical(1)]), demo)


def test_enumeration_lists_each_connected_set_once():
    adj = [[1], [0, 2], [1, 3], [2]]  # path of four
    subs = list(enumerate_connected(adj, 4))
    assert len(subs) == len({frozenset(s) for s in subs}) == 10


@pytest.mark.parametrize("seed", range(3))
def test_exact_counts_match_brute_force(seed):
    net = toy_system(4, 5, seed=seed)
    assert count_admissible_exact(net, 5) == pytest.approx(brute_force_counts(net, 5))


def test_demo_counts():
    assert count_admissible_exact(demo_network(), 7) == brute_force_counts(demo_network(), 7)


def test_estimator_is_close_to_exact():
    net = toy_system(5, 7, seed=2)
    exact = count_admissible_exact(net, 4)
    est = count_admissible_estimate(net, 4, walks=40000, seed=1)
    for key, n in exact.items():
        assert est.get(key, 0.0) == pytest.approx(n, rel=0.15)


def test_for_network_switches_on_size():
    net = toy_system(5, 7, seed=0)
    assert AdmissibleCounts.for_network(net, 3).exact
    assert not AdmissibleCounts.for_network(net, 3, exact_limit=5, walks=100).exact
