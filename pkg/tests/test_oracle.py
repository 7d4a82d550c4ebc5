import math

import pytest

from cpsrisk.cascade import CascadeConfig
from cpsrisk.errors import SizeBoundError
from cpsrisk.network_model import Region, cyber, physical
from cpsrisk.oracle import exhaustive_regions, monte_carlo_regions, toy_system

from conftest import demo_network

C2 = Region.of([cyber(2)])
BRANCH = CascadeConfig(control_trip_prob=0.3)


def test_deterministic_dynamics_single_region(demo):
    cfg = CascadeConfig(control_trip_prob=1.0)
    mc, _ = monte_carlo_regions(demo, [C2], runs=200, seed=0, config=cfg)
    ex = exhaustive_regions(demo, [C2], config=cfg)
    expected = Region.of([cyber(2), physical(1), cyber(3)])
    assert mc.probabilities == {expected: 1.0}
    assert ex.probabilities == {expected: 1.0}


def test_single_branch_is_exact(demo):
    ex = exhaustive_regions(demo, [C2], config=BRANCH)
    assert ex.probabilities == {C2: 0.7, Region.of([cyber(2), physical(1), cyber(3)]): 0.3}


def test_fifty_fifty_branch(demo):
    mc, _ = monte_carlo_regions(demo, [C2], runs=100_000, seed=4, config=CascadeConfig(control_trip_prob=0.5))
    assert abs(mc.get(C2) - 0.5) <= 3 * mc.stderr(C2)


def test_frequencies_and_residual_partition_runs(demo):
    mc, _ = monte_carlo_regions(demo, runs=999, seed=1, config=BRANCH, max_steps=1)
    assert sum(mc.probabilities.values()) + mc.residual == pytest.approx(1.0, abs=1e-12)
    assert mc.residual > 0


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_sums_to_one(seed):
    ex = exhaustive_regions(toy_system(5, 7, seed=seed))
    assert math.fsum(ex.probabilities.values()) == pytest.approx(1.0, abs=1e-12)


def test_size_bound():
    with pytest.raises(SizeBoundError, match="12"):
        exhaustive_regions(toy_system(6, 7, seed=0))


def test_seed_reproducible(demo):
    a, _ = monte_carlo_regions(demo, runs=500, seed=9, config=BRANCH)
    b, _ = monte_carlo_regions(demo, runs=500, seed=9, config=BRANCH)
    assert a.to_csv() == b.to_csv()


def test_csv_layout(demo):
    text = exhaustive_regions(demo, [C2], config=BRANCH).to_csv().splitlines()
    assert text[0] == "cyber_ids,physical_ids,probability,stderr"
    assert text[1] == "2,,7.00000e-01,0.00000e+00"
    assert text[2] == "2 3,1,3.00000e-01,0.00000e+00"


@pytest.mark.slow
def test_monte_carlo_matches_exhaustive_at_a_million_runs():
    net = demo_network()
    ex = exhaustive_regions(net, config=BRANCH)
    mc, _ = monte_carlo_regions(net, runs=1_000_000, seed=2, config=BRANCH)
    assert set(mc.probabilities) == set(ex.probabilities)
    for region, p in ex.probabilities.items():
        se = math.sqrt(p * (1 - p) / mc.runs)
        assert abs(mc.get(region) - p) <= 3 * se
