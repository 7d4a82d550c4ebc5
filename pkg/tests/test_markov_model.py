import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsrisk.errors import DegenerateStateError, SingularProfileError, ValidationError
from cpsrisk.markov_model import (
    READINGS,
    RecoveryProfile,
    alpha_coefficients,
    arbitrate_reading,
    asymptotic_probabilities,
    cyber_transition,
    estimate_profile,
    fixed_transfer_probability,
    physical_transition,
    region_probability,
    sample_aggregate_traces,
    split_probabilities,
)
from cpsrisk.network_model import Region, cyber, physical
from cpsrisk.oracle import exhaustive_regions, monte_carlo_regions, toy_system
from cpsrisk.regions import AdmissibleCounts

from conftest import demo_network

HALF = RecoveryProfile.constant(0.5, 0.5, 1.0)
# p=.6, q=.5, d=.5 separates the two readings of the third X term
SEP = RecoveryProfile.constant(0.6, 0.5, 0.5)

prob = st.floats(0.0, 1.0)
positive = st.floats(0.05, 1.0)


@pytest.mark.parametrize("q", [0.3, 1.0, 0.0])
def test_cyber_transition(q):
    dist = cyber_transition(q)
    assert dist[0] == q and dist[0] + dist[1] == 1.0


def test_physical_transition_examples():
    assert physical_transition(1, 1, 1)[1] == 1.0
    assert physical_transition(0, 0.5, 0.7)[0] == 1.0
    assert physical_transition(0.6, 0.5, 1)[1] == pytest.approx(0.3, abs=1e-15)


def test_physical_transition_degenerate():
    with pytest.raises(DegenerateStateError):
        physical_transition(0.5, 0.0, 0.0)


@given(prob, prob, positive)
def test_transition_laws_sum_to_one(p, d, k):
    assert sum(cyber_transition(p).values()) == 1.0
    assert sum(physical_transition(p, d, k).values()) == 1.0


def test_alpha_examples():
    assert alpha_coefficients(1, 1, HALF)[0] == 0.25
    # q = 1 kills the first summand of the third coefficient
    pr = RecoveryProfile.constant(0.5, 1.0, 0.5)
    a3 = alpha_coefficients(2, 2, pr)[2]
    assert a3 == 1.0 * 0.5 * (1 - 1.0) * (1 - 0.5)
    assert alpha_coefficients(2, 2, RecoveryProfile.constant(1.0, 0.5, 0.5))[3] == 0.0


def test_alpha_values_by_hand():
    a = alpha_coefficients(1, 2, SEP, 0, 1)
    # .6*.5*.4/.6, .6*.5*.5*.7/.3, .5*.6*.5*(.6-.8)+.5*.6*.5*.5, .4/.6, .5*.7-.5*.4
    assert a == pytest.approx((0.2, 0.35, 0.045, 2 / 3, 0.15), abs=1e-12)


@pytest.mark.parametrize("pr, term", [
    (RecoveryProfile.constant(0.0, 0.5, 0.5), "p(x_{i-1})"),
    (RecoveryProfile.constant(0.5, 0.5, 0.0), "d(y_{i-1})"),
])
def test_singular_profile_names_term(pr, term):
    with pytest.raises(SingularProfileError) as info:
        alpha_coefficients(1, 1, pr)
    assert info.value.term == term


def test_profile_validation_and_json():
    with pytest.raises(ValidationError):
        RecoveryProfile((1.2,), (0.5,), (0.5,))
    pr = RecoveryProfile((0.1, 0.2), (0.3,), (0.4, 0.5, 0.6))
    assert RecoveryProfile.from_json(pr.to_json()) == pr
    assert pr.m_c == 2 and pr.p_at(7) == 0.2
    with pytest.raises(IndexError):
        pr.q_at(-1)


# hand evaluation, one cell at a time, p = q = .5 and d = 1:
#   X(0,1) = q = .5, Y(0,1) = 1
#   alpha1 = .5*.5*.5/.5 = .25, alpha2 = .5*1*.5*.5/.5 = .25, alpha3 = 0 + .5*.5*.5*0 = 0
#   alpha4 = .5/.5 = 1, alpha5 = .5*(1-.5) - 1*.5 = -.25
#   X(1,1) = .25*X(0,1) = .125        Y(1,1) = 1*X(0,1) = .5
#   X(1,2) = (.25+0)*X(0,1) = .125    Y(1,2) = -.25*Y(0,1) -> clamped to 0
#   X(2,1) = .25*X(1,1) = .03125      Y(2,1) = X(1,1) = .125
#   X(2,2) = .25*X(1,2) + .25*X(1,1) = .0625, Y(2,2) = X(1,2) - .25*Y(1,1) = 0
HAND_X = [[0, 0.5, 0], [0, 0.125, 0.125], [0, 0.03125, 0.0625]]
HAND_Y = [[0, 1, 0], [0, 0.5, 0], [0, 0.125, 0]]


@pytest.mark.parametrize("reading", READINGS)
def test_three_by_three_hand_table(reading):
    tab = asymptotic_probabilities(HALF, 2, 2, reading=reading)
    assert np.max(np.abs(tab.X - HAND_X)) <= 1e-12
    assert np.max(np.abs(tab.Y - HAND_Y)) <= 1e-12
    assert tab.clamp_events == [("Y", 1, 2, pytest.approx(-0.25))]


def test_readings_differ_where_third_term_matters():
    # verbatim: X(0,2) = 0, X(1,2) = (.35 + .045) * .5
    # corrected: X(0,2) = .045 * .5, X(1,2) = .2 * .0225 + .35 * .5 + .045 * .1
    v = asymptotic_probabilities(SEP, 2, 2, reading="verbatim")
    c = asymptotic_probabilities(SEP, 2, 2, reading="corrected")
    assert v.absorb(0, 2) == 0.0 and c.absorb(0, 2) == pytest.approx(0.0225, abs=1e-12)
    assert v.absorb(1, 2) == pytest.approx(0.1975, abs=1e-12)
    assert c.absorb(1, 2) == pytest.approx(0.184, abs=1e-12)


def test_instant_absorption():
    tab = asymptotic_probabilities(RecoveryProfile.constant(1.0, 1.0, 1.0), 3, 3)
    assert tab.absorb(0, 1) == 1.0
    assert np.count_nonzero(tab.X) == 1


def test_certain_cyber_absorption_leaks_through_second_term():
    # q = 1 absorbs at the initial cell, yet alpha2 carries mass on unless p*d = 1
    tab = asymptotic_probabilities(RecoveryProfile.constant(0.5, 1.0, 1.0), 2, 2)
    assert tab.absorb(0, 1) == 1.0
    assert tab.absorb(1, 2) == pytest.approx(0.5)


def test_origin_outside_grid():
    with pytest.raises(ValueError):
        asymptotic_probabilities(HALF, 2, 2, origin=(0, 3))


@settings(max_examples=60, deadline=None)
@given(st.lists(positive, min_size=3, max_size=3), st.lists(prob, min_size=3, max_size=3),
       st.lists(positive, min_size=3, max_size=3), st.sampled_from(READINGS))
def test_table_entries_stay_in_unit_interval(p, q, d, reading):
    pr = RecoveryProfile(tuple(p), tuple(q), tuple(d))
    a = asymptotic_probabilities(pr, 4, 4, reading=reading)
    b = asymptotic_probabilities(pr, 4, 4, reading=reading)
    assert np.all((a.X >= 0) & (a.X <= 1)) and np.all((a.Y >= 0) & (a.Y <= 1))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)


def test_table_csv():
    lines = asymptotic_probabilities(HALF, 1, 1).to_csv().splitlines()
    assert lines[0] == "x,y,X,Y"
    assert lines[2] == "0,1,5.00000e-01,1.00000e+00"


def test_split_rows_cover_each_size():
    rows = split_probabilities(asymptotic_probabilities(HALF, 2, 2), 2, 3)
    assert [(r["size"], r["cyber"], r["physical"]) for r in rows] == [
        (2, 2, 0), (2, 1, 1), (2, 0, 2), (3, 2, 1), (3, 1, 2)]


def test_region_probability_initial_only():
    net = demo_network()
    tab = asymptotic_probabilities(RecoveryProfile.constant(0.5, 1.0, 1.0), 2, 2)
    assert region_probability(Region.of([cyber(1)]), tab, net, initial=[cyber(1)]) == 1.0
    # without a known initial fault the mass is shared among the four cyber nodes
    assert region_probability(Region.of([cyber(1)]), tab, net) == 0.25


def test_region_probability_disconnected_is_zero():
    net = demo_network()
    tab = asymptotic_probabilities(HALF, 3, 3)
    assert region_probability(Region.of([cyber(0), cyber(3)]), tab, net) == 0.0
    assert region_probability(Region.of([physical(0)]), tab, net) == 0.0


def test_region_probability_splits_differ_but_baseline_does_not():
    net = toy_system(5, 7, seed=1)
    pr = RecoveryProfile.parametric(0.5, 0.1, 0.6, 0.1, 0.6, 0.05, 6, 8)
    tab = asymptotic_probabilities(pr, 6, 8)
    counts = AdmissibleCounts.for_network(net, 3)
    by_split = {}
    for c, p in [((0, 1, 2), ()), ((0, 1), (0,)), ((0,), (0, 1))]:
        reg = Region(frozenset(c), frozenset(p))
        if region_probability(reg, tab, net, counts) > 0:
            by_split[reg.split] = region_probability(reg, tab, net, counts)
    # whichever of these are admissible on the toy, their probabilities are pairwise distinct
    vals = list(by_split.values())
    assert len(set(vals)) == len(vals)
    table = split_probabilities(tab, 3, 3)
    assert len({r["probability"] for r in table if r["physical"] <= 2}) == 3
    assert len({fixed_transfer_probability(3) for _ in table}) == 1


def test_fixed_baseline():
    assert fixed_transfer_probability(1, 0.35, 4.0) == pytest.approx(0.65 ** 4)
    assert fixed_transfer_probability(2) == pytest.approx(0.35 * 0.65 ** 6)
    vals = [fixed_transfer_probability(s) for s in range(1, 12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        fixed_transfer_probability(3, rate=1.0)


def test_estimate_immediate_absorption():
    pr = RecoveryProfile.constant(1.0, 1.0, 0.3)
    est = estimate_profile(sample_aggregate_traces(pr, 50, 0))
    assert est.q == (1.0, 1.0) and est.p == (1.0,)


def test_estimate_round_trip():
    truth = RecoveryProfile.constant(0.7, 0.6, 0.8)
    est = estimate_profile(sample_aggregate_traces(truth, 10_000, 3), x_max=2, y_max=2)
    assert max(abs(v - 0.7) for v in est.p[1:]) <= 0.05
    assert max(abs(v - 0.6) for v in est.q[1:]) <= 0.05
    assert max(abs(v - 0.8) for v in est.d[1:]) <= 0.05


def test_estimate_smooths_from_nearest_count():
    from cpsrisk.cascade import Snapshot
    e = Region.of([])
    # one trace reaching x = 3 physically, nothing observed at x = 1 or 2
    trace = [Snapshot(0, 0, 1, 0, 1, 1, e), Snapshot(1, 3, 1, 1, 0, 0, e)]
    est = estimate_profile([trace], x_max=5)
    assert est.p == (1.0,) * 6
    assert est.d[1] == 1.0


def test_estimate_floor_and_empty():
    with pytest.raises(ValueError):
        estimate_profile([])
    pr = RecoveryProfile.constant(0.9, 0.0, 1.0)
    est = estimate_profile(sample_aggregate_traces(pr, 20, 0, max_steps=5), floor=0.05)
    assert min(est.q) >= 0.05


def test_arbitration_returns_both_scores():
    net = toy_system(5, 7, seed=0)
    _, traces = monte_carlo_regions(net, runs=500, seed=0, keep_traces=True)
    pr = estimate_profile(traces, 5, 7, floor=0.01)
    best, scores = arbitrate_reading(pr, traces, 5, 7)
    assert best in READINGS and set(scores) == set(READINGS)


@pytest.mark.xfail(strict=True, reason="the recursion does not conserve probability mass; see acceptance criterion 1")
def test_region_probabilities_sum_to_one_on_toys(toys):
    for net in toys:
        ex = exhaustive_regions(net)
        _, traces = monte_carlo_regions(net, runs=2000, seed=1, keep_traces=True)
        pr = estimate_profile(traces, net.n_physical, net.n_cyber, floor=0.01)
        tab = asymptotic_probabilities(pr, net.n_physical, net.n_cyber)
        counts = AdmissibleCounts.for_network(net, net.n_total)
        total = sum(tab.absorb(x, y) for (x, y), n in counts.counts.items() if n > 0)
        assert math.isclose(sum(p for _, p in ex.rows()), 1.0, abs_tol=1e-12)
        assert abs(total - 1.0) <= 0.02
