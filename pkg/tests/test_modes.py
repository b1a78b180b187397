import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from folnerlab.errors import BudgetExceeded, SearchExhausted
from folnerlab.modes import (LpNorm, NormedSeq, brute_fluctuations, brute_upcrossings,
                             check_witnesses, count_fluctuations,
                             count_fluctuations_at_distance, count_upcrossings,
                             distance_to_metastability, dumps, family_S, family_S_prime,
                             family_step, family_superaffine, iterate, learn_limit,
                             metastable_index, phi_family_S, rate_to_fluctuation,
                             replay_transcript, superaffine_beta)

from conftest import rationals

succ = lambda n, e: n + 1
double = lambda n, e: 2 * n


def test_fluctuation_examples():
    assert count_fluctuations([0, 1, 0, 1, 0], 1).count == 4
    assert count_fluctuations([3] * 7, Fraction(1, 100)).count == 0
    assert count_fluctuations(family_S(3).prefix(10), 1).count == 3
    assert brute_fluctuations([0, 1, 0], 1) == 2
    assert brute_fluctuations([0, 1, 0, 1], 3) == 0


def test_at_distance_examples():
    seq = [0, 1, 0, 1, 0]
    assert count_fluctuations_at_distance(seq, 1, succ).count == 4
    long = [0, 1, 0, 1, 0, 1, 0, 1]
    d = count_fluctuations_at_distance(long, 1, double).count
    assert d < count_fluctuations(long, 1).count
    assert d == brute_fluctuations(long, 1, double)


@given(st.lists(rationals, min_size=1, max_size=12), st.sampled_from([Fraction(1, 2), 1, 3]))
def test_dp_matches_brute(values, eps):
    rep = count_fluctuations(values, eps)
    assert rep.count == brute_fluctuations(values, eps)
    assert check_witnesses(NormedSeq(values), rep)


@given(st.lists(rationals, min_size=1, max_size=12), st.sampled_from([Fraction(1, 2), 2]),
       st.sampled_from([double, lambda n, e: n + 2, lambda n, e: 3 * n - 1]))
def test_at_distance_dp_matches_brute(values, eps, beta):
    rep = count_fluctuations_at_distance(values, eps, beta)
    assert rep.count == brute_fluctuations(values, eps, beta)
    assert check_witnesses(NormedSeq(values), rep, beta)


@given(st.lists(rationals, min_size=1, max_size=14), rationals.filter(lambda e: e > 0))
def test_successor_reduction(values, eps):
    assert (count_fluctuations_at_distance(values, eps, succ).count
            == count_fluctuations(values, eps).count)


@given(st.lists(st.tuples(rationals, rationals), min_size=1, max_size=9))
@settings(max_examples=60)
def test_vector_sequences(values):
    seq = NormedSeq(values, LpNorm(2))
    assert count_fluctuations(seq, 1).count == brute_fluctuations(seq, 1)


def test_lp_norm_triangle_and_homogeneity():
    n = LpNorm(3)
    x, y = (Fraction(1, 2), -2), (3, Fraction(1, 3))
    s = tuple(a + b for a, b in zip(x, y))
    assert n.norm(s) <= n.norm(x) + n.norm(y) + 1e-12
    assert abs(n.norm(tuple(2 * a for a in x)) - 2 * n.norm(x)) < 1e-12


def test_prefix_cap():
    with pytest.raises(BudgetExceeded):
        brute_fluctuations(list(range(19)), 1)


def test_metastability_examples():
    assert metastable_index([5] * 10, lambda n: n + 1, 1).N == 1
    # the single window [1, F(1)] avoids the oscillation only when F(1) <= j
    for j in range(1, 8):
        for b in range(1, 10):
            N = metastable_index(family_S(j), lambda n: n + b, 1).N
            assert (N == 1) == (1 + b <= j)
    res = metastable_index(family_S(2), lambda n: 4 * n, 1)
    assert res.N == 4


def test_metastability_short_prefix():
    with pytest.raises(SearchExhausted):
        metastable_index([0, 1], lambda n: n + 5, 1)


@given(st.integers(1, 30), st.integers(1, 3), st.integers(0, 3))
def test_metastable_index_below_phi(j, a, b):
    assume(a + b >= 2)
    F = lambda n: a * n + b
    N = metastable_index(family_S(j), F, 1).N
    assert N is not None and N <= phi_family_S(F, 1)


def test_conversions():
    lam = rate_to_fluctuation(lambda e: -(-1 // e))
    assert lam(Fraction(1, 3)) == 3
    assert distance_to_metastability(0, succ, lambda n: n + 1, 1) == 4
    assert distance_to_metastability(1, succ, lambda n: 2 * n, 1) == 32
    with pytest.raises(BudgetExceeded):
        distance_to_metastability(5, succ, lambda n: 2 * n, 1, index_cap=100)


def test_phi_readings():
    F = lambda n: n + 2
    assert phi_family_S(F, 1) == iterate(F, 4)
    assert phi_family_S(F, 1, applied=False)(3) == iterate(F, 4, 3)
    assert phi_family_S(F, 2) == 1


def test_distance_phi_bounds_metastability():
    # family_S members have distance-successor bound j; Phi dominates the scan
    F = lambda n: n + 3
    for j in range(1, 6):
        phi = distance_to_metastability(j, succ, F, 1)
        assert metastable_index(family_S(j), F, 1).N <= phi


@pytest.mark.parametrize("j", range(1, 51))
def test_family_S_counts(j):
    assert count_fluctuations(family_S(j).prefix(2 * j + 3), 1).count == j


def test_family_S_shape():
    assert [family_S(3)(n) for n in range(1, 10)] == [0, 0, 0, 1, 0, 1, 1, 1, 1]


@pytest.mark.parametrize("j", range(1, 7))
@pytest.mark.parametrize("beta", [lambda n, e: n + 2, double])
def test_family_S_prime(j, beta):
    seq = family_S_prime(j, beta)
    prefix = seq.prefix(seq.blocks[-1] + 2)
    assert count_fluctuations_at_distance(prefix, 1, beta).count == j


def test_superaffine():
    for k in range(1, 10):
        prefix = family_superaffine(k).prefix(k * k + k + 3)
        assert count_fluctuations_at_distance(prefix, 1, superaffine_beta).count <= 2
        if k % 2 == 0:
            assert count_fluctuations(prefix, 1).count == k
    assert count_fluctuations(family_superaffine(8).prefix(80), 1).count == 8


def test_step_family():
    for n in range(1, 10):
        assert count_fluctuations(family_step(n).prefix(n + 4), 1).count == 1


def test_upcrossings():
    seq = [0, 1, 0, 1]
    rep = count_upcrossings(seq, Fraction(1, 4), Fraction(3, 4))
    assert rep.count == 2 and rep.witnesses == [1, 2, 3, 4]
    with pytest.raises(ValueError):
        count_upcrossings(seq, 1, 0)


@given(st.lists(rationals, min_size=1, max_size=14), rationals, rationals)
def test_upcrossing_greedy_is_optimal(values, a, b):
    assume(a < b)
    assert count_upcrossings(values, a, b).count == brute_upcrossings(values, a, b)


def test_learner():
    seq = family_S(3).prefix(10)
    t = learn_limit(seq, 0)
    assert t.mind_changes == 3
    assert replay_transcript(seq, t)
    assert json.loads(dumps(t))["mind_changes"] == 3
    assert learn_limit(family_step(4).prefix(8), 0).mind_changes == 1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=14))
def test_learner_mind_changes_bounded_by_fluctuations(values):
    t = learn_limit(values, 0)
    assert t.mind_changes <= count_fluctuations(values, 1).count


def test_json_round_trip():
    seq = NormedSeq([Fraction(1, 3), 2, (1, Fraction(1, 2))][:2])
    assert NormedSeq.from_json(json.loads(json.dumps(seq.to_json()))).values == seq.values
